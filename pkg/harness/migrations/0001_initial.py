# Generated by Django 5.2.7 on 2026-10-12 09:20

import django.db.models.deletion
from django.conf import settings
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
        migrations.swappable_dependency(settings.AUTH_USER_MODEL),
    ]

    operations = [
        migrations.CreateModel(
            name='BenchmarkRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('label', models.CharField(blank=True, max_length=120)),
                ('seed', models.IntegerField(blank=True, help_text='Seed of the synthetic questions, if any.', null=True)),
                ('accuracy', models.FloatField(default=0.0)),
                ('n_questions', models.PositiveIntegerField(default=0)),
                ('report', models.JSONField(blank=True, default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('created_by', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='benchmark_runs', to=settings.AUTH_USER_MODEL)),
            ],
            options={
                'db_table': 'benchmark_runs',
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['label', 'created_at'], name='benchmark_runs_label_idx')],
            },
        ),
    ]
