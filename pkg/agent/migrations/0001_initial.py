# Generated by Django 5.2.7 on 2026-10-12 09:14

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
            name='AgentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('question', models.TextField()),
                ('intent_task', models.CharField(blank=True, db_index=True, max_length=64)),
                ('status', models.CharField(choices=[('ANSWERED', 'Answered'), ('FAILED', 'Failed'), ('ERRORED', 'Errored')], db_index=True, default='ANSWERED', max_length=20)),
                ('answer', models.TextField(blank=True)),
                ('reasons', models.JSONField(blank=True, default=list, help_text='Rejection reasons of a failed run.')),
                ('error', models.TextField(blank=True, help_text='Backend error that aborted the run.')),
                ('gate_rounds', models.PositiveIntegerField(default=0)),
                ('steps_used', models.PositiveIntegerField(default=0)),
                ('budget', models.PositiveIntegerField(default=15)),
                ('backend_kind', models.CharField(blank=True, max_length=20)),
                ('trace', models.JSONField(blank=True, null=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('created_by', models.ForeignKey(blank=True, help_text='User who requested the run.', null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='agent_runs', to=settings.AUTH_USER_MODEL)),
            ],
            options={
                'db_table': 'agent_runs',
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['status', 'created_at'], name='agent_runs_status_idx')],
            },
        ),
    ]
