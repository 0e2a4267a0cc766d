from django.conf import settings
from django.db import models


class BenchmarkRun(models.Model):
    """
    A recorded benchmark report (`tsagent bench --record`).
    """

    label = models.CharField(max_length=120, blank=True)
    seed = models.IntegerField(null=True, blank=True, help_text="Seed of the synthetic questions, if any.")
    accuracy = models.FloatField(default=0.0)
    n_questions = models.PositiveIntegerField(default=0)
    report = models.JSONField(default=dict, blank=True)
    created_by = models.ForeignKey(
        settings.AUTH_USER_MODEL,
        null=True,
        blank=True,
        on_delete=models.SET_NULL,
        related_name="benchmark_runs",
    )
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = "benchmark_runs"
        ordering = ["-created_at"]
        indexes = [
            models.Index(fields=["label", "created_at"], name="benchmark_runs_label_idx"),
        ]

    def __str__(self):
        return f"{self.label or 'Benchmark'} ({self.n_questions} questions): {self.accuracy:.3f}"

    @property
    def categories(self):
        return self.report.get("categories", {})
