from django.conf import settings
from django.db import models


class AgentRun(models.Model):
    """
    One agent run requested through the API, with its full trace document.
    """

    class Status(models.TextChoices):
        ANSWERED = "ANSWERED", "Answered"
        FAILED = "FAILED", "Failed"
        ERRORED = "ERRORED", "Errored"

    question = models.TextField()
    intent_task = models.CharField(max_length=64, blank=True, db_index=True)
    status = models.CharField(
        max_length=20,
        choices=Status.choices,
        default=Status.ANSWERED,
        db_index=True,
    )
    answer = models.TextField(blank=True)
    reasons = models.JSONField(default=list, blank=True, help_text="Rejection reasons of a failed run.")
    error = models.TextField(blank=True, help_text="Backend error that aborted the run.")
    gate_rounds = models.PositiveIntegerField(default=0)
    steps_used = models.PositiveIntegerField(default=0)
    budget = models.PositiveIntegerField(default=15)
    backend_kind = models.CharField(max_length=20, blank=True)
    trace = models.JSONField(null=True, blank=True)
    created_by = models.ForeignKey(
        settings.AUTH_USER_MODEL,
        null=True,
        blank=True,
        on_delete=models.SET_NULL,
        related_name="agent_runs",
        help_text="User who requested the run.",
    )
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        db_table = "agent_runs"
        ordering = ["-created_at"]
        indexes = [
            models.Index(fields=["status", "created_at"], name="agent_runs_status_idx"),
        ]

    def __str__(self):
        return f"Run {self.pk} ({self.intent_task or 'unknown'}): {self.status}"

    @property
    def trace_filename(self):
        return f"agent-run-{self.pk}.json"
