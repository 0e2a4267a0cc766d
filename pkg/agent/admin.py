from django.contrib import admin

from .models import AgentRun


@admin.register(AgentRun)
class AgentRunAdmin(admin.ModelAdmin):
    list_display = [
        "id",
        "intent_task",
        "status",
        "gate_rounds",
        "steps_used",
        "backend_kind",
        "created_by",
        "created_at",
    ]
    list_filter = ["status", "intent_task", "backend_kind", "created_at"]
    search_fields = ["question", "answer", "created_by__username"]
    readonly_fields = ["created_at", "updated_at", "trace", "reasons"]

    fieldsets = (
        (None, {"fields": ("question", "intent_task", "status", "answer")}),
        ("Outcome", {"fields": ("reasons", "error", "gate_rounds", "steps_used", "budget", "backend_kind")}),
        ("Trace", {"fields": ("trace",), "classes": ("collapse",)}),
        ("Metadata", {"fields": ("created_by", "created_at", "updated_at")}),
    )
