from django.contrib import admin

from .models import BenchmarkRun


@admin.register(BenchmarkRun)
class BenchmarkRunAdmin(admin.ModelAdmin):
    list_display = ["id", "label", "seed", "accuracy", "n_questions", "created_by", "created_at"]
    list_filter = ["created_at"]
    search_fields = ["label", "created_by__username"]
    readonly_fields = ["created_at", "report"]

    fieldsets = (
        (None, {"fields": ("label", "seed", "accuracy", "n_questions")}),
        ("Report", {"fields": ("report",), "classes": ("collapse",)}),
        ("Metadata", {"fields": ("created_by", "created_at")}),
    )
