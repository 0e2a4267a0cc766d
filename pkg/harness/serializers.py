from rest_framework import serializers

from .models import BenchmarkRun


class BenchmarkRunSerializer(serializers.ModelSerializer):
    created_by = serializers.CharField(source="created_by.username", read_only=True, default=None)
    categories = serializers.JSONField(read_only=True)

    class Meta:
        model = BenchmarkRun
        fields = ["id", "label", "seed", "accuracy", "n_questions", "categories", "created_by", "created_at"]
        read_only_fields = fields


class BenchmarkRunDetailSerializer(BenchmarkRunSerializer):
    class Meta(BenchmarkRunSerializer.Meta):
        fields = BenchmarkRunSerializer.Meta.fields + ["report"]
        read_only_fields = fields
