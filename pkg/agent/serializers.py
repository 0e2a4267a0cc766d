from rest_framework import serializers

from llm.backends import BackendConfig
from llm.exceptions import LLMConfigError
from series.exceptions import SeriesError
from series.services import SeriesService
from series.store import SeriesStore

from .models import AgentRun


class AgentRunSerializer(serializers.ModelSerializer):
    status_display = serializers.CharField(source="get_status_display", read_only=True)
    created_by = serializers.CharField(source="created_by.username", read_only=True, default=None)

    class Meta:
        model = AgentRun
        fields = [
            "id",
            "question",
            "intent_task",
            "status",
            "status_display",
            "answer",
            "reasons",
            "error",
            "gate_rounds",
            "steps_used",
            "budget",
            "backend_kind",
            "created_by",
            "created_at",
            "updated_at",
        ]
        read_only_fields = fields


class AgentRunCreateSerializer(serializers.Serializer):
    """
    A question plus the series it is about, in the JSON series layout:
    {"name", "index", "channels": {"<channel>": [...]}}.
    """

    question = serializers.CharField()
    series = serializers.ListField(child=serializers.JSONField(), allow_empty=False)
    budget = serializers.IntegerField(min_value=1, max_value=100, required=False)
    backend = serializers.JSONField(required=False)
    critic_llm = serializers.BooleanField(required=False, allow_null=True, default=None)

    def validate_series(self, value):
        store = SeriesStore()
        try:
            for payload in value:
                store.add(SeriesService.from_payload(payload))
        except SeriesError as exc:
            raise serializers.ValidationError(str(exc))
        return store

    def validate_backend(self, value):
        try:
            return BackendConfig.from_data(value)
        except LLMConfigError as exc:
            raise serializers.ValidationError(str(exc))

    def validate(self, attrs):
        if "backend" not in attrs:
            try:
                attrs["backend"] = BackendConfig.from_settings()
            except LLMConfigError as exc:
                raise serializers.ValidationError({"backend": str(exc)})
        return attrs
