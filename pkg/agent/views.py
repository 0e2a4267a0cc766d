import logging

from rest_framework import mixins, permissions, status, viewsets
from rest_framework.decorators import action
from rest_framework.response import Response

from agent.exceptions import AgentError, AgentTransportError
from agent.services import record_run, run_agent

from .models import AgentRun
from .serializers import AgentRunCreateSerializer, AgentRunSerializer

logger = logging.getLogger(__name__)


class AgentRunViewSet(
    mixins.CreateModelMixin,
    mixins.ListModelMixin,
    mixins.RetrieveModelMixin,
    viewsets.GenericViewSet,
):
    """
    Run the agent on inline series and browse past runs.
    POST /api/runs/ runs synchronously and returns the stored run.
    """

    queryset = AgentRun.objects.select_related("created_by")
    permission_classes = [permissions.IsAuthenticated]

    def get_queryset(self):
        user = self.request.user
        if user.is_staff:
            return self.queryset
        return self.queryset.filter(created_by=user)

    def get_serializer_class(self):
        if self.action == "create":
            return AgentRunCreateSerializer
        return AgentRunSerializer

    def list(self, request, *args, **kwargs):
        queryset = self.filter_queryset(self.get_queryset())
        page = self.paginate_queryset(queryset)
        if page is not None:
            serializer = self.get_serializer(page, many=True)
            paginated_response = self.get_paginated_response(serializer.data)
            paginated_response.data.update({"success": True})
            return paginated_response

        serializer = self.get_serializer(queryset, many=True)
        return Response({
            "success": True,
            "count": len(serializer.data),
            "results": serializer.data,
        }, status=status.HTTP_200_OK)

    def create(self, request, *args, **kwargs):
        serializer = self.get_serializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        data = serializer.validated_data
        backend = data["backend"]
        try:
            result = run_agent(
                data["question"],
                data["series"],
                backend,
                budget=data.get("budget"),
                critic_llm=data.get("critic_llm"),
            )
        except AgentTransportError as exc:
            logger.warning("Run for user %s aborted by the backend: %s", request.user.pk, exc)
            run = record_run(None, question=data["question"], backend_kind=backend.kind, user=request.user, error=str(exc))
            return Response({
                "success": False,
                "message": f"The model backend failed: {exc}",
                "run": AgentRunSerializer(run).data,
            }, status=status.HTTP_502_BAD_GATEWAY)
        except AgentError as exc:
            return Response({"success": False, "message": str(exc)}, status=status.HTTP_400_BAD_REQUEST)

        run = record_run(result, backend_kind=backend.kind, user=request.user)
        return Response({
            "success": True,
            "message": f"Run {run.pk} finished: {run.get_status_display()}.",
            "run": AgentRunSerializer(run).data,
        }, status=status.HTTP_201_CREATED)

    def retrieve(self, request, *args, **kwargs):
        run = self.get_object()
        return Response({"success": True, "run": AgentRunSerializer(run).data})

    @action(detail=True, methods=["get"])
    def trace(self, request, pk=None):
        run = self.get_object()
        return Response({"success": True, "trace": run.trace})
