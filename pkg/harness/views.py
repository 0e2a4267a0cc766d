from rest_framework import permissions, status, viewsets
from rest_framework.response import Response

from .models import BenchmarkRun
from .serializers import BenchmarkRunDetailSerializer, BenchmarkRunSerializer


class BenchmarkRunViewSet(viewsets.ReadOnlyModelViewSet):
    """
    Recorded benchmark reports. The list carries per-category accuracy,
    the detail view the full report.
    """

    queryset = BenchmarkRun.objects.select_related("created_by")
    permission_classes = [permissions.IsAuthenticated]

    def get_serializer_class(self):
        if self.action == "retrieve":
            return BenchmarkRunDetailSerializer
        return BenchmarkRunSerializer

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

    def retrieve(self, request, *args, **kwargs):
        serializer = self.get_serializer(self.get_object())
        return Response({"success": True, "benchmark": serializer.data})
