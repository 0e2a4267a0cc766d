from rest_framework import permissions, status, viewsets
from rest_framework.response import Response

from toolkit.tools import build_registry


class ToolCatalogViewSet(viewsets.ViewSet):
    """
    The JSON tool catalog the reasoner prompt is built from.
    GET /api/tools/?family=rel
    GET /api/tools/{name}/
    """

    permission_classes = [permissions.IsAuthenticated]

    def list(self, request):
        family = request.query_params.get("family")
        catalog = [entry for entry in build_registry().catalog() if family in (None, entry["family"])]
        return Response({
            "success": True,
            "count": len(catalog),
            "tools": catalog,
        }, status=status.HTTP_200_OK)

    def retrieve(self, request, pk=None):
        entry = next((entry for entry in build_registry().catalog() if entry["name"] == pk), None)
        if entry is None:
            return Response({
                "success": False,
                "message": f"No tool named {pk!r}.",
            }, status=status.HTTP_404_NOT_FOUND)
        return Response({"success": True, "tool": entry})
