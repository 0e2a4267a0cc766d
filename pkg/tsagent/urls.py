"""
URL configuration for the tsagent project.

All API endpoints live under /api/: JWT tokens, the tool catalog, agent
runs and benchmark reports.
"""
from django.contrib import admin
from django.urls import include, path
from rest_framework.routers import DefaultRouter
from rest_framework_simplejwt.views import (
    TokenBlacklistView,
    TokenObtainPairView,
    TokenRefreshView,
    TokenVerifyView,
)

from agent.views import AgentRunViewSet
from harness.views import BenchmarkRunViewSet
from toolkit.views import ToolCatalogViewSet

router = DefaultRouter()
router.register('tools', ToolCatalogViewSet, basename='tools')
router.register('runs', AgentRunViewSet, basename='runs')
router.register('benchmarks', BenchmarkRunViewSet, basename='benchmarks')

urlpatterns = [
    path('admin/', admin.site.urls),
    path('api/auth/token/', TokenObtainPairView.as_view(), name='token-obtain'),
    path('api/auth/token/refresh/', TokenRefreshView.as_view(), name='token-refresh'),
    path('api/auth/token/verify/', TokenVerifyView.as_view(), name='token-verify'),
    path('api/auth/token/blacklist/', TokenBlacklistView.as_view(), name='token-blacklist'),
    path('api/', include(router.urls)),
]
