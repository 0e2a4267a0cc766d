from django.apps import AppConfig


class AgentConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'agent'
    verbose_name = 'Agent runs'

    def ready(self):
        """Import signal handlers when app is ready."""
        import agent.signals  # noqa
