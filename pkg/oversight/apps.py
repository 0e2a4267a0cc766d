from django.apps import AppConfig


class OversightConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'oversight'
    verbose_name = 'Critic and quality gate'
