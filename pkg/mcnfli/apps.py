from django.apps import AppConfig


class McnfliConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "mcnfli"
    verbose_name = "Interdependent network flows"
