from django.apps import AppConfig


class RadonshellConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'radonshell'
    verbose_name = 'Reciprocal simplexes and adjoint Radon verification'
