from pathlib import Path

from decouple import config

BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: the project never serves requests, the key only satisfies Django
SECRET_KEY = config('SECRET_KEY', default='django-insecure-radonshell-local-only')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'rest_framework',
    'radonshell',
]

# Flat files only: manifests, CSV tables and SVG plots under RADONSHELL_OUTPUT_DIR
DATABASES = {}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
}

# Experiment settings, each overridable with a RADONSHELL_ environment variable or .env entry
RADONSHELL = {
    'OUTPUT_DIR': config('RADONSHELL_OUTPUT_DIR', default=str(BASE_DIR / 'results')),
    'SEED': config('RADONSHELL_SEED', default=20240601, cast=int),
    'WORKERS': config('RADONSHELL_WORKERS', default=1, cast=int),
    'BLOCK_SIZE': config('RADONSHELL_BLOCK_SIZE', default=16384, cast=int),
    'QUADRATURE_LEVEL': config('RADONSHELL_QUADRATURE_LEVEL', default=8, cast=int),
    'SOFT_OK': config('RADONSHELL_SOFT_OK', default=False, cast=bool),
}

LOG_LEVEL = config('RADONSHELL_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'radonshell': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}
