import json
import os
import pathlib
import sys

PROJECT = 'spherelab'
LOCAL_DIR = pathlib.Path(
    os.environ.get('SPHERELAB_HOME', pathlib.Path.home() / '.spherelab')
)
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'rest_framework',
    'spherelab.lab.apps.LabConfig',
]
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': str(LOCAL_DIR / 'db.sqlite3'),
    }
}
DEFAULT_AUTO_FIELD = 'django.db.models.AutoField'
REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
}
TIME_ZONE = 'UTC'
USE_TZ = True

LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR']

config = LOCAL_DIR / 'config.json'
try:
    LOCAL_DIR.mkdir(parents=True, exist_ok=True)
    try:
        with config.open() as f:
            extra = json.load(f)
    except FileNotFoundError:
        extra = {}

    DEBUG = extra.get('DEBUG', False)
    SECRET_KEY = extra.get('SECRET_KEY', 'spherelab-local')
    LOG_LEVEL = extra.get('LOG_LEVEL', 'INFO')
    OUTPUT_DIR = pathlib.Path(extra.get('OUTPUT_DIR', LOCAL_DIR / 'runs'))
    WORKERS = extra.get('WORKERS', 1)

    if not isinstance(DEBUG, bool):
        raise ValueError('DEBUG must be a bool')
    if not isinstance(SECRET_KEY, str) or not SECRET_KEY:
        raise ValueError('SECRET_KEY must be a >0-length string')
    if LOG_LEVEL not in LOG_LEVELS:
        raise ValueError('LOG_LEVEL must be one of {}'.format(LOG_LEVELS))
    if not isinstance(WORKERS, int) or WORKERS < 1:
        raise ValueError('WORKERS must be a positive int')
except (IOError, ValueError) as e:
    sys.stderr.write('{}: {}\n'.format(config, e))
    sys.exit(1)

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
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
        PROJECT: {
            'handlers': ['console'],
            'level': LOG_LEVEL,
        },
    },
}
