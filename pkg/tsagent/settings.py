"""
Django settings for the tsagent project.

Everything environment-dependent is read through python-decouple, so a
`.env` file or plain environment variables override the defaults below.
"""

from datetime import timedelta
from pathlib import Path
from decouple import config, Csv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-tsagent-local-only-7q!x2v$0m#k9r')

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = config('DEBUG', default=True, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost,127.0.0.1,testserver', cast=Csv())


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    # Third party apps
    'rest_framework',
    'rest_framework_simplejwt.token_blacklist',
    'corsheaders',
    # Local apps
    'series',
    'toolkit',
    'llm',
    'oversight',
    'agent',
    'harness',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'corsheaders.middleware.CorsMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'tsagent.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'tsagent.wsgi.application'


# Database
# sqlite keeps the agent runnable on a laptop; set DB_ENGINE=postgresql for a shared deployment.

DB_ENGINE = config('DB_ENGINE', default='sqlite')

if DB_ENGINE == 'postgresql':
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.postgresql',
            'NAME': config('DB_NAME', default='tsagent'),
            'USER': config('DB_USER', default='postgres'),
            'PASSWORD': config('DB_PASSWORD', default='postgres'),
            'HOST': config('DB_HOST', default='localhost'),
            'PORT': config('DB_PORT', default='5432'),
            'OPTIONS': {
                'connect_timeout': 10,
            },
        }
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': config('DB_NAME', default=str(BASE_DIR / 'db.sqlite3')),
        }
    }


# Password validation

AUTH_PASSWORD_VALIDATORS = [
    {
        'NAME': 'django.contrib.auth.password_validation.UserAttributeSimilarityValidator',
    },
    {
        'NAME': 'django.contrib.auth.password_validation.MinimumLengthValidator',
    },
    {
        'NAME': 'django.contrib.auth.password_validation.CommonPasswordValidator',
    },
    {
        'NAME': 'django.contrib.auth.password_validation.NumericPasswordValidator',
    },
]


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Static files (CSS, JavaScript, Images)

STATIC_URL = 'static/'
STATIC_ROOT = BASE_DIR / 'staticfiles'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Django REST Framework Configuration
REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [
        'rest_framework_simplejwt.authentication.JWTAuthentication',
        'rest_framework.authentication.SessionAuthentication',  # Keep for admin panel
        'rest_framework.authentication.BasicAuthentication',
    ],
    'DEFAULT_PERMISSION_CLASSES': [
        'rest_framework.permissions.IsAuthenticated',
    ],
    'DEFAULT_PAGINATION_CLASS': 'rest_framework.pagination.PageNumberPagination',
    'PAGE_SIZE': 20,
    'DEFAULT_FILTER_BACKENDS': [
        'rest_framework.filters.SearchFilter',
        'rest_framework.filters.OrderingFilter',
    ],
}

# JWT Settings
SIMPLE_JWT = {
    'ACCESS_TOKEN_LIFETIME': timedelta(minutes=config('JWT_ACCESS_MINUTES', default=60, cast=int)),
    'REFRESH_TOKEN_LIFETIME': timedelta(days=config('JWT_REFRESH_DAYS', default=7, cast=int)),
    'ROTATE_REFRESH_TOKENS': True,
    'BLACKLIST_AFTER_ROTATION': True,
    'UPDATE_LAST_LOGIN': True,
    'ALGORITHM': 'HS256',
    'SIGNING_KEY': SECRET_KEY,
    'AUTH_HEADER_TYPES': ('Bearer',),
    'USER_ID_FIELD': 'id',
    'USER_ID_CLAIM': 'user_id',
}

# CORS Configuration
CORS_ALLOWED_ORIGINS = config(
    'CORS_ALLOWED_ORIGINS',
    default='http://localhost:3000,http://127.0.0.1:3000',
    cast=Csv(),
)

CORS_ALLOW_CREDENTIALS = True


# Logging

LOG_LEVEL = config('LOG_LEVEL', default='INFO')

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
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False}
        for app in ('series', 'toolkit', 'llm', 'oversight', 'agent', 'harness')
    },
}


# Agent configuration
# Every detector default is overridable per call; these are the values used when a call omits them.

TSAGENT = {
    'DEFAULT_BUDGET': config('TSAGENT_BUDGET', default=15, cast=int),
    'MALFORMED_TURN_LIMIT': config('TSAGENT_MALFORMED_LIMIT', default=3, cast=int),
    'CRITIC_USE_LLM': config('TSAGENT_CRITIC_USE_LLM', default=True, cast=bool),
    'OBSERVATION_PREVIEW': 5,
    'ANOMALY_THRESHOLD': config('TSAGENT_ANOMALY_THRESHOLD', default=3.0, cast=float),
    'ANOMALY_WINDOW': config('TSAGENT_ANOMALY_WINDOW', default=7, cast=int),
    'TREND_ALPHA': config('TSAGENT_TREND_ALPHA', default=0.05, cast=float),
    'NOISE_ALPHA': config('TSAGENT_NOISE_ALPHA', default=0.01, cast=float),
    'SEASONALITY_BUCKETS': (0.3, 0.6),
    'GRANGER_ALPHA': config('TSAGENT_GRANGER_ALPHA', default=0.05, cast=float),
    'INTENT_RULES_PATH': config(
        'TSAGENT_INTENT_RULES',
        default=str(BASE_DIR / 'oversight' / 'rules' / 'intents.json'),
    ),
    'TRACE_DIR': config('TSAGENT_TRACE_DIR', default=str(BASE_DIR / 'traces')),
    'TRACE_EXPORT_ON_SAVE': config('TSAGENT_TRACE_EXPORT_ON_SAVE', default=False, cast=bool),
    'BENCH_PARALLELISM': config('TSAGENT_BENCH_PARALLELISM', default=4, cast=int),
    'LLM': {
        'KIND': config('TSAGENT_LLM_KIND', default='http'),
        'ENDPOINT': config('TSAGENT_LLM_ENDPOINT', default='https://api.openai.com/v1'),
        'MODEL': config('TSAGENT_LLM_MODEL', default='gpt-4o-mini'),
        'AUTH_ENV': config('TSAGENT_LLM_AUTH_ENV', default='OPENAI_API_KEY'),
        'TEMPERATURE': config('TSAGENT_LLM_TEMPERATURE', default=0.0, cast=float),
        'MAX_RETRIES': config('TSAGENT_LLM_MAX_RETRIES', default=4, cast=int),
        'TIMEOUT': config('TSAGENT_LLM_TIMEOUT', default=60.0, cast=float),
    },
}
