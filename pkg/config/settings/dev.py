"""
Development settings for fedauction.
"""

import os

from .base import *  # noqa: F403

SECRET_KEY = os.getenv(
    "SECRET_KEY", "django-insecure-dev-key-change-in-production-12345678901234567890"
)

DEBUG = True

# Logging - stdout carries CSV and reports, so logs go to stderr
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(message)s"},
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "plain",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": os.getenv("LOG_LEVEL", "WARNING"),
    },
}

# Configure structured logging
from config.logging import configure_logging  # noqa: E402

configure_logging(os.getenv("LOG_FORMAT", "json"))
