"""
Django settings for fedauction - Base settings.

fedauction uses Django as an application host for its management commands;
there is no database and no HTTP surface.
"""

from pathlib import Path

from config.runtime import RuntimeSettings

# Build paths inside the project
BASE_DIR = Path(__file__).resolve().parent.parent.parent

# Application definition
INSTALLED_APPS = [
    # Local apps - in layering order
    "apps.common",
    "apps.core",
    "apps.online",
    "apps.baselines",
    "apps.simulation",
    "apps.properties",
    "apps.experiments",
]

DATABASES: dict[str, dict] = {}

# Internationalization
LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

# Runtime settings (FEDAUCTION_* environment variables)
RUNTIME = RuntimeSettings()
FEDAUCTION_OUTPUT_DIR = RUNTIME.output_dir
FEDAUCTION_JOBS = RUNTIME.jobs
