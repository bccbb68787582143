#!/usr/bin/env python
"""
fedauction command-line entry point.

    python manage.py run --config scenarios/run.env
    python manage.py sweep --config scenarios/budget_sweep.env
    python manage.py table1 --config scenarios/table1.env
    python manage.py properties --config scenarios/properties.env
"""
import os
import sys


def main():
    """Run an experiment command."""
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings.dev")
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install fedauction with "
            "`pip install -e .` inside an activated virtual environment."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == "__main__":
    main()
