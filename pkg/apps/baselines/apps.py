"""
Baselines app configuration.
"""

from django.apps import AppConfig


class BaselinesConfig(AppConfig):
    name = "apps.baselines"
    label = "baselines"
