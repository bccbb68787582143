"""
Online mechanism app configuration.
"""

from django.apps import AppConfig


class OnlineConfig(AppConfig):
    name = "apps.online"
    label = "online"
