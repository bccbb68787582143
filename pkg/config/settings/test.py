"""
Test settings for fedauction.
"""

from .dev import *  # noqa: F403

FEDAUCTION_JOBS = 1
