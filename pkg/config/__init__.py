"""
Config package for fedauction.
"""
