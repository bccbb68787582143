"""
Settings package for fedauction.
"""
