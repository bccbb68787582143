"""
Common app - shared exceptions and seeded random streams.
"""
