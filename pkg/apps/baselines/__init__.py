"""
Benchmark mechanisms compared against the online mechanism.
"""
