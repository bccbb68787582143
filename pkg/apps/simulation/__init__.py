"""
Synthetic populations, arrival processes and multi-task reputation dynamics.
"""
