"""
Core auction domain: value objects and closed-form utility formulas.
"""
