"""
Online selection and payment mechanism.
"""
