"""
Experiments app - scenario files, experiment runs and CSV output.

The management commands run, sweep, properties and table1 live here.
"""
