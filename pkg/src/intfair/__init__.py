"""Intersectional fairness auditing over discrete protected attributes."""

__version__ = "0.1.0"
