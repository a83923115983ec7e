"""Numerical laboratory for random and monitored quantum circuits."""

__version__ = "0.1.0"
