"""Islanded microgrid capacity-constrained control toolkit."""
__version__ = "1.0.0"
