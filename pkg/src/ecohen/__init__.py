"""Statistically principled community extraction from node-typed networks."""
__version__ = "0.1.0"
