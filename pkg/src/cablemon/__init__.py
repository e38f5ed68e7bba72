"""Desk-scale high-voltage cable condition monitoring."""
__version__ = "0.1.0"
