"""Hierarchical dialog encoders with absolute and relative speaker modeling."""

__version__ = "0.1.0"
