"""Prescribed-time Newton extremum seeking under delays."""

__version__ = "0.1.0"
