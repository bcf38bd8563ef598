"""Certified short sweepouts of triangulated surfaces."""

__version__ = "0.1.0"
