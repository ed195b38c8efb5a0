"""Objective regionalisation of gridded multi-parameter data."""

__version__ = "0.1.0"
