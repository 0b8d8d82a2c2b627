"""Semantic service layer for a simulated fischertechnik-style shop floor."""

__version__ = "0.1.0"
