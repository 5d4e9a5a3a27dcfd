"""Fused indoor localization: PDR + negative map + RSS/GNSS particle filter."""

__version__ = "0.1.0"
