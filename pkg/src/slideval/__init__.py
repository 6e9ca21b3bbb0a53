"""Slide extraction-quality evaluation toolkit."""

__version__ = "0.1.0"
