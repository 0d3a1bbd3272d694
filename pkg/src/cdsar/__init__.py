"""Speckled coordinate-delay SAR images: simulation and delayed-target discrimination."""

__version__ = "0.1.0"
