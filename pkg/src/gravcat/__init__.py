"""Thresholded gravity accessibility with fitted power-exponential impedance."""
__version__ = "0.1.0"
