"""Polynomial Bergman spaces for exponentially weighted planar measures."""

__version__ = "0.1.0"
