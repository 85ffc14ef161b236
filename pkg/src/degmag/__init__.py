"""Spectral toolkit for 2D magnetic Schrodinger operators with a field vanishing like |x1|^(nu-1)."""

__version__ = "0.1.0"
