"""Desk-scale numerics for torus extensions of hyperbolic flows."""

__version__ = "0.1.0"
