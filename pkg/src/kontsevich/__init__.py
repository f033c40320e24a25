"""Exact computations with Kontsevich complexes of monomial functions."""

__version__ = "0.1.0"
