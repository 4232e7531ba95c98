"""Numerical verification of a plug construction for almost symplectic foliations."""

__version__ = "0.1.0"
