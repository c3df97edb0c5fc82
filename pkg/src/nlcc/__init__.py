"""Simulations of quantum non-locality and communication complexity."""

__version__ = "0.1.0"
