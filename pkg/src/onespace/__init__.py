"""Exact marginal-consistency toolkit for ±1 random variables."""

__version__ = "0.1.0"
