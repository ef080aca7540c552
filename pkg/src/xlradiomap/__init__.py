"""Deterministic XL-MIMO radiomap simulation toolkit."""

__version__ = "0.1.0"
