"""Unsupervised keyword discovery from discrete unit sequences."""

__version__ = "0.1.0"
