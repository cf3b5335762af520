"""Spectral analysis and simulation of a two-species drift model in a periodic channel."""

__version__ = "0.1.0"
