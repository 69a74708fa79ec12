"""Unsupervised novelty detection benchmark for vibration signals."""

__version__ = "0.1.0"
