"""Partial ordering of decoherence strength for non-Markovian environments."""

__version__ = "0.1.0"
