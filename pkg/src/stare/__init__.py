"""Trajectory tokenization, transformer encoding and relationship analysis."""

__version__ = "0.1.0"
