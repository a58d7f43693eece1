"""Requirement-oriented prompt training and assessment."""

__version__ = "0.1.0"
