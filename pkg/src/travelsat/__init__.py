"""Explain and predict traveler satisfaction from airline review data."""

__version__ = "0.1.0"
