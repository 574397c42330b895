"""Fibonacci-coded OAM quantum key distribution simulator."""

__version__ = "0.1.0"
