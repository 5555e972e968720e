"""Variance of primes in arithmetic progressions, computed from both sides of the explicit formula."""

__version__ = "0.1.0"
