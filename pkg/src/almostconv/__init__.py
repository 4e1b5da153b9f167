"""Numerical tests for almost convergence of bounded functions on the line."""

__version__ = "0.1.0"
