"""Exact enumeration, separation machinery, and Monte Carlo verification for Ising perceptrons."""

__version__ = "0.1.0"
