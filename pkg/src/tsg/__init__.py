"""Simulation and analysis of the threshold-driven streaming graph TSG(n, d, c)."""

__version__ = "0.1.0"
