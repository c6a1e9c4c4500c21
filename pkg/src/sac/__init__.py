"""Stochastic Allen-Cahn equation with mild noise: simulation and validation toolkit."""

__version__ = "0.1.0"
