"""Convergence of Jaynes-Cummings dynamics to the semiclassical Rabi limit."""

__version__ = "0.1.0"
