"""Numerical laboratory for the stochastic point-vortex system and the
stochastic 2D vorticity equation under a shared environmental noise."""

__version__ = "0.1.0"
