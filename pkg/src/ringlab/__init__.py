"""Numerical laboratory for radial symmetry of Δu = f(u) on rings."""

__version__ = "0.1.0"
