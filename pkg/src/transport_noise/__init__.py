"""Galerkin Euler systems with transport noise on the 2D torus."""

__version__ = "0.1.0"
