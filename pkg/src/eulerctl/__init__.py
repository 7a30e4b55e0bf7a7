"""Spectral-Galerkin Euler simulation and control synthesis on the 3-torus."""
