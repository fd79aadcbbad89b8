"""Numerical laboratory for the exclusion process with a slow bond.

Submodules
----------
grid         cell-centered grids, fields, inner products, space-time norms
heat         conductance-weighted heat solver and spectral oracles
green        explicit inverse Laplacian with Robin-coupled ends
energy       W_alpha energy functional and test-function builder
ssep         event-driven exclusion simulator and ensemble statistics
experiments  alpha sweeps, hydrodynamic comparison, diagnostics
cli          command-line entry point
"""
from .grid import Field, Grid, Trajectory

__all__ = ["Field", "Grid", "Trajectory"]
__version__ = "0.1.0"
