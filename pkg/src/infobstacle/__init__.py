"""Grid solvers and diagnostics for the obstacle problem of the infinity
Laplacian and its p-Laplacian approximations."""

__version__ = "0.1.0"
