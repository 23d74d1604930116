"""Vanishing moment solvers for fully nonlinear second-order PDEs."""

__version__ = "0.1.0"
