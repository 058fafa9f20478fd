"""Numerical laboratory for perturbations of plane waves on the relativistic string."""

__version__ = "0.1.0"
