"""Convex integrands with slow and non-uniform growth: hypothesis checks,
approximation, a finite-element minimizer and a priori bound experiments."""

__version__ = "0.1.0"
