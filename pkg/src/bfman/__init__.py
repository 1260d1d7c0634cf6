"""Sparse Bayesian factor models with mass-nonlocal factor scores."""
__version__ = "0.1.0"
