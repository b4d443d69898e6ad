"""Finite-precision construction of a hypercyclic unitary-plus-rank-two operator."""

__version__ = "0.1.0"
