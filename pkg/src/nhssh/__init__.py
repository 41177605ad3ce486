"""Numerical laboratory for the two-dimensional non-Hermitian SSH lattice."""

__version__ = "0.1.0"

from .model import ModelParams, build_bloch, build_real_space, symmetry_residuals  # noqa: F401
