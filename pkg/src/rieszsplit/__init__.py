"""Partitions of the half-integer lattice into exponential Riesz bases for interval partitions."""

from .numerics import ExactScalar, RangeError, TieError, parse_scalar
from .lattice import AffineLattice, Window

__all__ = ["ExactScalar", "TieError", "RangeError", "parse_scalar", "AffineLattice", "Window"]
