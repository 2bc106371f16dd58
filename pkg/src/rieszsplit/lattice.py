"""Affine lattices ``(Z + alpha) / a`` and half-open windows over the real line."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Tuple

import numpy as np

from .numerics import ExactScalar, as_scalar, floor_linear, strict_floor_linear

HALF = ExactScalar(Fraction(1, 2))


@dataclass(frozen=True)
class Window:
    """The half-open interval ``[lo, hi)``."""

    lo: ExactScalar
    hi: ExactScalar

    def __post_init__(self):
        object.__setattr__(self, "lo", as_scalar(self.lo))
        object.__setattr__(self, "hi", as_scalar(self.hi))
        if not self.lo < self.hi:
            raise ValueError(f"empty window [{self.lo}, {self.hi})")

    @classmethod
    def of(cls, lo, hi) -> "Window":
        return cls(as_scalar(lo), as_scalar(hi))

    @property
    def length(self) -> ExactScalar:
        return self.hi - self.lo

    def contains(self, x) -> bool:
        return self.lo <= x < self.hi

    def to_json(self) -> list:
        return [self.lo.to_json(), self.hi.to_json()]

    @classmethod
    def from_json(cls, obj) -> "Window":
        return cls(ExactScalar.from_json(obj[0]), ExactScalar.from_json(obj[1]))


@dataclass(frozen=True)
class AffineLattice:
    """The set ``(Z + alpha) / a`` with spacing ``1/a``."""

    a: ExactScalar
    alpha: ExactScalar = HALF

    def __post_init__(self):
        object.__setattr__(self, "a", as_scalar(self.a))
        object.__setattr__(self, "alpha", as_scalar(self.alpha))
        if not self.a > 0:
            raise ValueError("lattice density a must be positive")

    @classmethod
    def half(cls, a) -> "AffineLattice":
        """The lattice ``(Z + 1/2) / a`` used throughout the construction."""
        return cls(as_scalar(a), HALF)

    def point(self, k: int) -> ExactScalar:
        return (self.alpha + k) / self.a

    def points(self, k) -> np.ndarray:
        """Float64 values of the points with indices ``k``."""
        k = np.asarray(k, dtype=np.float64)
        return (k + float(self.alpha)) / float(self.a)

    def index_range(self, w: Window, strict: bool = True) -> Tuple[int, int]:
        """Indices ``[k_lo, k_hi)`` of the points inside ``w``.

        Solves ``lo <= (k + alpha)/a < hi`` for ``k`` with exact ceilings, so
        no stepping error accumulates over long windows.
        """
        k_lo = (self.a * w.lo - self.alpha).ceil(strict)
        k_hi = (self.a * w.hi - self.alpha).ceil(strict)
        return k_lo, max(k_lo, k_hi)

    def enumerate(self, w: Window) -> List[Tuple[int, ExactScalar]]:
        k_lo, k_hi = self.index_range(w)
        return [(k, self.point(k)) for k in range(k_lo, k_hi)]

    def count_in(self, w: Window) -> int:
        k_lo, k_hi = self.index_range(w)
        return k_hi - k_lo

    def to_json(self) -> dict:
        return {"a": self.a.to_json(), "alpha": self.alpha.to_json()}

    @classmethod
    def from_json(cls, obj) -> "AffineLattice":
        return cls(ExactScalar.from_json(obj["a"]), ExactScalar.from_json(obj["alpha"]))


def count_positive(a, n) -> np.ndarray:
    """``F(a, N) = floor(a N + 1/2)``: points of ``(Z+1/2)/a`` in ``[0, N]``.

    The right end only matters for rational ``a``, when a point can sit on ``N``.
    """
    return strict_floor_linear(np.asarray(n), a, HALF)


def count_negative(a, n) -> np.ndarray:
    """``G(a, N) = -ceil(-a N + 1/2) + 1``: points of ``(Z+1/2)/a`` in ``[-N, 0)``."""
    return strict_floor_linear(np.asarray(n), a, -HALF) + 1


def floor_with_ties(a, n, shift=0):
    """Re-export of the vectorized floor for callers that handle ties themselves."""
    return floor_linear(n, a, shift)
