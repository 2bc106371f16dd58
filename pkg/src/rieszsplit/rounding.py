"""Rounding maps between half-integer lattices and Beatty-Fraenkel checks.

A rounding map sends ``(Z+1/2)/c`` into ``(Z+1/2)/d`` (``c < d``) by moving
each point to the nearest target point.  Points are identified by integer
indices: source index ``k`` stands for ``(k+1/2)/c`` and target index ``m``
for ``(m+1/2)/d``.  In normalized coordinates ``x' = d x`` the map is
``m = floor(x')``.

When ``c/d = N0/K0`` with ``K0`` even, some source points land exactly on a
target midpoint and the two maps of a pair would collide.  Those points are
pushed down one target step at alternating positions of the period ``2 K0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from .lattice import HALF, AffineLattice, Window
from .numerics import (ExactScalar, NumericsError, TieError, as_scalar, floor_linear,
                       lowest_terms_ratio)


class ParityCase(str, enum.Enum):
    IRRATIONAL = "irrational"
    RATIONAL_ODD = "rational_odd"
    RATIONAL_EVEN = "rational_even"


class Correction(str, enum.Enum):
    """Which midpoint hits are pushed down one step in the even case."""

    NONE = "none"
    UPPER_HALF = "upper_half"  # positions in [K0, 2K0) of the period 2K0
    LOWER_HALF = "lower_half"  # positions in [0, K0)


class ConstructionError(NumericsError):
    """An internal identity that must hold exactly did not."""


@dataclass(frozen=True)
class RoundingMap:
    source: AffineLattice
    target: AffineLattice
    parity_case: ParityCase
    correction: Correction = Correction.NONE
    N0: Optional[int] = None
    K0: Optional[int] = None

    @property
    def ratio(self) -> ExactScalar:
        """``d / c``: the factor taking source values to normalized target coordinates."""
        return self.target.a / self.source.a

    @property
    def period(self) -> Optional[int]:
        """Period in target indices (rational cases only)."""
        if self.parity_case is ParityCase.IRRATIONAL:
            return None
        return self.K0 if self.parity_case is ParityCase.RATIONAL_ODD else 2 * self.K0

    @property
    def source_period(self) -> Optional[int]:
        """Number of source indices per period."""
        if self.period is None:
            return None
        return self.period * self.N0 // self.K0

    def indices(self, k) -> np.ndarray:
        """Target indices of the source indices ``k`` (int64 array)."""
        k = np.asarray(k, dtype=np.int64)
        if self.parity_case is ParityCase.IRRATIONAL:
            m, ties = floor_linear(k, self.ratio, self.ratio * HALF)
            if ties.any():
                bad = int(k.ravel()[int(np.argmax(ties.ravel()))])
                raise TieError(f"rounding source index {bad} is within guard of a target "
                               "midpoint; input indistinguishable from rational")
            return m
        # (k + 1/2) K0 / N0 = (2k+1) K0 / (2 N0)
        numer = (2 * k + 1) * np.int64(self.K0)
        m, rem = np.divmod(numer, np.int64(2 * self.N0))
        if self.correction is not Correction.NONE:
            on_midpoint = rem == 0
            pos = np.mod(m, 2 * self.K0)
            if self.correction is Correction.UPPER_HALF:
                hit = on_midpoint & (pos >= self.K0)
            else:
                hit = on_midpoint & (pos < self.K0)
            m = m - hit.astype(np.int64)
        return m

    def __call__(self, k):
        return self.indices(k)

    def naive_indices(self, k) -> np.ndarray:
        """Target indices without the even-case correction."""
        bare = RoundingMap(self.source, self.target, self.parity_case, Correction.NONE,
                           self.N0, self.K0)
        return bare.indices(k)

    def source_range(self, m_lo: int, m_hi: int) -> Tuple[int, int]:
        """Source indices whose images lie in target indices ``[m_lo, m_hi)``.

        Valid when ``m_lo`` and ``m_hi`` are block boundaries of the pair, since
        the map then keeps each block inside itself.
        """
        d = self.target.a
        k_lo, k_hi = self.source.index_range(Window(as_scalar(m_lo) / d, as_scalar(m_hi) / d))
        return k_lo, k_hi

    def realize(self, k_lo: int, k_hi: int, label: str = ""):
        """The map on source indices ``[k_lo, k_hi)`` as a :class:`FrequencyMap`."""
        from .avdonin import FrequencyMap

        k = np.arange(k_lo, k_hi, dtype=np.int64)
        return FrequencyMap(self.source, self.target, k_lo, self.indices(k), label)

    def to_json(self) -> dict:
        return {"source": self.source.to_json(), "target": self.target.to_json(),
                "parity_case": self.parity_case.value, "correction": self.correction.value,
                "N0": self.N0, "K0": self.K0}


def build_pair(a, b, total=None) -> Tuple[RoundingMap, RoundingMap, int]:
    """Rounding maps ``phi: (Z+1/2)/a -> (Z+1/2)/(a+b)`` and ``psi`` from ``(Z+1/2)/b``.

    Returns ``(phi, psi, K)`` with ``K`` the smallest valid block length in
    target indices: 1 in the irrational case, ``K0`` or ``2 K0`` otherwise.
    ``total`` overrides ``a + b`` when the caller knows it exactly.
    """
    a, b = as_scalar(a), as_scalar(b)
    if not (a > 0 and b > 0):
        raise ValueError("lengths must be positive")
    total = a + b if total is None else as_scalar(total)
    target = AffineLattice.half(total)
    src_a, src_b = AffineLattice.half(a), AffineLattice.half(b)
    ratio = lowest_terms_ratio(a, total)
    if ratio is None:
        phi = RoundingMap(src_a, target, ParityCase.IRRATIONAL)
        psi = RoundingMap(src_b, target, ParityCase.IRRATIONAL)
        return phi, psi, 1
    n0, k0 = ratio
    if k0 % 2:
        phi = RoundingMap(src_a, target, ParityCase.RATIONAL_ODD, Correction.NONE, n0, k0)
        psi = RoundingMap(src_b, target, ParityCase.RATIONAL_ODD, Correction.NONE, k0 - n0, k0)
        return phi, psi, k0
    phi = RoundingMap(src_a, target, ParityCase.RATIONAL_EVEN, Correction.UPPER_HALF, n0, k0)
    psi = RoundingMap(src_b, target, ParityCase.RATIONAL_EVEN, Correction.LOWER_HALF, k0 - n0, k0)
    return phi, psi, 2 * k0


@dataclass
class BeattyReport:
    a: ExactScalar
    N: int
    collisions: List[int]
    gaps: List[int]

    @property
    def is_partition(self) -> bool:
        return not self.collisions and not self.gaps

    def to_json(self) -> dict:
        return {"a": self.a.to_json(), "N": self.N, "partition": self.is_partition,
                "collisions": self.collisions[:100], "gaps": self.gaps[:100]}


def _floors_in(a: ExactScalar, N: int, strict: bool) -> np.ndarray:
    """``floor((k+1/2)/a)`` for every ``k`` whose value lies in ``[-N, N)``."""
    inv = 1 / a
    # floor(y) in [-N, N) iff y in [-N, N): solve for k on (Z+1/2)*inv
    lattice = AffineLattice(a, HALF)
    k_lo, k_hi = lattice.index_range(Window.of(-N, N), strict=False)
    k = np.arange(k_lo, k_hi, dtype=np.int64)
    m, ties = floor_linear(k, inv, inv * HALF)
    if strict and ties.any():
        bad = int(k[int(np.argmax(ties))])
        raise TieError(f"floor((k+1/2)/a) at k={bad} is within guard of an integer; "
                       "input indistinguishable from rational at this precision")
    return m


def verify_beatty(a, N: int, strict: bool = True) -> BeattyReport:
    """Check that ``floor((Z+1/2)/a)`` and ``floor((Z+1/2)/(1-a))`` partition ``Z ∩ [-N, N)``."""
    a = as_scalar(a)
    if not 0 < a < 1:
        raise ValueError("need 0 < a < 1")
    hits = np.concatenate([_floors_in(a, N, strict), _floors_in(1 - a, N, strict)])
    hits = hits[(hits >= -N) & (hits < N)]
    counts = np.bincount(hits + N, minlength=2 * N)
    collisions = (np.flatnonzero(counts > 1) - N).tolist()
    gaps = (np.flatnonzero(counts == 0) - N).tolist()
    return BeattyReport(a, N, collisions, gaps)


def period_block_sum(phi: RoundingMap) -> ExactScalar:
    """Exact sum of ``phi(x) - x`` over one period starting at 0; zero by construction."""
    if phi.period is None:
        raise ValueError("period block sums need a rational parity case")
    n_src = phi.source_period
    k = np.arange(n_src, dtype=np.int64)
    m = phi.indices(k)
    # sum((m+1/2)/d) - sum((k+1/2)/c) in exact arithmetic
    d, c = phi.target.a.value, phi.source.a.value
    return ExactScalar(Fraction(2 * int(m.sum()) + n_src, 2) / d
                       - Fraction(2 * int(k.sum()) + n_src, 2) / c)


def verify_zero_avdonin_block(phi: RoundingMap) -> ExactScalar:
    """Return the exact one-period block sum, raising with a breakdown if it is not 0."""
    total = period_block_sum(phi)
    if total.value != 0:
        k = np.arange(phi.source_period, dtype=np.int64)
        m = phi.indices(k)
        d, c = phi.target.a.value, phi.source.a.value
        terms = [(int(kk), str(Fraction(2 * int(mm) + 1, 2) / d - Fraction(2 * int(kk) + 1, 2) / c))
                 for kk, mm in zip(k, m)]
        raise ConstructionError(f"nonzero period block sum {total.value}; terms {terms}")
    return total
