"""Realized frequency maps and their block-discrepancy certificates.

A :class:`FrequencyMap` assigns to each source lattice point with index in a
contiguous range a target point, again stored by integer index in a target
lattice.  The block discrepancy over ``[pR, (p+1)R)`` is the average
displacement of the source points in that block; the largest such value over
the checked blocks is the windowed certificate ``epsilon_hat``.

Block sums are formed from integer index sums and the two lattice parameters,
so they are exact for rational data and carry only the approximant error of
the stored scalars otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np

from .lattice import AffineLattice, Window
from .numerics import (ExactScalar, NumericsError, TieError, as_scalar, floor_linear,
                       fractional_linear)

MIN_BLOCKS = 10


class CertificateError(NumericsError):
    """A certificate could not be measured (too few blocks, missing data)."""


@dataclass(frozen=True)
class AvdoninCertificate:
    R: ExactScalar
    epsilon_hat: ExactScalar
    blocks_checked: int
    worst_block: int
    window: Optional[Window] = None

    def passes(self, threshold) -> bool:
        return self.epsilon_hat < as_scalar(threshold)

    def to_json(self, threshold=None) -> dict:
        out = {"R": self.R.to_json(), "epsilon_hat": self.epsilon_hat.to_json(),
               "epsilon_hat_float": float(self.epsilon_hat),
               "blocks_checked": self.blocks_checked, "worst_block": self.worst_block,
               "window": None if self.window is None else self.window.to_json()}
        if threshold is not None:
            threshold = as_scalar(threshold)
            out["threshold"] = threshold.to_json()
            out["pass"] = bool(self.epsilon_hat <= threshold)
        return out

    @classmethod
    def from_json(cls, obj) -> "AvdoninCertificate":
        w = obj.get("window")
        return cls(ExactScalar.from_json(obj["R"]), ExactScalar.from_json(obj["epsilon_hat"]),
                   int(obj["blocks_checked"]), int(obj["worst_block"]),
                   None if w is None else Window.from_json(w))


@dataclass(frozen=True, eq=False)
class FrequencyMap:
    """Injective map from source indices ``first_index + i`` to target indices ``targets[i]``."""

    source: AffineLattice
    target: AffineLattice
    first_index: int
    targets: np.ndarray
    label: str = ""
    certificate: Optional[AvdoninCertificate] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.ascontiguousarray(self.targets, dtype=np.int64)
        t.setflags(write=False)
        object.__setattr__(self, "targets", t)
        # the prefix-sum cache belongs to one targets array only
        object.__setattr__(self, "meta", {k: v for k, v in self.meta.items() if k != "_prefix"})

    # -- basic views --------------------------------------------------------
    def __len__(self) -> int:
        return len(self.targets)

    @property
    def source_indices(self) -> np.ndarray:
        return np.arange(self.first_index, self.first_index + len(self.targets), dtype=np.int64)

    @property
    def last_index(self) -> int:
        return self.first_index + len(self.targets) - 1

    def source_values(self) -> np.ndarray:
        return self.source.points(self.source_indices)

    def target_values(self) -> np.ndarray:
        return self.target.points(self.targets)

    def displacements(self) -> np.ndarray:
        """Float displacements ``map(x) - x``."""
        return self.target_values() - self.source_values()

    @property
    def displacement_bound(self) -> float:
        """Measured ``max |map(x) - x|`` over the domain (float, padded by 1e-9)."""
        if not len(self):
            return 0.0
        return float(np.abs(self.displacements()).max()) + 1e-9

    @property
    def separation(self) -> float:
        """Smallest gap between distinct range points."""
        if len(self) < 2:
            return float("inf")
        gaps = np.diff(np.sort(self.targets))
        return float(gaps.min()) / float(self.target.a)

    def is_injective(self) -> bool:
        return len(np.unique(self.targets)) == len(self.targets)

    def with_certificate(self, cert: AvdoninCertificate) -> "FrequencyMap":
        return replace(self, certificate=cert)

    def relabel(self, label: str) -> "FrequencyMap":
        return replace(self, label=label)

    # -- domain helpers -------------------------------------------------------
    def domain_window(self) -> Window:
        """Smallest window ``[x_first, x_last + spacing)`` covering the domain."""
        return Window(self.source.point(self.first_index), self.source.point(self.last_index + 1))

    def restrict(self, k_lo: int, k_hi: int) -> "FrequencyMap":
        k_lo, k_hi = max(k_lo, self.first_index), min(k_hi, self.last_index + 1)
        if k_hi <= k_lo:
            raise ValueError("restriction is empty")
        sl = slice(k_lo - self.first_index, k_hi - self.first_index)
        return replace(self, first_index=k_lo, targets=self.targets[sl], certificate=None)

    def lookup(self, k) -> np.ndarray:
        """Target indices for source indices ``k`` (all must lie in the domain)."""
        k = np.asarray(k, dtype=np.int64)
        if k.size and (k.min() < self.first_index or k.max() > self.last_index):
            raise KeyError("source index outside the map's domain")
        return self.targets[k - self.first_index]

    # -- exact sums -----------------------------------------------------------
    def _prefix(self) -> np.ndarray:
        cache = self.meta.get("_prefix")
        if cache is None or len(cache) != len(self) + 1:
            cache = np.concatenate([[0], np.cumsum(self.targets, dtype=np.int64)])
            self.meta["_prefix"] = cache
        return cache

    def index_sum(self, k_lo: int, k_hi: int) -> ExactScalar:
        """Exact ``sum(map(x_k) - x_k)`` for source indices ``k_lo <= k < k_hi``."""
        if k_hi <= k_lo:
            return ExactScalar(Fraction(0))
        if k_lo < self.first_index or k_hi - 1 > self.last_index:
            raise CertificateError("block extends outside the map's domain")
        pre = self._prefix()
        n = k_hi - k_lo
        target_sum = int(pre[k_hi - self.first_index] - pre[k_lo - self.first_index])
        source_sum = (k_lo + k_hi - 1) * n // 2  # always an integer
        tgt = (self.target.alpha * n + target_sum) / self.target.a
        src = (self.source.alpha * n + source_sum) / self.source.a
        return tgt - src

    def window_sum(self, w: Window) -> ExactScalar:
        k_lo, k_hi = self.source.index_range(w)
        return self.index_sum(k_lo, k_hi)

    # -- serialization ------------------------------------------------------------
    def to_json(self) -> dict:
        return {"label": self.label, "source": self.source.to_json(),
                "target": self.target.to_json(), "first_index": int(self.first_index),
                "target_indices": self.targets.tolist()}

    @classmethod
    def from_json(cls, obj) -> "FrequencyMap":
        return cls(AffineLattice.from_json(obj["source"]), AffineLattice.from_json(obj["target"]),
                   int(obj["first_index"]), np.asarray(obj["target_indices"], dtype=np.int64),
                   obj.get("label", ""))

    # -- construction helpers ---------------------------------------------------------
    @classmethod
    def identity(cls, lattice: AffineLattice, k_lo: int, k_hi: int, label="identity"):
        return cls(lattice, lattice, k_lo, np.arange(k_lo, k_hi, dtype=np.int64), label)

    @classmethod
    def from_sorted_set(cls, values: Sequence, length, alpha=None,
                        target: Optional[AffineLattice] = None, label: str = "",
                        anchor: float = 0.0) -> "FrequencyMap":
        """Order-preserving alignment of a finite frequency set with ``(Z + alpha)/length``.

        The element nearest ``anchor`` gets index 0.  When ``alpha`` is None the
        offset is fitted so the mean displacement vanishes.  ``target`` must
        contain every value; by default the coarsest ``Z / 2^j`` that does.
        """
        vals = np.sort(np.asarray(values, dtype=np.float64))
        if len(vals) < 2 or np.any(np.diff(vals) <= 0):
            raise ValueError("need at least two distinct frequencies")
        length = as_scalar(length)
        if target is None:
            target = _dyadic_lattice(vals)
        idx = np.rint(vals * float(target.a) - float(target.alpha)).astype(np.int64)
        if not np.allclose(target.points(idx), vals, rtol=0, atol=1e-9):
            raise ValueError("frequencies do not lie on the target lattice")
        zero = int(np.argmin(np.abs(vals - anchor)))
        k = np.arange(len(vals), dtype=np.int64) - zero
        if alpha is None:
            fitted = float(np.mean(vals * float(length) - k))
            shift = int(np.floor(fitted))
            k = k + shift
            alpha = Fraction(fitted - shift).limit_denominator(1 << 20)
        source = AffineLattice(length, as_scalar(alpha))
        return cls(source, target, int(k[0]), idx, label)


def _dyadic_lattice(vals: np.ndarray) -> AffineLattice:
    for j in range(0, 21):
        scale = 1 << j
        scaled = vals * scale
        if np.all(np.abs(scaled - np.rint(scaled)) < 1e-9):
            return AffineLattice(ExactScalar(Fraction(scale)), ExactScalar(Fraction(0)))
    raise ValueError("frequencies are not on a dyadic grid; pass an explicit target lattice")


# -- certificates ---------------------------------------------------------------

def block_starts(source: AffineLattice, R: ExactScalar, p) -> np.ndarray:
    """First source index of each block ``[pR, (p+1)R)``: ``ceil(a p R - alpha)``."""
    floors, ties = floor_linear(np.asarray(p, dtype=np.int64), -(source.a * R), source.alpha)
    if ties.any():
        raise TieError("a lattice point sits within guard of a block boundary; "
                       "input indistinguishable from rational at this precision")
    return -floors


def covered_blocks(m: FrequencyMap, R: ExactScalar,
                   window: Optional[Window] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Blocks inside both the window and the map's domain.

    Returns ``(p, starts)`` where ``starts`` has one more entry than ``p``:
    block ``p[i]`` covers source indices ``[starts[i], starts[i+1])``.
    """
    R = as_scalar(R)
    dom = m.domain_window()
    lo, hi = dom.lo, dom.hi
    if window is not None:
        lo, hi = max(lo, window.lo), min(hi, window.hi)
    if not lo < hi:
        return np.zeros(0, dtype=np.int64), np.zeros(1, dtype=np.int64)
    p_lo = (lo / R).ceil(strict=False)
    p_hi = (hi / R).floor(strict=False)
    if p_hi <= p_lo:
        return np.zeros(0, dtype=np.int64), np.zeros(1, dtype=np.int64)
    p = np.arange(p_lo, p_hi + 1, dtype=np.int64)
    starts = block_starts(m.source, R, p)
    ok = (starts[:-1] >= m.first_index) & (starts[1:] - 1 <= m.last_index)
    idx = np.flatnonzero(ok)
    if not len(idx):
        return np.zeros(0, dtype=np.int64), np.zeros(1, dtype=np.int64)
    # domain and window are intervals, so the covered blocks are consecutive
    first, last = idx[0], idx[-1]
    return p[first:last + 1], starts[first:last + 2]


def block_sums(m: FrequencyMap, starts: np.ndarray) -> Tuple[np.ndarray, int]:
    """Exact block sums for consecutive blocks given by ``starts``.

    Returns ``(numerators, D)``: block ``i`` sums to ``numerators[i] / D``
    (Python ints in an object array), computed from the stored values of the
    lattice parameters without intermediate rounding.
    """
    pre = m._prefix()
    starts = np.asarray(starts, dtype=np.int64)
    n = np.diff(starts).astype(object)
    tsum = (pre[starts[1:] - m.first_index] - pre[starts[:-1] - m.first_index]).astype(object)
    ksum = ((starts[:-1] + starts[1:] - 1).astype(object) * n) // 2
    at, alt = m.target.a.value, m.target.alpha.value
    as_, als = m.source.a.value, m.source.alpha.value
    c_n = alt / at - als / as_
    c_t, c_k = 1 / at, 1 / as_
    D = _lcm(c_n.denominator, c_t.denominator, c_k.denominator)
    num = n * int(c_n * D) + tsum * int(c_t * D) - ksum * int(c_k * D)
    return num, D


def _lcm(*values: int) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def _sum_scalar(value: Fraction, m: FrequencyMap) -> ExactScalar:
    guards = [g for g in (m.source.a.guard, m.source.alpha.guard, m.target.a.guard,
                          m.target.alpha.guard) if g is not None]
    if not guards:
        return ExactScalar(value)
    return ExactScalar(value, max(guards))


def measure_discrepancy(m: FrequencyMap, R, window: Optional[Window] = None,
                        min_blocks: int = MIN_BLOCKS) -> AvdoninCertificate:
    """Windowed certificate: ``max_p |(1/R) sum_{x in [pR,(p+1)R)} (m(x) - x)|``."""
    R = as_scalar(R)
    if not R > 0:
        raise ValueError("block length must be positive")
    ps, starts = covered_blocks(m, R, window)
    if len(ps) < min_blocks:
        raise CertificateError(
            f"window hosts {len(ps)} blocks of length {float(R):.6g}; need {min_blocks}")
    num, D = block_sums(m, starts)
    mags = np.abs(num)
    i = int(np.argmax(mags))
    worst = _sum_scalar(Fraction(int(mags[i]), D), m)
    return AvdoninCertificate(R, worst / R, len(ps), int(ps[i]), window)


@dataclass(frozen=True)
class RieszCheck:
    passed: bool
    epsilon_hat: float
    threshold: float
    margin: float

    def __bool__(self):
        return self.passed

    def to_json(self) -> dict:
        return {"pass": self.passed, "epsilon_hat": self.epsilon_hat,
                "threshold": self.threshold, "margin": self.margin}


def riesz_threshold(length) -> ExactScalar:
    return 1 / (4 * as_scalar(length))


def check_riesz_hypothesis(m, length) -> RieszCheck:
    """Pass iff the certified ``epsilon_hat`` is below ``1/(4 * length)``.

    ``m`` is a certified :class:`FrequencyMap` or an :class:`AvdoninCertificate`.
    """
    cert = m if isinstance(m, AvdoninCertificate) else getattr(m, "certificate", None)
    if cert is None:
        raise CertificateError("map carries no certificate; call measure_discrepancy first")
    thr = riesz_threshold(length)
    eps = cert.epsilon_hat
    return RieszCheck(bool(eps < thr), float(eps), float(thr), float(thr - eps))


def measure_equidistribution(a, alpha, R: int, m_range: Tuple[int, int], f=None,
                             f_mean: float = 0.5) -> float:
    """Worst block deviation ``max_m |(1/R) sum_{k=mR}^{(m+1)R-1} f(frac((k+alpha)/a)) - f_mean|``.

    With ``f`` None the identity is used and the block sums are exact up to the
    approximant error.  ``m_range`` is inclusive at both ends.
    """
    a, alpha = as_scalar(a), as_scalar(alpha)
    inv = 1 / a
    m_lo, m_hi = m_range
    worst = 0.0
    for m in range(m_lo, m_hi + 1):
        k = np.arange(m * R, (m + 1) * R, dtype=np.int64)
        if f is None:
            floors, _ = floor_linear(k, inv, alpha * inv)
            k_sum = (m * R + (m + 1) * R - 1) * R // 2
            exact = ((alpha * R + k_sum) * inv - int(floors.sum())) / R - as_scalar(
                Fraction(f_mean))
            dev = abs(float(exact))
        else:
            frac = fractional_linear(k, inv, alpha * inv)
            dev = abs(float(np.mean(f(frac))) - f_mean)
        worst = max(worst, dev)
    return worst
