"""Numerical evidence for Riesz-basis conclusions on finite sections.

Nothing here proves that an infinite system is a Riesz basis.  Gram spectra of
growing truncations, completeness residuals and window counts are surrogates
whose trends are reported next to the block-discrepancy certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

EIGEN_RTOL = 1e-9
MAX_GRAM = 1024


@dataclass
class GramEstimate:
    offset: float
    length: float
    frequencies: np.ndarray
    lambda_min: float
    lambda_max: float

    @property
    def n(self) -> int:
        return len(self.frequencies)

    @property
    def condition(self) -> float:
        return self.lambda_max / self.lambda_min if self.lambda_min > 0 else math.inf

    def to_json(self) -> dict:
        return {"n": self.n, "offset": self.offset, "length": self.length,
                "lambda_min": self.lambda_min, "lambda_max": self.lambda_max,
                "condition": self.condition}


def truncate(freqs, n: int) -> np.ndarray:
    """The ``n`` frequencies of smallest modulus; ties go to the smaller value."""
    vals = np.asarray(freqs, dtype=np.float64).ravel()
    order = np.lexsort((vals, np.abs(vals)))
    return np.sort(vals[order[:n]])


def _check_distinct(vals: np.ndarray):
    s = np.sort(vals)
    dup = np.flatnonzero(np.diff(s) == 0)
    if len(dup):
        raise ValueError(f"duplicate frequency {s[dup[0]]}")


def gram_matrix(freqs, length: float, offset: float = 0.0) -> np.ndarray:
    """``G[l, m] = integral over [offset, offset+length] of exp(2 pi i (l - m) t) dt``."""
    lam = np.asarray(freqs, dtype=np.float64)
    diff = lam[:, None] - lam[None, :]
    phase = np.exp(2j * np.pi * diff * (offset + length / 2))
    G = length * phase * np.sinc(diff * length)
    np.fill_diagonal(G, length)
    return G


def gram_bounds(freqs, length: float, n: Optional[int] = None,
                offset: float = 0.0) -> GramEstimate:
    """Extreme eigenvalues of the Gram matrix of the ``n`` smallest frequencies."""
    vals = np.asarray(freqs, dtype=np.float64).ravel()
    _check_distinct(vals)
    lam = vals if n is None else truncate(vals, n)
    if len(lam) < 2:
        raise ValueError("need at least two frequencies")
    if len(lam) > MAX_GRAM:
        raise ValueError(f"truncation {len(lam)} exceeds {MAX_GRAM}")
    ev = linalg.eigvalsh(gram_matrix(lam, length, offset))
    return GramEstimate(float(offset), float(length), lam, float(ev[0]), float(ev[-1]))


def gram_trend(freqs, length: float, truncations: Sequence[int] = (64, 128, 256, 512),
               offset: float = 0.0) -> List[GramEstimate]:
    return [gram_bounds(freqs, length, n, offset) for n in truncations]


def trend_is_stable(trend: Sequence[GramEstimate], floor: float, max_drop: float = 0.25) -> bool:
    """Smallest eigenvalue stays above ``floor`` and its last relative drop is below ``max_drop``."""
    mins = [g.lambda_min for g in trend]
    if min(mins) < floor:
        return False
    if len(mins) >= 2 and mins[-2] > 0:
        return (mins[-2] - mins[-1]) / mins[-2] <= max_drop
    return True


# -- test functions with closed-form inner products --------------------------

def _moments(omega: float, degree: int) -> np.ndarray:
    """``I_i = integral_0^1 u^i exp(-i omega u) du`` for ``i = 0..degree``."""
    out = np.empty(degree + 1, dtype=complex)
    if abs(omega) < 1.0:
        for i in range(degree + 1):
            term, total = 1.0 + 0j, 0j
            for k in range(40):
                total += term / (i + k + 1)
                term *= -1j * omega / (k + 1)
            out[i] = total
        return out
    e = np.exp(-1j * omega)
    out[0] = (1 - e) / (1j * omega)
    for i in range(1, degree + 1):
        out[i] = (e - i * out[i - 1]) / (-1j * omega)
    return out


@dataclass(frozen=True)
class Exponential:
    frequency: float

    def __call__(self, t):
        return np.exp(2j * np.pi * self.frequency * np.asarray(t))

    def inner(self, lam: np.ndarray, offset: float, length: float) -> np.ndarray:
        d = self.frequency - np.asarray(lam, dtype=np.float64)
        return length * np.exp(2j * np.pi * d * (offset + length / 2)) * np.sinc(d * length)

    def norm2(self, offset: float, length: float) -> float:
        return float(length)


@dataclass(frozen=True)
class Indicator:
    lo: float
    hi: float

    def __call__(self, t):
        t = np.asarray(t)
        return ((t >= self.lo) & (t < self.hi)).astype(float)

    def _clip(self, offset, length):
        lo, hi = max(self.lo, offset), min(self.hi, offset + length)
        return lo, max(lo, hi)

    def inner(self, lam, offset, length):
        lo, hi = self._clip(offset, length)
        return Exponential(0.0).inner(lam, lo, hi - lo) if hi > lo else np.zeros(len(lam), complex)

    def norm2(self, offset, length):
        lo, hi = self._clip(offset, length)
        return float(hi - lo)


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial ``sum coeffs[i] t^i`` of degree at most 3."""

    coeffs: Tuple[float, ...]

    def __post_init__(self):
        if len(self.coeffs) > 4:
            raise ValueError("degree at most 3")

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(np.asarray(t), self.coeffs)

    def inner(self, lam, offset, length):
        lam = np.asarray(lam, dtype=np.float64)
        deg = len(self.coeffs) - 1
        # substitute t = offset + length * u and expand (offset + length u)^j
        out = np.zeros(len(lam), dtype=complex)
        for idx, l in enumerate(lam):
            mom = _moments(2 * np.pi * l * length, deg)
            acc = 0j
            for j, c in enumerate(self.coeffs):
                for i in range(j + 1):
                    acc += c * math.comb(j, i) * offset ** (j - i) * length ** i * mom[i]
            out[idx] = length * np.exp(-2j * np.pi * l * offset) * acc
        return out

    def norm2(self, offset, length):
        P = np.polynomial.Polynomial(self.coeffs)
        Q = (P * P).integ()
        return float(Q(offset + length) - Q(offset))


def completeness_residual(freqs, length: float, f, n: Optional[int] = None,
                          offset: float = 0.0, rcond: float = 1e-12) -> float:
    """``||f||^2 - ||P f||^2`` with ``P`` the projection onto the truncated span."""
    vals = np.asarray(freqs, dtype=np.float64).ravel()
    _check_distinct(vals)
    lam = vals if n is None else truncate(vals, n)
    # H[l, m] = <e_m, e_l>, the transpose of the Gram matrix
    H = gram_matrix(lam, length, offset).T
    b = f.inner(lam, offset, length)
    w, U = linalg.eigh(H)
    keep = w > rcond * w[-1]
    coef = U[:, keep].conj().T @ b
    energy = float(np.sum(np.abs(coef) ** 2 / w[keep]))
    return max(0.0, f.norm2(offset, length) - energy)


def projection_residual_quadrature(freqs, length: float, f, offset: float = 0.0,
                                   nodes: Optional[int] = None,
                                   breakpoints: Sequence[float] = ()) -> float:
    """Brute-force residual by Gauss-Legendre least squares (independent oracle).

    ``breakpoints`` split the interval where ``f`` is not smooth; each piece
    gets its own rule with ``nodes`` points.
    """
    lam = np.asarray(freqs, dtype=np.float64)
    if nodes is None:
        nodes = int(4 * (np.abs(lam).max() * length + len(lam))) + 64
    cuts = sorted({offset, offset + length, *(b for b in breakpoints
                                              if offset < b < offset + length)})
    x, w = np.polynomial.legendre.leggauss(nodes)
    ts, ws = [], []
    for lo, hi in zip(cuts, cuts[1:]):
        ts.append(lo + (x + 1) * (hi - lo) / 2)
        ws.append(w * (hi - lo) / 2)
    t, w = np.concatenate(ts), np.concatenate(ws)
    sw = np.sqrt(w)
    E = np.exp(2j * np.pi * np.outer(t, lam)) * sw[:, None]
    y = f(t) * sw
    coef, *_ = np.linalg.lstsq(E, y, rcond=1e-12)
    return float(np.sum(np.abs(y - E @ coef) ** 2))


# -- shifted lattices ------------------------------------------------------------------

def vandermonde_matrix(N: int, J: Sequence[int]) -> np.ndarray:
    k = np.asarray(sorted(J), dtype=np.float64)
    m = np.arange(len(k), dtype=np.float64)
    return np.exp(2j * np.pi * np.outer(k, m) / N)


def vandermonde_bounds(N: int, J: Sequence[int], truncation: int = 256,
                       offset: float = 0.0) -> Tuple[float, float, GramEstimate]:
    """Squared extreme singular values ``A, B`` and the Gram check of ``U (N Z + k_j)``.

    The truncated system on an interval of length ``|J|/N`` has its Gram
    spectrum inside ``[A/N, B/N]``.
    """
    J = sorted(set(int(j) for j in J))
    if not J or J[0] < 0 or J[-1] >= N:
        raise ValueError("J must be a nonempty subset of {0..N-1}")
    s = linalg.svdvals(vandermonde_matrix(N, J))
    A, B = float(s[-1] ** 2), float(s[0] ** 2)
    reps = truncation // len(J) + 2
    n = np.arange(-reps, reps + 1)
    freqs = (N * n[:, None] + np.asarray(J)[None, :]).ravel()
    est = gram_bounds(freqs, len(J) / N, truncation, offset)
    return A, B, est


# -- densities ---------------------------------------------------------------------------

@dataclass
class DensityReport:
    radii: List[float]
    inf_counts: List[int]
    sup_counts: List[int]
    D_minus: Fraction
    D_plus: Fraction
    per_radius: List[Tuple[float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"radii": self.radii, "D_minus": float(self.D_minus), "D_plus": float(self.D_plus),
                "per_radius": [{"r": r, "inf": lo, "sup": hi}
                               for r, (lo, hi) in zip(self.radii, self.per_radius)]}


def window_counts(vals: np.ndarray, r, support: Tuple[float, float]) -> Tuple[int, int]:
    """Smallest and largest ``#(vals in [x, x+r))`` over windows inside ``support``.

    The largest count is attained with a point at the left end, the smallest
    just to the right of a point; both are scanned with binary searches.
    """
    lo, hi = support
    r = float(r)
    starts = vals[(vals >= lo) & (vals + r <= hi)]
    if not len(starts):
        raise ValueError(f"support too short for radius {r}")
    sup = np.searchsorted(vals, starts + r, side="left") - np.searchsorted(vals, starts,
                                                                            side="left")
    inf = np.searchsorted(vals, starts + r, side="right") - np.searchsorted(vals, starts,
                                                                             side="right")
    # also windows flush with the support ends
    edge = [np.searchsorted(vals, lo + r, side="left") - np.searchsorted(vals, lo, side="left"),
            np.searchsorted(vals, hi, side="left") - np.searchsorted(vals, hi - r, side="left")]
    return int(min(inf.min(), *edge)), int(max(sup.max(), *edge))


def beurling_density(freqs, radii: Sequence, support: Optional[Tuple[float, float]] = None
                     ) -> DensityReport:
    """Window counts per radius and extrapolated lower/upper densities.

    The extrapolation is the slope of the counts between the two largest
    radii, which removes a bounded boundary excess such as one extra point.
    """
    vals = np.sort(np.asarray(freqs, dtype=np.float64).ravel())
    _check_distinct(vals)
    if support is None:
        support = (float(vals[0]), float(vals[-1]) + 1e-9)
    radii = sorted(float(r) for r in radii)
    infs, sups, per = [], [], []
    for r in radii:
        lo_c, hi_c = window_counts(vals, r, support)
        infs.append(lo_c)
        sups.append(hi_c)
        per.append((lo_c / r, hi_c / r))
    if len(radii) >= 2:
        dr = Fraction(radii[-1]) - Fraction(radii[-2])
        D_minus = Fraction(infs[-1] - infs[-2]) / dr
        D_plus = Fraction(sups[-1] - sups[-2]) / dr
        D_minus, D_plus = min(D_minus, D_plus), max(D_minus, D_plus)
    else:
        D_minus, D_plus = Fraction(infs[0]) / Fraction(radii[0]), Fraction(sups[0]) / Fraction(
            radii[0])
    return DensityReport(radii, infs, sups, D_minus, D_plus, per)


# -- negative-control sets ------------------------------------------------------------------

def kadec_sets(terms: int) -> Tuple[np.ndarray, np.ndarray]:
    """Two sets that are Riesz bases for length 1/2 but whose union fails for length 1.

    ``{2n - 1/4}_{n>0} U {2n + 1/4}_{n<0} U {0}`` and
    ``{2n + 3/4}_{n>0} U {2n - 3/4}_{n<0}``.
    """
    n = np.arange(1, terms + 1, dtype=np.float64)
    first = np.sort(np.concatenate([2 * n - 0.25, -2 * n + 0.25, [0.0]]))
    second = np.sort(np.concatenate([2 * n + 0.75, -2 * n - 0.75]))
    return first, second


def integers_without_zero(terms: int) -> np.ndarray:
    n = np.arange(1, terms + 1, dtype=np.float64)
    return np.sort(np.concatenate([-n, n]))


def lee_set(terms: int, eps: float = 0.1) -> np.ndarray:
    """``{2n}_{n>0} U {2n + 1 - eps}_{n<0}``: incomplete for intervals of length 1/2."""
    n = np.arange(1, terms + 1, dtype=np.float64)
    return np.sort(np.concatenate([2 * n, -2 * n + 1 - eps]))


def kadec_displacement(freqs, length: float, alpha: float = 0.0) -> float:
    """``sup |lambda_k - (k + alpha)/length|`` after the best order-preserving alignment.

    Below ``1/(4 length)`` the classical quarter theorem applies.
    """
    vals = np.sort(np.asarray(freqs, dtype=np.float64))
    k0 = int(np.argmin(np.abs(vals)))
    best = math.inf
    for shift in range(-2, 3):
        k = np.arange(len(vals)) - k0 + shift
        best = min(best, float(np.abs(vals - (k + alpha) / length).max()))
    return best
