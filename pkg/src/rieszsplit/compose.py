"""Drivers: the staged partition of ``Z + 1/2`` and the union combination of two maps.

The partition driver peels one length at a time off the unit interval.  With
``c_0 = 1`` and ``c_j = c_{j-1} - b_j`` it splits ``(Z+1/2)/c_{j-1}`` into
``(Z+1/2)/b_j`` and ``(Z+1/2)/c_j`` by a rounding pair, composes both halves
with the map carrying ``(Z+1/2)/c_{j-1}`` into ``Z + 1/2`` and rebalances each
block so that certificates grow by at most ``3 eps_j`` per stage.  The budgets
``eps_1 = delta/2`` and ``eps_j = delta/(3 * 2^j)`` keep every stage below
``(1 - 2^-j) delta`` with ``delta = 4^-K``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .avdonin import (MIN_BLOCKS, AvdoninCertificate, CertificateError, FrequencyMap,
                      check_riesz_hypothesis, measure_discrepancy, riesz_threshold)
from .lattice import HALF, AffineLattice, Window
from .numerics import ExactScalar, as_scalar
from .rearrange import (BudgetError, StageResult, WindowTooSmall, compose_and_certify)
from .rounding import build_pair

log = logging.getLogger(__name__)

DEFAULT_HALF_WIDTH = 100_000
MAX_HALF_WIDTH = 1 << 23
UNIT_LATTICE = AffineLattice(ExactScalar(Fraction(1)), HALF)


class SpecError(ValueError):
    """Invalid partition specification."""


@dataclass(frozen=True)
class PartitionSpec:
    """Interval lengths ``b_1..b_n`` summing to 1 and the union budget ``K``.

    With ``tail=True`` the lengths may sum to less than 1 and the remainder is
    carried as one extra interval, the truncation of a countable partition.
    """

    lengths: Tuple[ExactScalar, ...]
    K: int = 1
    tail: bool = False

    def __post_init__(self):
        lengths = tuple(as_scalar(b) for b in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        if not lengths:
            raise SpecError("at least one length is required")
        if any(not b > 0 for b in lengths):
            raise SpecError("all lengths must be positive")
        if self.K < 1:
            raise SpecError("K must be at least 1")
        total = sum(lengths, ExactScalar(Fraction(0)))
        if self.tail:
            if not total < 1:
                raise SpecError("truncated lengths must leave a positive tail")
            return
        guards = [b.guard for b in lengths if b.guard is not None]
        if not guards:
            if total.value != 1:
                raise SpecError(f"rational lengths sum to {total.value}, not 1")
        elif abs(total.value - 1) > Fraction(max(guards)) * len(lengths):
            raise SpecError(f"lengths sum to {float(total):.15g}, not 1 within guard")

    @property
    def delta(self) -> Fraction:
        return Fraction(1, 4 ** self.K)

    @property
    def effective_lengths(self) -> List[ExactScalar]:
        """Lengths used by the driver; the last one is ``c_{n-1}`` so the total is exactly 1."""
        lengths = list(self.lengths)
        if self.tail:
            lengths.append(ExactScalar(Fraction(0)))
        remaining = ExactScalar(Fraction(1))
        out = []
        for b in lengths[:-1]:
            out.append(b)
            remaining = remaining - b
        out.append(remaining)
        return out

    @property
    def labels(self) -> List[str]:
        n = len(self.lengths)
        labels = [f"Lambda_{j}" for j in range(1, n + 1)]
        return labels + (["Lambda_tail"] if self.tail else [])

    def stage_budget(self, j: int) -> Fraction:
        """``eps_j``: the budget added at stage ``j``."""
        return self.delta / 2 if j == 1 else self.delta / (3 * 2 ** j)

    def level(self, j: int) -> Fraction:
        """Certificate level after stage ``j``: ``(1 - 2^-j) delta``."""
        return (1 - Fraction(1, 2 ** j)) * self.delta

    def to_json(self) -> dict:
        return {"lengths": [b.to_json() for b in self.lengths], "K": self.K,
                "tail": self.tail, "delta": [self.delta.numerator, self.delta.denominator]}

    @classmethod
    def from_json(cls, obj) -> "PartitionSpec":
        return cls(tuple(ExactScalar.from_json(b) for b in obj["lengths"]), int(obj.get("K", 1)),
                   bool(obj.get("tail", False)))


@dataclass
class UnionCertificate:
    J: Tuple[int, ...]
    map: FrequencyMap
    certificate: AvdoninCertificate
    budget: Fraction
    length: ExactScalar

    @property
    def passed(self) -> bool:
        return bool(self.certificate.epsilon_hat <= self.budget)

    def to_json(self) -> dict:
        cert = self.certificate.to_json(riesz_threshold(self.length))
        cert["budget"] = [self.budget.numerator, self.budget.denominator]
        cert["within_budget"] = self.passed
        return {"J": list(self.J), "length": self.length.to_json(), "certificate": cert}


@dataclass
class PartitionResult:
    spec: PartitionSpec
    window: Window
    maps: List[FrequencyMap]
    labels: List[str]
    unions: List[UnionCertificate] = field(default_factory=list)
    log: dict = field(default_factory=dict)
    offset: Fraction = Fraction(0)
    # outer maps of stages 2..n-1, kept for inspection (not serialized)
    outer_maps: List[FrequencyMap] = field(default_factory=list, repr=False)

    @property
    def lengths(self) -> List[ExactScalar]:
        return self.spec.effective_lengths

    def frequencies(self, j: int, window: Optional[Window] = None) -> np.ndarray:
        """Sorted float frequencies of set ``j`` (0-based) inside the window."""
        w = self.window if window is None else window
        vals = np.sort(self.maps[j].target_values()) + float(self.offset)
        return vals[(vals >= float(w.lo)) & (vals < float(w.hi))]

    def exact_frequencies(self, j: int, window: Optional[Window] = None) -> List[Fraction]:
        w = self.window if window is None else window
        lat = self.maps[j].target
        out = []
        for m in np.sort(self.maps[j].targets).tolist():
            x = (lat.alpha.value + m) / lat.a.value + self.offset
            if w.lo.value <= x < w.hi.value:
                out.append(x)
        return out

    def check_partition(self, window: Optional[Window] = None) -> Tuple[bool, str]:
        """Disjointness and (finite case) exact cover of ``Z + 1/2`` on the window."""
        w = self.window if window is None else window
        lo = (w.lo - self.offset - HALF).ceil(strict=False)
        hi = (w.hi - self.offset - HALF).ceil(strict=False)
        seen = np.zeros(hi - lo, dtype=np.int64)
        for m in self.maps:
            if m.target != UNIT_LATTICE:
                return False, f"{m.label} does not map into Z + 1/2"
            t = m.targets[(m.targets >= lo) & (m.targets < hi)]
            np.add.at(seen, t - lo, 1)
        if np.any(seen > 1):
            bad = int(np.flatnonzero(seen > 1)[0]) + lo
            return False, f"frequency {bad + 0.5} used twice"
        if np.any(seen == 0):
            bad = int(np.flatnonzero(seen == 0)[0]) + lo
            return False, f"frequency {bad + 0.5} not covered"
        return True, "ok"

    def riesz_checks(self):
        return [check_riesz_hypothesis(m, b) for m, b in zip(self.maps, self.lengths)]

    def to_json(self, include_maps: bool = True) -> dict:
        sets = []
        for j, (m, b, label) in enumerate(zip(self.maps, self.lengths, self.labels)):
            entry = {"label": label, "length": b.to_json(),
                     "frequencies": [_num(x) for x in self.exact_frequencies(j)],
                     "certificate": m.certificate.to_json(riesz_threshold(b))
                     if m.certificate is not None else None}
            if include_maps:
                entry["map"] = m.to_json()
            sets.append(entry)
        return {"spec": self.spec.to_json(), "window": self.window.to_json(),
                "offset": _num(self.offset), "sets": sets,
                "unions": [u.to_json() for u in self.unions], "log": self.log}


def _num(x: Fraction):
    """JSON number for a half-integer or integer frequency (exact in binary)."""
    return int(x) if x.denominator == 1 else float(x)


# -- driver -----------------------------------------------------------------------

def _stage_one(phi, psi, period: int, half_width: int, budget: Fraction,
               min_blocks: int) -> Tuple[FrequencyMap, FrequencyMap, dict]:
    """Pure rounding: double the block until both rounding maps meet ``budget``."""
    window = Window.of(-half_width, half_width)
    Phi = phi.realize(*phi.source.index_range(window))
    Psi = psi.realize(*psi.source.index_range(window))
    K = period
    attempts = []
    while True:
        R = as_scalar(K) / phi.target.a
        if 2 * half_width // K < min_blocks:
            raise WindowTooSmall(f"stage 1 needs blocks of {K}", needed_block=K)
        c1 = measure_discrepancy(Phi, R, window, min_blocks)
        c2 = measure_discrepancy(Psi, R, window, min_blocks)
        attempts.append({"K0": K, "Phi": float(c1.epsilon_hat), "Psi": float(c2.epsilon_hat)})
        if c1.epsilon_hat <= budget and c2.epsilon_hat <= budget:
            entry = {"stage": 1, "K0": K, "R": float(R), "epsilon_Phi": float(c1.epsilon_hat),
                     "epsilon_Psi": float(c2.epsilon_hat), "swaps": 0, "attempts": attempts,
                     "M_hat": max(Phi.displacement_bound, Psi.displacement_bound)}
            return Phi.with_certificate(c1), Psi.with_certificate(c2), entry
        K *= 2


def _covered_window(maps: Sequence[FrequencyMap]) -> Tuple[int, int]:
    """Largest index range around 0 of ``Z + 1/2`` hit by the maps' ranges."""
    allt = np.sort(np.concatenate([m.targets for m in maps]))
    if len(np.unique(allt)) != len(allt):
        raise AssertionError("construction produced overlapping ranges")
    # contiguous run containing the index nearest 0
    breaks = np.flatnonzero(np.diff(allt) != 1)
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [len(allt) - 1]])
    centre = int(np.searchsorted(allt, 0))
    centre = min(centre, len(allt) - 1)
    run = int(np.searchsorted(starts, centre, side="right") - 1)
    return int(allt[starts[run]]), int(allt[ends[run]]) + 1


def build_partition(spec: PartitionSpec, window: Optional[Window] = None,
                    half_width: Optional[int] = None, max_half_width: int = MAX_HALF_WIDTH,
                    unions: Optional[Sequence[Sequence[int]]] = None,
                    min_blocks: int = MIN_BLOCKS) -> PartitionResult:
    """Partition ``Z + 1/2`` into sets whose exponentials suit intervals of the given lengths.

    ``window`` is where the result is reported and where exact cover is
    checked (default: the largest covered window the working domain allows).
    The working domain ``[-half_width, half_width)`` grows by doubling when a
    stage cannot fit ``min_blocks`` blocks or the cover misses the window.
    ``unions`` lists 1-based index sets to certify; by default every ``J``
    with ``2 <= |J| <= K`` when there are at most 6 sets.
    """
    if half_width is None:
        half_width = DEFAULT_HALF_WIDTH
        if window is not None:
            extent = max(abs(float(window.lo)), abs(float(window.hi)))
            half_width = max(half_width, int(2 * extent) + 1)
    while True:
        try:
            result = _build(spec, half_width, min_blocks)
        except WindowTooSmall as exc:
            log.info("working half-width %d too small: %s", half_width, exc)
            if 2 * half_width > max_half_width:
                raise
            half_width *= 2
            continue
        lo, hi = _covered_window(result.maps)
        covered = Window.of(lo, hi)
        if window is None:
            result.window = covered
            break
        if covered.lo <= window.lo and window.hi <= covered.hi:
            result.window = window
            break
        if 2 * half_width > max_half_width:
            raise WindowTooSmall(f"cover [{lo}, {hi}) does not contain the requested window")
        half_width *= 2
    result.log["working_half_width"] = half_width
    result.log["covered_window"] = [float(covered.lo), float(covered.hi)]
    n = len(result.maps)
    if unions is None:
        unions = []
        if n <= 6:
            for size in range(2, min(spec.K, n) + 1):
                unions.extend(itertools.combinations(range(1, n + 1), size))
    for J in unions:
        result.unions.append(certify_union(result, J, min_blocks=min_blocks))
    return result


def _build(spec: PartitionSpec, half_width: int, min_blocks: int) -> PartitionResult:
    lengths = spec.effective_lengths
    labels = spec.labels
    n = len(lengths)
    one = ExactScalar(Fraction(1))
    if n == 1:
        ident = FrequencyMap.identity(UNIT_LATTICE, -half_width, half_width, labels[0])
        cert = AvdoninCertificate(one, ExactScalar(Fraction(0)), 2 * half_width, 0)
        return PartitionResult(spec, Window.of(-half_width, half_width),
                               [ident.with_certificate(cert)], labels,
                               log={"stages": []})
    remaining = [one]
    for b in lengths[:-1]:
        remaining.append(remaining[-1] - b)
    stages = []
    phi, psi, period = build_pair(lengths[0], remaining[1], total=one)
    Phi, sigma, entry = _stage_one(phi, psi, period, half_width, spec.stage_budget(1),
                                   min_blocks)
    stages.append(entry)
    maps = [Phi.relabel(labels[0])]
    outer = []
    for j in range(2, n):
        outer.append(sigma)
        phi, psi, period = build_pair(lengths[j - 1], remaining[j], total=remaining[j - 1])
        stage: StageResult = compose_and_certify(
            phi, psi, sigma, float(spec.stage_budget(j)), float(spec.level(j - 1)),
            period=period, min_blocks=min_blocks)
        entry = {"stage": j, **stage.log_entry()}
        stages.append(entry)
        maps.append(stage.Phi.relabel(labels[j - 1]))
        sigma = stage.Psi
        level = spec.level(j)
        for name, m in (("Phi", stage.Phi), ("Psi", stage.Psi)):
            if m.certificate.epsilon_hat > level:
                raise BudgetError(f"stage {j}: {name} certificate "
                                  f"{float(m.certificate.epsilon_hat):.6g} exceeds "
                                  f"{float(level):.6g}", stage=j,
                                  certificates={name: m.certificate.to_json(level)})
    maps.append(sigma.relabel(labels[-1]))
    delta = spec.delta
    for m in maps:
        if m.certificate.epsilon_hat > delta:
            raise BudgetError(f"{m.label} certificate exceeds delta", certificates={
                m.label: m.certificate.to_json(delta)})
    return PartitionResult(spec, Window.of(-half_width, half_width), maps, labels,
                           log={"stages": stages,
                                "budgets": [float(spec.stage_budget(j)) for j in range(1, n)]},
                           outer_maps=outer)


def certify_union(result: PartitionResult, J: Sequence[int],
                  min_blocks: int = MIN_BLOCKS) -> UnionCertificate:
    J = tuple(sorted(int(j) for j in J))
    if len(set(J)) != len(J) or not J or J[0] < 1 or J[-1] > len(result.maps):
        raise SpecError(f"invalid union index set {J}")
    maps = [result.maps[j - 1] for j in J]
    lengths = [result.lengths[j - 1] for j in J]
    rho = combine_union(maps, lengths, epsilon=result.spec.delta, min_blocks=min_blocks)
    budget = result.spec.delta * 4 ** (len(J) - 1)
    return UnionCertificate(J, rho, rho.certificate, budget,
                            sum(lengths, ExactScalar(Fraction(0))))


def naive_composition(result: PartitionResult, j: int) -> Tuple[FrequencyMap, FrequencyMap]:
    """Stage ``j`` (2-based) without balancing: the outer map applied to the rounding pair."""
    if not 2 <= j < len(result.maps):
        raise ValueError(f"stage {j} has no outer map")
    sigma = result.outer_maps[j - 2]
    total = sigma.source.a
    b = result.lengths[j - 1]
    phi, psi, _ = build_pair(b, total - b, total=total)
    win = Window(as_scalar(sigma.first_index) / total, as_scalar(sigma.last_index + 1) / total)
    out = []
    for rm in (phi, psi):
        k_lo, k_hi = rm.source.index_range(win, strict=False)
        k = np.arange(k_lo, k_hi, dtype=np.int64)
        m = rm(k)
        keep = (m >= sigma.first_index) & (m <= sigma.last_index)
        k, m = k[keep], m[keep]
        # rounding maps are monotone, so the kept indices stay contiguous
        out.append(FrequencyMap(rm.source, sigma.target, int(k[0]), sigma.lookup(m)))
    return out[0], out[1]


# -- union combination -----------------------------------------------------------------

def _combine_pair(tau: FrequencyMap, eta: FrequencyMap, a, b) -> Tuple[FrequencyMap, int]:
    if tau.target != eta.target:
        raise ValueError("maps must share a target lattice")
    common = np.intersect1d(tau.targets, eta.targets)
    if len(common):
        bad = float(tau.target.points(common[:1])[0])
        raise ValueError(f"ranges overlap at frequency {bad}")
    phi, psi, period = build_pair(a, b)
    if tau.source != phi.source or eta.source != psi.source:
        raise ValueError("map sources must be the lattices (Z+1/2)/a and (Z+1/2)/b")
    m_tau = phi(tau.source_indices)
    m_eta = psi(eta.source_indices)
    m_lo = max(m_tau[0], m_eta[0])
    m_hi = min(m_tau[-1], m_eta[-1]) + 1
    idx = np.concatenate([m_tau, m_eta])
    tgt = np.concatenate([tau.targets, eta.targets])
    keep = (idx >= m_lo) & (idx < m_hi)
    idx, tgt = idx[keep], tgt[keep]
    order = np.argsort(idx, kind="stable")
    idx, tgt = idx[order], tgt[order]
    if len(idx) != m_hi - m_lo or np.any(np.diff(idx) != 1):
        raise AssertionError("rounding pair images do not tile the union lattice")
    rho = FrequencyMap(phi.target, tau.target, int(m_lo), tgt, f"{tau.label}+{eta.label}")
    return rho, period


def _certify_best(rho: FrequencyMap, period: int, start_R: float, target: Fraction,
                  min_blocks: int) -> AvdoninCertificate:
    """Smallest block (multiple of ``period``, doubling) meeting ``target``; else the best seen."""
    total = rho.source.a
    K0 = period * max(1, int(np.ceil(start_R * float(total) / period)))
    best = None
    while True:
        try:
            cert = measure_discrepancy(rho, as_scalar(K0) / total, None, min_blocks)
        except CertificateError:
            break
        if best is None or cert.epsilon_hat < best.epsilon_hat:
            best = cert
        if cert.epsilon_hat <= target:
            return cert
        K0 *= 2
    if best is None:
        raise WindowTooSmall(f"union domain cannot host {min_blocks} blocks")
    return best


def combine_union(maps: Sequence[FrequencyMap], lengths: Sequence, epsilon=None,
                  min_blocks: int = MIN_BLOCKS) -> FrequencyMap:
    """Left fold of the pairwise union combination.

    Each fold step joins ``tau`` on ``(Z+1/2)/a`` and ``eta`` on ``(Z+1/2)/b``
    into a map on ``(Z+1/2)/(a+b)`` by sending a point in the range of the
    rounding map from ``(Z+1/2)/a`` back through it and then through ``tau``,
    and likewise for ``eta``.  The returned map carries a certificate; its
    ``meta["budget"]`` is ``4^(k-1) epsilon`` and ``meta["within_budget"]``
    records whether the certificate met it.  With ``epsilon`` None the largest
    input certificate is used.
    """
    if len(maps) != len(lengths) or len(maps) < 1:
        raise ValueError("need one length per map")
    lengths = [as_scalar(b) for b in lengths]
    if epsilon is None:
        certs = [m.certificate for m in maps]
        if any(c is None for c in certs):
            raise CertificateError("inputs need certificates when epsilon is not given")
        epsilon = max(c.epsilon_hat.value for c in certs)
    epsilon = Fraction(epsilon)
    current, length, budget = maps[0], lengths[0], epsilon
    for nxt, b in zip(maps[1:], lengths[1:]):
        rho, period = _combine_pair(current, nxt, length, b)
        budget = 4 * max(budget, epsilon)
        start_R = max(float(m.certificate.R) if m.certificate is not None else 1.0
                      for m in (current, nxt))
        cert = _certify_best(rho, period, start_R, budget, min_blocks)
        current = rho.with_certificate(cert)
        length = length + b
    current.meta.update({"budget": float(budget), "within_budget": bool(
        current.certificate is not None and current.certificate.epsilon_hat <= budget)})
    return current


# -- shifting ------------------------------------------------------------------------

def shift_to_integers(result: PartitionResult) -> PartitionResult:
    """Shift every frequency by ``-1/2``; a common modulation keeps all Riesz bounds."""
    return replace(result, offset=result.offset - Fraction(1, 2),
                   window=Window(result.window.lo - HALF, result.window.hi - HALF))


def unshift(result: PartitionResult) -> PartitionResult:
    return replace(result, offset=result.offset + Fraction(1, 2),
                   window=Window(result.window.lo + HALF, result.window.hi + HALF))
