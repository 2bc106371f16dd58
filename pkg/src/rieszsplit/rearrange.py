"""Block balancing: composing rounding maps with an outer map without losing the budget.

Given a rounding pair ``phi_hat``, ``psi_hat`` into ``(Z+1/2)/c`` and an outer
map ``sigma`` on ``(Z+1/2)/c``, every block of ``K0`` consecutive points of
``(Z+1/2)/c`` receives the same number of points from both sources as the
rounding pair gives it.  Inside a block we are free to choose *which* target
positions the first source uses; the block sum ``S`` of ``sigma o phi`` only
depends on that subset.  The walk below moves one chosen position at a time
to a free neighbour until ``|S|`` drops under the tolerance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

import numpy as np

from .avdonin import (MIN_BLOCKS, AvdoninCertificate, CertificateError, FrequencyMap,
                      block_starts, measure_discrepancy)
from .lattice import Window
from .numerics import ExactScalar, NumericsError, as_scalar
from .rounding import ConstructionError, RoundingMap

log = logging.getLogger(__name__)

STEP_SLACK = 1e-9


class BalanceError(NumericsError):
    """The swap walk reached an extreme assignment without entering the tolerance band."""

    def __init__(self, message, extremes=None):
        super().__init__(message)
        self.extremes = extremes or {}


class WindowTooSmall(CertificateError):
    """The working window cannot host enough blocks of the requested size."""

    def __init__(self, message, needed_block=None):
        super().__init__(message)
        self.needed_block = needed_block


class BudgetError(NumericsError):
    """Certificates missed their budget at the largest admissible block size."""

    def __init__(self, message, stage=None, certificates=None):
        super().__init__(message)
        self.stage = stage
        self.certificates = certificates or {}


@dataclass
class BlockProblem:
    """One block ``[l K0 / c, (l+1) K0 / c)`` of the target lattice ``(Z+1/2)/c``.

    ``sigma_targets[i]`` is the outer map's target index for block position
    ``i``; ``start`` holds the positions used by the first source initially.
    """

    source_a: np.ndarray
    source_b: np.ndarray
    sigma_targets: np.ndarray
    source: "object"  # AffineLattice of the first source
    total: ExactScalar
    sigma_target: "object"  # AffineLattice of the outer map's range
    M_hat: float
    start: Optional[np.ndarray] = None
    block: int = 0

    def __post_init__(self):
        n_a, n_b, k0 = len(self.source_a), len(self.source_b), len(self.sigma_targets)
        if n_a + n_b != k0:
            raise ConstructionError(f"block {self.block}: {n_a} + {n_b} sources for {k0} targets")
        if len(np.unique(self.sigma_targets)) != k0:
            raise ConstructionError(f"block {self.block}: outer map not injective")

    @property
    def K0(self) -> int:
        return len(self.sigma_targets)

    @property
    def tolerance(self) -> float:
        return self.M_hat + 0.5 / float(self.total)

    @property
    def step_bound(self) -> float:
        return 2 * self.M_hat + 1 / float(self.total)

    def source_sum(self) -> ExactScalar:
        """Exact sum of the first source's points in the block."""
        n = len(self.source_a)
        return (self.source.alpha * n + int(self.source_a.sum())) / self.source.a

    def residual(self, positions: np.ndarray) -> ExactScalar:
        """``S = sum sigma(positions) - sum x`` over the first source."""
        lat = self.sigma_target
        n = len(positions)
        tgt = (lat.alpha * n + int(self.sigma_targets[positions].sum())) / lat.a
        return tgt - self.source_sum()


@dataclass
class BalancedAssignment:
    phi_positions: np.ndarray
    psi_positions: np.ndarray
    S: ExactScalar
    swaps: int
    max_step: float
    initial_S: ExactScalar

    @property
    def changed(self) -> bool:
        return self.swaps > 0


def block_balance(p: BlockProblem) -> BalancedAssignment:
    """Return a subset assignment with ``|S| <= M_hat + 1/(2c)``.

    The walk starts from ``p.start`` (default: the leftmost positions).  While
    ``S`` is above the band it moves a chosen position one step left onto a
    free neighbour, preferring the move that lowers ``S`` most; below the band
    it moves right.  Each move strictly shifts the subset toward the extreme
    configuration, so the walk ends, and since a single move changes ``S`` by at
    most ``2 M_hat + 1/c`` (twice the band half-width) it cannot jump across.
    """
    k0, n_a = p.K0, len(p.source_a)
    chosen = np.zeros(k0, dtype=bool)
    start = np.arange(n_a) if p.start is None else np.asarray(p.start)
    chosen[start] = True
    if chosen.sum() != n_a:
        raise ValueError("start positions must be distinct and match the source count")

    lat = p.sigma_target
    d = lat.a
    # |S| <= tol  <=>  lo_T <= sum(sigma_targets[chosen]) <= hi_T
    base = p.source_sum() * d - lat.alpha * n_a
    tol = Fraction(p.tolerance)
    lo_T = (base - tol * d).ceil(strict=False)
    hi_T = (base + tol * d).floor(strict=False)
    sig = p.sigma_targets.astype(np.int64)
    total = int(sig[chosen].sum())
    initial_S = p.residual(np.flatnonzero(chosen))
    step_limit = p.step_bound * float(d) + STEP_SLACK * (1 + float(d))
    swaps, max_step = 0, 0.0
    while total > hi_T or total < lo_T:
        direction = -1 if total > hi_T else 1
        if direction < 0:
            movable = np.flatnonzero(chosen[1:] & ~chosen[:-1]) + 1
        else:
            movable = np.flatnonzero(chosen[:-1] & ~chosen[1:])
        if not len(movable):
            S_now = p.residual(np.flatnonzero(chosen))
            raise BalanceError(
                f"block {p.block}: extreme assignment reached with S={float(S_now):.6g} "
                f"outside +-{p.tolerance:.6g}",
                {"S_extreme": float(S_now), "S_start": float(initial_S)})
        change = sig[movable + direction] - sig[movable]
        pick = int(np.argmin(change)) if direction < 0 else int(np.argmax(change))
        step = int(change[pick])
        if abs(step) > step_limit:
            raise ConstructionError(
                f"block {p.block}: swap changed S by {abs(step) / float(d):.6g} "
                f"> bound {p.step_bound:.6g}")
        pos = movable[pick]
        chosen[pos] = False
        chosen[pos + direction] = True
        total += step
        swaps += 1
        max_step = max(max_step, abs(step) / float(d))
    phi_pos = np.flatnonzero(chosen)
    return BalancedAssignment(phi_pos, np.flatnonzero(~chosen), p.residual(phi_pos), swaps,
                              max_step, initial_S)


# -- stage composition --------------------------------------------------------

@dataclass
class StageResult:
    Phi: FrequencyMap
    Psi: FrequencyMap
    K0: int
    R: ExactScalar
    M_hat: float
    M_bound: float
    swaps: int
    changed_blocks: int
    blocks: int
    prerequisites: dict = field(default_factory=dict)
    attempts: List[dict] = field(default_factory=list)

    def __iter__(self):
        yield self.Phi
        yield self.Psi

    def log_entry(self) -> dict:
        return {"K0": self.K0, "R": float(self.R), "M_hat": self.M_hat, "M_bound": self.M_bound,
                "swaps": self.swaps, "changed_blocks": self.changed_blocks,
                "blocks": self.blocks, "prerequisites": self.prerequisites,
                "attempts": self.attempts,
                "epsilon_Phi": float(self.Phi.certificate.epsilon_hat),
                "epsilon_Psi": float(self.Psi.certificate.epsilon_hat)}


def smallest_block(M_hat: float, total, delta: float, period: int) -> int:
    """Smallest multiple of ``period`` with ``M_hat * total + 1/2 <= delta * K0``."""
    need = (Fraction(M_hat) * as_scalar(total).value + Fraction(1, 2)) / Fraction(delta)
    mult = -(-need.numerator // (need.denominator * period))
    return max(1, mult) * period


def _rounding_displacement(rm: RoundingMap, k_lo: int, k_hi: int) -> float:
    return rm.realize(k_lo, k_hi).displacement_bound


def compose_and_certify(phi_hat: RoundingMap, psi_hat: RoundingMap, sigma: FrequencyMap,
                        delta: float, epsilon: float, period: int = 1,
                        K0: Optional[int] = None, max_doublings: int = 12,
                        min_blocks: int = MIN_BLOCKS) -> StageResult:
    """Build ``Phi = sigma o phi`` and ``Psi = sigma o psi`` with balanced blocks.

    ``phi_hat``/``psi_hat`` are a rounding pair into ``sigma``'s source lattice
    and are expected to be ``delta``-Avdonin, ``sigma`` ``epsilon``-Avdonin.  The
    block size starts at the smallest admissible multiple of ``period`` and is
    doubled while any measured prerequisite or output certificate misses.
    """
    total = phi_hat.target.a
    if sigma.source.a != total or sigma.source.alpha != phi_hat.target.alpha:
        raise ValueError("outer map must be defined on the rounding pair's target lattice")
    j_lo, j_hi = sigma.first_index, sigma.last_index + 1

    # displacement bound over the outer domain
    win = Window(as_scalar(j_lo) / total, as_scalar(j_hi) / total)
    ka = phi_hat.source.index_range(win, strict=False)
    kb = psi_hat.source.index_range(win, strict=False)
    M_hat = max(_rounding_displacement(phi_hat, *ka), _rounding_displacement(psi_hat, *kb),
                sigma.displacement_bound)
    if K0 is None:
        K0 = smallest_block(M_hat, total, delta, period)
    elif K0 % period:
        raise ValueError(f"K0={K0} is not a multiple of the period {period}")
    budget = epsilon + 3 * delta
    attempts = []
    for _ in range(max_doublings + 1):
        L0, L1 = -(-j_lo // K0), j_hi // K0
        if L1 - L0 < min_blocks:
            raise WindowTooSmall(
                f"outer domain of {j_hi - j_lo} points hosts {max(0, L1 - L0)} blocks of "
                f"K0={K0}; need {min_blocks}", needed_block=K0)
        R = as_scalar(K0) / total
        attempt = {"K0": K0}
        attempts.append(attempt)
        ells = np.arange(L0, L1 + 1, dtype=np.int64)
        starts_a = block_starts(phi_hat.source, R, ells)
        starts_b = block_starts(psi_hat.source, R, ells)
        phi_map = phi_hat.realize(int(starts_a[0]), int(starts_a[-1]))
        psi_map = psi_hat.realize(int(starts_b[0]), int(starts_b[-1]))
        window = Window(R * L0, R * L1)
        prereq = {
            "phi_hat": measure_discrepancy(phi_map, R, window, min_blocks),
            "psi_hat": measure_discrepancy(psi_map, R, window, min_blocks),
            "sigma": measure_discrepancy(sigma, R, window, min_blocks),
        }
        attempt.update({k: float(v.epsilon_hat) for k, v in prereq.items()})
        if (prereq["phi_hat"].epsilon_hat > delta or prereq["psi_hat"].epsilon_hat > delta
                or prereq["sigma"].epsilon_hat > epsilon):
            attempt["outcome"] = "prerequisite miss"
            K0 *= 2
            continue
        result = _balance_blocks(phi_map, psi_map, sigma, starts_a, starts_b, ells, K0, total,
                                 M_hat)
        Phi, Psi, swaps, changed = result
        cert_phi = measure_discrepancy(Phi, R, window, min_blocks)
        cert_psi = measure_discrepancy(Psi, R, window, min_blocks)
        attempt.update({"Phi": float(cert_phi.epsilon_hat), "Psi": float(cert_psi.epsilon_hat)})
        if cert_phi.epsilon_hat <= budget and cert_psi.epsilon_hat <= budget:
            attempt["outcome"] = "ok"
            return StageResult(Phi.with_certificate(cert_phi), Psi.with_certificate(cert_psi),
                               K0, R, M_hat, M_hat + K0 / float(total), swaps, changed,
                               L1 - L0, {k: float(v.epsilon_hat) for k, v in prereq.items()},
                               attempts)
        attempt["outcome"] = "budget miss"
        K0 *= 2
    raise BudgetError(f"stage certificates missed budget {budget:.6g} after "
                      f"{len(attempts)} block sizes", certificates={"attempts": attempts})


def iter_block_problems(phi_map: FrequencyMap, psi_map: FrequencyMap, sigma: FrequencyMap,
                        starts_a, starts_b, ells, K0: int, total, M_hat: float):
    """Yield ``(slice_a, slice_b, BlockProblem)`` for consecutive blocks ``ells[:-1]``."""
    phi_t = phi_map.targets
    a0, b0 = phi_map.first_index, psi_map.first_index
    for i, ell in enumerate(ells[:-1]):
        sa = slice(int(starts_a[i]) - a0, int(starts_a[i + 1]) - a0)
        sb = slice(int(starts_b[i]) - b0, int(starts_b[i + 1]) - b0)
        base = int(ell) * K0
        start = phi_t[sa] - base
        if start.size and (start.min() < 0 or start.max() >= K0):
            raise ConstructionError(f"rounding image leaves block {int(ell)}")
        problem = BlockProblem(np.arange(int(starts_a[i]), int(starts_a[i + 1]), dtype=np.int64),
                               np.arange(int(starts_b[i]), int(starts_b[i + 1]), dtype=np.int64),
                               sigma.lookup(np.arange(base, base + K0, dtype=np.int64)),
                               phi_map.source, total, sigma.target, M_hat, start, int(ell))
        yield sa, sb, problem


def block_problems(phi_hat: RoundingMap, psi_hat: RoundingMap, sigma: FrequencyMap,
                   K0: int) -> List[BlockProblem]:
    """All block problems of one stage at block size ``K0`` (for inspection and testing)."""
    total = phi_hat.target.a
    j_lo, j_hi = sigma.first_index, sigma.last_index + 1
    win = Window(as_scalar(j_lo) / total, as_scalar(j_hi) / total)
    M_hat = max(_rounding_displacement(phi_hat, *phi_hat.source.index_range(win, strict=False)),
                _rounding_displacement(psi_hat, *psi_hat.source.index_range(win, strict=False)),
                sigma.displacement_bound)
    L0, L1 = -(-j_lo // K0), j_hi // K0
    if L1 <= L0:
        return []
    R = as_scalar(K0) / total
    ells = np.arange(L0, L1 + 1, dtype=np.int64)
    starts_a = block_starts(phi_hat.source, R, ells)
    starts_b = block_starts(psi_hat.source, R, ells)
    phi_map = phi_hat.realize(int(starts_a[0]), int(starts_a[-1]))
    psi_map = psi_hat.realize(int(starts_b[0]), int(starts_b[-1]))
    return [p for _, _, p in iter_block_problems(phi_map, psi_map, sigma, starts_a, starts_b,
                                                 ells, K0, total, M_hat)]


def _balance_blocks(phi_map: FrequencyMap, psi_map: FrequencyMap, sigma: FrequencyMap,
                    starts_a, starts_b, ells, K0: int, total, M_hat: float):
    out_a = np.empty(len(phi_map), dtype=np.int64)
    out_b = np.empty(len(psi_map), dtype=np.int64)
    swaps = changed = 0
    for sa, sb, problem in iter_block_problems(phi_map, psi_map, sigma, starts_a, starts_b,
                                               ells, K0, total, M_hat):
        res = block_balance(problem)
        swaps += res.swaps
        changed += res.changed
        out_a[sa] = problem.sigma_targets[res.phi_positions]
        out_b[sb] = problem.sigma_targets[res.psi_positions]
    Phi = FrequencyMap(phi_map.source, sigma.target, phi_map.first_index, out_a)
    Psi = FrequencyMap(psi_map.source, sigma.target, psi_map.first_index, out_b)
    return Phi, Psi, swaps, changed
