from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from _problems import random_problems, random_stage
from rieszsplit.avdonin import measure_discrepancy
from rieszsplit.lattice import AffineLattice
from rieszsplit.numerics import ExactScalar
from rieszsplit.rearrange import (BalanceError, BlockProblem, block_balance, compose_and_certify,
                                  smallest_block)
from rieszsplit.rounding import ConstructionError

UNIT = AffineLattice(1, Fraction(1, 2))


def toy_problem(sigma_targets, n_a, M_hat, start=None):
    k0 = len(sigma_targets)
    src = AffineLattice(Fraction(1), Fraction(1, 2))
    return BlockProblem(np.arange(n_a), np.arange(k0 - n_a), np.asarray(sigma_targets),
                        src, ExactScalar(Fraction(1)), UNIT, M_hat, start)


@given(st.integers(0, 2**31))
def test_balanced_blocks_meet_band(seed):
    for p in random_problems(5, seed):
        res = block_balance(p)
        assert abs(res.S) <= ExactScalar(Fraction(p.tolerance))
        assert res.max_step <= p.step_bound + 1e-9
        assert sorted(np.concatenate([res.phi_positions, res.psi_positions]).tolist()) == \
            list(range(p.K0))


def test_balanced_assignment_keeps_counts():
    p = random_problems(1, 3)[0]
    res = block_balance(p)
    assert len(res.phi_positions) == len(p.source_a)
    assert len(res.psi_positions) == len(p.source_b)


def test_already_balanced_block_is_untouched():
    p = toy_problem(np.arange(6), 3, 0.0, start=np.array([0, 2, 4]))
    # sources 0.5, 1.5, 2.5 against positions 0.5, 2.5, 4.5: S = 2.5 > 0.5
    res = block_balance(p)
    assert abs(float(res.S)) <= 0.5 and res.swaps > 0
    q = toy_problem(np.arange(6), 3, 0.0, start=np.array([0, 1, 2]))
    assert block_balance(q).swaps == 0


def test_unreachable_band_raises():
    # the outer map pushes every position far right, so no subset gets close
    p = toy_problem(np.arange(6) + 40, 3, 0.0)
    with pytest.raises(BalanceError):
        block_balance(p)


def test_count_mismatch_is_rejected():
    with pytest.raises(ConstructionError):
        BlockProblem(np.arange(2), np.arange(2), np.arange(5), UNIT, ExactScalar(Fraction(1)),
                     UNIT, 0.0)


def test_smallest_block():
    assert smallest_block(0.5, 1, 0.25, 2) == 4
    assert smallest_block(0.5, 1, 0.25, 3) == 6


def test_compose_meets_stage_budget():
    rng = np.random.default_rng(11)
    phi, psi, sigma, period = random_stage(rng, half_width=40000)
    sigma_cert = None
    for K in (64, 128, 256, 512, 1024, 2048):
        R = ExactScalar(Fraction(K)) / sigma.source.a
        sigma_cert = measure_discrepancy(sigma, R)
        if sigma_cert.epsilon_hat <= Fraction(1, 8):
            break
    delta, epsilon = 1 / 48, float(sigma_cert.epsilon_hat) + 1e-12
    stage = compose_and_certify(phi, psi, sigma, delta, epsilon, period=period)
    budget = epsilon + 3 * delta
    assert float(stage.Phi.certificate.epsilon_hat) <= budget
    assert float(stage.Psi.certificate.epsilon_hat) <= budget
    both = np.concatenate([stage.Phi.targets, stage.Psi.targets])
    assert len(np.unique(both)) == len(both)
