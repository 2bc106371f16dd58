import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rieszsplit.analysis import (Exponential, Indicator, Polynomial, beurling_density,
                                 completeness_residual, gram_bounds, gram_matrix, gram_trend,
                                 integers_without_zero, kadec_displacement, kadec_sets, lee_set,
                                 projection_residual_quadrature, trend_is_stable, truncate,
                                 vandermonde_bounds)

separated = st.lists(st.integers(-400, 400), min_size=3, max_size=25, unique=True).map(
    lambda xs: np.array(sorted(xs), dtype=float) / 4)


def test_half_lattice_is_orthogonal_on_its_interval():
    a = 0.7
    lam = (np.arange(-100, 100) + 0.5) / a
    g = gram_bounds(lam, a, 128)
    assert abs(g.lambda_min - a) < 1e-10 and abs(g.lambda_max - a) < 1e-10


def test_closed_form_entries():
    lam = np.array([0.0, 0.3, 1.7])
    L = 0.8
    G = gram_matrix(lam, L)
    d = lam[0] - lam[1]
    assert np.isclose(G[0, 1], (np.exp(2j * np.pi * d * L) - 1) / (2j * np.pi * d), atol=1e-15)
    assert np.all(np.diag(G) == L)


@given(separated, st.floats(0.1, 3.0))
def test_gram_hermitian_psd(lam, L):
    G = gram_matrix(lam, L)
    assert np.allclose(G, G.conj().T, atol=1e-14)
    assert gram_bounds(lam, L).lambda_min >= -1e-10


@given(separated, st.floats(0.1, 2.0), st.floats(0.25, 4.0))
def test_scaling_covariance(lam, L, s):
    # normalized by the interval length the Gram matrix is unchanged
    assert np.allclose(gram_matrix(lam * s, L / s) * s, gram_matrix(lam, L), atol=1e-10)


@given(separated, st.floats(0.1, 2.0), st.floats(-50, 50))
def test_shift_invariance(lam, L, c):
    a = gram_bounds(lam, L)
    b = gram_bounds(lam + c, L)
    assert abs(a.lambda_min - b.lambda_min) < 1e-12 and abs(a.lambda_max - b.lambda_max) < 1e-12


@given(separated, st.floats(0.1, 2.0), st.floats(-3, 3))
def test_offset_invariance(lam, L, off):
    a = gram_bounds(lam, L)
    b = gram_bounds(lam, L, offset=off)
    assert abs(a.lambda_min - b.lambda_min) < 1e-11


def test_duplicates_rejected():
    with pytest.raises(ValueError):
        gram_bounds([0.0, 1.0, 1.0], 1.0)


def test_truncation_prefers_smaller_on_ties():
    assert truncate([-2, -1, 1, 2, 3], 3).tolist() == [-2, -1, 1]
    assert truncate([-1, 1, 0], 2).tolist() == [-1, 0]


def test_integers_without_zero():
    lam = integers_without_zero(300)
    g = gram_bounds(lam, 1.0, 256)
    assert abs(g.lambda_min - 1) < 1e-10
    assert abs(completeness_residual(lam, 1.0, Polynomial((1.0,)), 256) - 1) < 1e-12


def test_member_exponential_has_zero_residual():
    lam = np.arange(-40, 41) + 0.3
    assert completeness_residual(lam, 1.0, Exponential(5.3)) < 1e-12


@pytest.mark.parametrize("f", [Polynomial((0.3, -1.0, 2.0, 0.5)), Polynomial((1.0,)),
                               Exponential(2.25)])
@pytest.mark.parametrize("offset", [0.0, 0.37])
def test_residual_matches_quadrature(f, offset):
    lam = truncate(np.arange(-60, 61) * 1.05 + 0.2, 40)
    ours = completeness_residual(lam, 0.9, f, offset=offset)
    oracle = projection_residual_quadrature(lam, 0.9, f, offset=offset)
    assert abs(ours - oracle) < 1e-9


def test_indicator_residual_matches_quadrature():
    lam = truncate(np.arange(-50, 51) + 0.3, 40)
    f = Indicator(0.1, 0.6)
    ours = completeness_residual(lam, 1.0, f)
    oracle = projection_residual_quadrature(lam, 1.0, f, nodes=200, breakpoints=(0.1, 0.6))
    assert abs(ours - oracle) < 1e-10


def test_polynomial_inner_products_small_and_large_frequency():
    f = Polynomial((1.0, 0.0, 0.0, 1.0))
    lam = np.array([0.0, 1e-4, 0.12, 7.5])
    x, w = np.polynomial.legendre.leggauss(200)
    t = 0.25 + (x + 1) * 0.5
    ref = [np.sum(w * 0.5 * f(t) * np.exp(-2j * np.pi * l * t)) for l in lam]
    assert np.allclose(f.inner(lam, 0.25, 1.0), ref, atol=1e-13)
    assert abs(f.norm2(0.25, 1.0) - np.sum(w * 0.5 * f(t) ** 2)) < 1e-12


@pytest.mark.parametrize("N,J,A", [(4, [0, 1, 2, 3], 4.0), (2, [0], 1.0)])
def test_vandermonde_trivial_cases(N, J, A):
    a, b, est = vandermonde_bounds(N, J)
    assert abs(a - A) < 1e-12 and abs(b - A) < 1e-12
    assert abs(est.lambda_min - A / N) < 1e-10 and abs(est.lambda_max - A / N) < 1e-10


def test_vandermonde_rejects_bad_sets():
    with pytest.raises(ValueError):
        vandermonde_bounds(4, [4])


def test_densities_of_simple_sets():
    z = np.arange(-2000, 2001, dtype=float)
    d = beurling_density(z, [100, 500])
    assert d.D_minus == 1 and d.D_plus == 1
    extra = np.sort(np.append(z, 0.5))
    d = beurling_density(extra, [100, 500])
    assert d.D_minus == Fraction(1) and d.D_plus == Fraction(1)
    assert d.per_radius[-1][1] > 1


def test_kadec_union_trend_decays_while_parts_hold():
    first, second = kadec_sets(2000)
    union = np.concatenate([first, second])
    trend = gram_trend(union, 1.0, (64, 128, 256))
    mins = [g.lambda_min for g in trend]
    assert mins[0] > mins[1] > mins[2]
    assert not trend_is_stable(trend, floor=1e-3, max_drop=0.05)
    assert abs(kadec_displacement(first, 0.5) - 0.25) < 1e-12


def test_lee_set_stays_incomplete():
    lam = lee_set(2000)
    f = Polynomial((1.0,))
    res = [completeness_residual(lam, 0.5, f, n, offset=0.5) for n in (64, 256)]
    assert min(res) > 0.1
