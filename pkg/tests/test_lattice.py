import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rieszsplit.lattice import AffineLattice, Window, count_negative, count_positive
from rieszsplit.numerics import golden, inv_pi, sqrt2inv

densities = st.fractions(min_value=Fraction(1, 50), max_value=50, max_denominator=200)
offsets = st.fractions(min_value=0, max_value=1, max_denominator=50)
ends = st.fractions(min_value=-100, max_value=100, max_denominator=20)


@given(densities, offsets, ends, ends)
def test_index_range_is_exactly_the_points_inside(a, alpha, x, y):
    lo, hi = min(x, y), max(x, y)
    if lo == hi:
        return
    lat = AffineLattice(a, alpha)
    k_lo, k_hi = lat.index_range(Window.of(lo, hi))
    pt = lambda k: (k + alpha) / a
    for k in range(k_lo, k_hi):
        assert lo <= pt(k) < hi
    assert pt(k_lo - 1) < lo
    assert pt(k_hi) >= hi


def test_half_lattice_points():
    lat = AffineLattice.half(Fraction(1, 2))
    assert lat.points([0, 1, -1]).tolist() == [1.0, 3.0, -1.0]
    assert lat.point(2).value == 5


def test_window_validation_and_json():
    with pytest.raises(ValueError):
        Window.of(1, 1)
    w = Window.of(Fraction(-1, 3), 2)
    assert Window.from_json(w.to_json()) == w
    assert w.contains(Fraction(-1, 3)) and not w.contains(2)


def test_lattice_json_round_trip():
    lat = AffineLattice(sqrt2inv(), Fraction(1, 2))
    back = AffineLattice.from_json(lat.to_json())
    assert back.a.value == lat.a.value and back.alpha.value == lat.alpha.value


@given(densities, st.integers(1, 400))
def test_counting_functions_match_enumeration(a, n):
    lat = AffineLattice.half(a)
    on_end = (n * a - Fraction(1, 2)).denominator == 1
    assert int(count_positive(a, n)) == lat.count_in(Window.of(0, n)) + on_end
    assert int(count_negative(a, n)) == lat.count_in(Window.of(-n, 0))


@pytest.mark.parametrize("make", [sqrt2inv, golden, inv_pi])
def test_counting_identities_for_complementary_densities(make):
    a = make()
    n = np.arange(1, 20001, dtype=np.int64)
    assert np.array_equal(count_positive(a, n) + count_positive(1 - a, n), n)
    assert np.array_equal(count_negative(a, n) + count_negative(1 - a, n), n)
