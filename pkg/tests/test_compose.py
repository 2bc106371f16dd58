from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_spec
from rieszsplit.analysis import kadec_sets
from rieszsplit.avdonin import FrequencyMap, check_riesz_hypothesis, measure_discrepancy
from rieszsplit.compose import (PartitionSpec, SpecError, build_partition, combine_union,
                                naive_composition, shift_to_integers, unshift)
from rieszsplit.lattice import AffineLattice, Window
from rieszsplit.numerics import ExactScalar, parse_scalar, sqrt2inv

YELLOW = [-5, -4, -3, -1, 0, 2, 3, 4, 6, 7, 9, 10, 12, 13, 14, 16, 17, 19, 20, 21, 23, 24]
BLUE = [-6, -2, 1, 5, 8, 11, 15, 18, 22]


def indices(result, j, lo, hi):
    t = np.sort(result.maps[j].targets)
    return t[(t >= lo) & (t < hi)].tolist()


def test_two_way_irrational_split(split_sqrt2):
    assert indices(split_sqrt2, 0, -6, 25) == YELLOW
    assert indices(split_sqrt2, 1, -6, 25) == BLUE
    assert split_sqrt2.check_partition() == (True, "ok")
    assert all(split_sqrt2.riesz_checks())


def test_shift_to_integers_gives_floor_sets(split_sqrt2):
    shifted = shift_to_integers(split_sqrt2)
    vals = shifted.exact_frequencies(0, Window.of(-6, 25))
    a = sqrt2inv()
    k = np.arange(-10, 30)
    floors = {int(np.floor((kk + 0.5) / float(a))) for kk in k}
    assert {int(v) for v in vals} == {f for f in floors if -6 <= f < 25}
    back = unshift(shifted)
    assert back.offset == 0 and back.window == split_sqrt2.window


def test_halves_alternate_with_zero_certificates():
    r = build_partition(make_spec(["1/2", "1/2"]), Window.of(-4, 4))
    assert [float(x) for x in r.exact_frequencies(0)] == [-2.5, -1.5, 1.5, 2.5]
    assert [float(x) for x in r.exact_frequencies(1)] == [-3.5, -0.5, 0.5, 3.5]
    assert all(m.certificate.epsilon_hat.value == 0 for m in r.maps)


def test_thirds_with_all_unions(thirds):
    assert thirds.check_partition()[0]
    assert {u.J for u in thirds.unions} == {(1, 2), (1, 3), (2, 3)}
    assert all(u.certificate.epsilon_hat.value == 0 for u in thirds.unions)


def test_three_way_ledger(three_way):
    spec = three_way.spec
    for stage, entry in enumerate(three_way.log["stages"], start=1):
        level = float(spec.level(stage))
        assert entry["epsilon_Phi"] <= level + 1e-15
        assert entry["epsilon_Psi"] <= level + 1e-15
    for m in three_way.maps:
        assert m.certificate.epsilon_hat <= ExactScalar(spec.delta)
    for u in three_way.unions:
        assert u.passed and u.budget <= Fraction(1, 4)
    assert three_way.check_partition()[0]


def test_first_set_follows_its_lattice(three_way):
    # Lambda_1 stays close to 5Z + 5/2
    m = three_way.maps[0]
    assert m.displacement_bound < 5


def test_balancing_switches_a_few_points(three_way):
    first, rest = naive_composition(three_way, 2)
    both = np.concatenate([first.targets, rest.targets])
    assert len(np.unique(both)) == len(both)
    naive = set(first.targets.tolist())
    balanced = set(three_way.maps[1].targets.tolist())
    switched = naive ^ balanced
    assert 0 < len(switched) < 0.01 * len(balanced)


@settings(max_examples=8)
@given(st.lists(st.integers(1, 9), min_size=2, max_size=4), st.integers(1, 2))
def test_random_rational_specs_partition(parts, K):
    total = sum(parts)
    spec = PartitionSpec(tuple(ExactScalar(Fraction(p, total)) for p in parts), K)
    r = build_partition(spec, unions=[])
    assert r.check_partition() == (True, "ok")
    for m in r.maps:
        assert m.certificate.epsilon_hat <= ExactScalar(spec.delta)


def test_spec_validation():
    with pytest.raises(SpecError):
        make_spec(["1/2", "1/3"])
    with pytest.raises(SpecError):
        make_spec(["1/2", "1/2"], K=0)
    with pytest.raises(SpecError):
        PartitionSpec((ExactScalar(Fraction(-1, 2)), ExactScalar(Fraction(3, 2))))
    tail = PartitionSpec((ExactScalar(Fraction(1, 2)), ExactScalar(Fraction(1, 4))), tail=True)
    assert [b.value for b in tail.effective_lengths] == [Fraction(1, 2), Fraction(1, 4),
                                                         Fraction(1, 4)]
    assert tail.labels[-1] == "Lambda_tail"


def test_spec_json_round_trip():
    spec = make_spec(["1/5", "sqrt2inv-1/5", "1-sqrt2inv"], 2)
    back = PartitionSpec.from_json(spec.to_json())
    assert [b.value for b in back.lengths] == [b.value for b in spec.lengths]
    assert back.K == 2


def test_budgets():
    spec = make_spec(["1/2", "1/2"], 2)
    assert spec.delta == Fraction(1, 16)
    assert spec.stage_budget(1) == Fraction(1, 32)
    assert spec.stage_budget(3) == Fraction(1, 16 * 24)
    assert spec.level(2) == Fraction(3, 64)


def test_complementary_half_lattices_combine_to_identity():
    r = build_partition(make_spec(["1/2", "1/2"]))
    rho = combine_union(r.maps, [Fraction(1, 2), Fraction(1, 2)])
    assert rho.certificate.epsilon_hat.value == 0
    assert np.array_equal(np.sort(rho.targets), np.arange(rho.targets.min(), rho.targets.max() + 1))


def test_recombined_split_stays_within_four_times(split_sqrt2):
    a = sqrt2inv()
    rho = combine_union(split_sqrt2.maps, [a, 1 - a])
    worst = max(m.certificate.epsilon_hat for m in split_sqrt2.maps)
    assert rho.certificate.epsilon_hat <= 4 * worst
    # oracle: direct block sums at the same block length
    again = measure_discrepancy(rho, rho.certificate.R)
    assert again.epsilon_hat.value == rho.certificate.epsilon_hat.value


def test_overlapping_ranges_are_rejected():
    r = build_partition(make_spec(["1/2", "1/2"]))
    with pytest.raises(ValueError, match="overlap"):
        combine_union([r.maps[0], r.maps[0]], [Fraction(1, 2), Fraction(1, 2)])


def test_quarter_perturbed_union_fails_threshold():
    first, second = kadec_sets(4000)
    quarter_grid = AffineLattice(ExactScalar(Fraction(4)), ExactScalar(Fraction(0)))
    maps = [FrequencyMap.from_sorted_set(s, Fraction(1, 2), alpha=Fraction(1, 2),
                                         target=quarter_grid) for s in (first, second)]
    rho = combine_union(maps, [Fraction(1, 2), Fraction(1, 2)], epsilon=Fraction(1, 16))
    assert not check_riesz_hypothesis(rho, 1)
