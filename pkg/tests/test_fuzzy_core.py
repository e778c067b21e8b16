from fractions import Fraction

import numpy as np
import pytest

from fuzzmech.fuzzy_core import (
    check_poset_consistency,
    confinement_weights,
    continuum_point,
    dump_poset,
    gaussian_point,
    ordered_point_density,
    parse_poset,
)
from fuzzmech.schema import ConfigError, FuzzyPoint, FuzzyPoset, UniformGrid


def test_confinement_weights_are_exact_thirds():
    point = confinement_weights(2, 6)
    assert point.weights[3:6] == (Fraction(1, 3),) * 3
    assert sum(point.weights, Fraction(0)) == 1
    assert point.tolerance_scale == 3


@pytest.mark.parametrize("l,n", [(0, 2), (0, 9), (3, 10), (1, 8)])
def test_confinement_weights_sum_to_one_exactly(l, n):
    point = confinement_weights(l, n, n_ordered=12)
    assert sum(point.weights, Fraction(0)) == 1
    assert len(point.weights) == 12
    assert all(weight == 0 for i, weight in enumerate(point.weights) if not l < i < n)


@pytest.mark.parametrize("l,n", [(2, 3), (-1, 4), (5, 2)])
def test_confinement_weights_reject_empty_intervals(l, n):
    with pytest.raises(ValueError):
        confinement_weights(l, n)


def test_fuzzy_point_float_weights_are_made_exact():
    point = FuzzyPoint.from_weights([0.0, 0.1, 0.2, 0.7, 0.0], (0, 4))
    assert sum(point.weights, Fraction(0)) == 1
    assert point.as_array() == pytest.approx([0.0, 0.1, 0.2, 0.7, 0.0])


def test_fuzzy_point_rejects_weight_outside_interval():
    with pytest.raises(ValueError):
        FuzzyPoint(weights=(Fraction(1, 2), Fraction(1, 2), Fraction(0)), interval=(0, 2))
    with pytest.raises(ValueError):
        FuzzyPoint.from_weights([0.0, 0.5, 0.6, 0.0], (0, 3))


def test_interval_poset_is_consistent():
    poset = FuzzyPoset.from_intervals(8, [(1, 4), (0, 7), (5, 7)])
    verdict = check_poset_consistency(poset)
    assert verdict.ok
    assert verdict.violation is None


def _relations(n_ordered, l, n):
    poset = FuzzyPoset.from_intervals(n_ordered, [(l, n)])
    return poset.incomparable.copy(), poset.below.copy(), poset.above.copy()


def test_flags_missing_relation_as_exclusivity():
    incomparable, below, above = _relations(6, 1, 4)
    incomparable[0, 2] = False
    verdict = check_poset_consistency(FuzzyPoset(n_ordered=6, incomparable=incomparable, below=below, above=above))
    assert not verdict.ok
    assert verdict.violation == "exclusivity"
    assert (verdict.row, verdict.column) == (0, 2)


def test_flags_broken_chains_as_transitivity():
    incomparable, below, above = _relations(6, 2, 5)
    below[0, 0], above[0, 0] = False, True
    verdict = check_poset_consistency(FuzzyPoset(n_ordered=6, incomparable=incomparable, below=below, above=above))
    assert verdict.violation == "transitivity"
    assert verdict.column == 0

    incomparable = np.array([[True, False, False, False]])
    below = np.array([[False, True, True, False]])
    above = np.array([[False, False, False, True]])
    verdict = check_poset_consistency(FuzzyPoset(n_ordered=4, incomparable=incomparable, below=below, above=above))
    assert verdict.violation == "transitivity"
    assert verdict.column == 1


def test_flags_gap_in_incomparable_run_as_contiguity():
    incomparable = np.array([[True, False, True]])
    below = np.array([[False, False, False]])
    above = np.array([[False, True, False]])
    verdict = check_poset_consistency(FuzzyPoset(n_ordered=3, incomparable=incomparable, below=below, above=above))
    assert not verdict.ok
    assert verdict.violation == "contiguity"
    assert (verdict.row, verdict.column) == (0, 1)


def test_reports_first_violating_row():
    good = FuzzyPoset.from_intervals(5, [(0, 3)])
    incomparable = np.vstack([good.incomparable, [[True, False, True, False, False]]])
    below = np.vstack([good.below, [[False, True, False, False, False]]])
    above = np.vstack([good.above, [[False, False, False, True, True]]])
    verdict = check_poset_consistency(FuzzyPoset(n_ordered=5, incomparable=incomparable, below=below, above=above))
    assert verdict.row == 1
    assert verdict.violation == "contiguity"


def test_ordered_point_density_is_a_discrete_delta():
    grid = UniformGrid.build(n=32, length=4.0, periodic=True)
    point = ordered_point_density([0.0], grid)
    assert point.density.integral() == pytest.approx(1.0)
    assert np.count_nonzero(point.density.values) == 1
    with pytest.raises(ValueError):
        ordered_point_density([5.0], grid)


def test_continuum_point_deposits_weights():
    grid = UniformGrid.build(n=32, length=8.0, periodic=True)
    point = confinement_weights(0, 4)
    positions = [[-2.0], [-1.0], [0.0], [1.0], [2.0]]
    density = continuum_point(point, positions, grid).density
    assert density.integral() == pytest.approx(1.0)
    assert np.count_nonzero(density.values) == 3


def test_gaussian_point_is_normalized():
    grid = UniformGrid.build(n=128, length=16.0, periodic=True)
    point = gaussian_point([0.5], 1.0, grid)
    assert point.density.integral() == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        gaussian_point([0.0], 0.0, grid)


def test_poset_text_round_trip_keeps_weights():
    text = "a0: interval 1..4, weights uniform\na1: interval 0..3, weights 1/4,3/4\n"
    poset, points = parse_poset(text, 6)
    assert check_poset_consistency(poset).ok
    assert points[0] == confinement_weights(1, 4, 6)
    assert points[1].weights[1:3] == (Fraction(1, 4), Fraction(3, 4))
    assert dump_poset(poset, points) == text


def test_parse_poset_reports_line_numbers():
    text = "a0: interval 1..4, weights uniform\n\na1: interval 0..3, weights 1/2,1/3\n"
    with pytest.raises(ConfigError) as error:
        parse_poset(text, 6)
    assert error.value.line == 3
    with pytest.raises(ConfigError) as error:
        parse_poset("b0: nonsense\n", 4)
    assert error.value.line == 1
