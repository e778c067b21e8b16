import math

import numpy as np
import pytest

from fuzzmech.schema import BumpFamily, RealField, UniformGrid
from fuzzmech.variational import (
    bump_norm,
    certify_constancy,
    cos3_pair,
    functional_I,
    normalized_I,
    random_mixture_densities,
    sampled_mass,
    sin3_pair,
    verify_f_equals_sqrt_w,
)


@pytest.fixture
def sample_grid():
    return UniformGrid.build(n=400, length=10.0, periodic=False, origin=0.0)


@pytest.fixture
def ball_grid():
    return UniformGrid.build(n=48, length=12.0, periodic=False, dim=3)


def test_bump_norms():
    assert bump_norm("sin3-pair-1D", 3) == pytest.approx(4.0 / 9.0)
    # int_0^{pi/2} u^2 cos^3 u du = pi^2 / 6 - 40 / 27
    assert bump_norm("cos3-sphere-pair-3D", 2) == pytest.approx(4.0 * math.pi / 8.0 * (math.pi ** 2 / 6.0 - 40.0 / 27.0))
    with pytest.raises(ValueError):
        bump_norm("sin3-pair-1D", 0)
    with pytest.raises(ValueError):
        bump_norm("square", 1)


def test_sampled_mass_approaches_bump_norm(sample_grid):
    family = sin3_pair(sample_grid, 2, 1.0, 6.0)
    assert sampled_mass(family) == pytest.approx(bump_norm("sin3-pair-1D", 2), rel=1e-4)


def test_constant_samples_are_certified(sample_grid):
    verdict = certify_constancy(RealField(grid=sample_grid, values=np.full(sample_grid.shape, 2.0)), 8)
    assert verdict.constant
    assert verdict.witness is None
    assert verdict.max_abs_I < 1e-12


def test_linear_samples_are_falsified_with_a_witness(sample_grid):
    x = sample_grid.coordinates()[0]
    verdict = certify_constancy(RealField(grid=sample_grid, values=x), 8)
    assert not verdict.constant
    witness = verdict.witness
    assert witness.value > witness.bound > 0.0
    assert witness.d1 > witness.d2
    # the positive bump sits to the right of the negative one for increasing N
    assert witness.positions[0][0] > witness.positions[1][0]
    family = sin3_pair(sample_grid, witness.n, witness.positions[0][0], witness.positions[1][0])
    assert functional_I(RealField(grid=sample_grid, values=x), family) == pytest.approx(witness.value, rel=1e-9)


def test_constancy_needs_room_for_a_pair():
    grid = UniformGrid.build(n=8, length=1.0, periodic=False)
    with pytest.raises(ValueError):
        certify_constancy(RealField(grid=grid, values=np.ones(grid.shape)), 1)
    with pytest.raises(ValueError):
        certify_constancy(RealField(grid=grid, values=np.ones(grid.shape)), 0)


def test_sin3_pair_rejects_bad_placements(sample_grid):
    with pytest.raises(ValueError, match="overlap"):
        sin3_pair(sample_grid, 1, 1.0, 2.0)
    with pytest.raises(ValueError, match="leaves the domain"):
        sin3_pair(sample_grid, 1, 8.0, 0.5)


def test_ball_pair_matches_line_scan(ball_grid):
    family = cos3_pair(ball_grid, 1, (-2.4, 0.0, 0.0), (2.4, 0.0, 0.0))
    flat = normalized_I(RealField(grid=ball_grid, values=np.full(ball_grid.shape, 2.0)), family)
    sloped = normalized_I(RealField(grid=ball_grid, values=ball_grid.coordinates()[0]), family)
    assert abs(flat) < 1e-10
    assert sloped == pytest.approx(-4.75, abs=0.2)


def test_ball_pair_rejects_bad_placements(ball_grid):
    with pytest.raises(ValueError, match="overlap"):
        cos3_pair(ball_grid, 1, (-1.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    with pytest.raises(ValueError, match="boundary"):
        cos3_pair(ball_grid, 1, (-4.5, 0.0, 0.0), (2.4, 0.0, 0.0))
    with pytest.raises(ValueError):
        BumpFamily(kind="cos3-sphere-pair-3D", n=1, placements=((1,), (2,)), grid=ball_grid)


def test_functional_requires_matching_grid(sample_grid):
    family = sin3_pair(sample_grid, 1, 1.0, 6.0)
    other = UniformGrid.build(n=400, length=10.0, periodic=False)
    with pytest.raises(ValueError):
        functional_I(RealField(grid=other, values=np.ones(other.shape)), family)


def test_only_square_root_normalizes_every_density():
    grid = UniformGrid.build(n=512, length=30.0, periodic=True)
    densities = random_mixture_densities(grid, 20, seed=7)
    assert verify_f_equals_sqrt_w(np.sqrt, densities).passed

    power = verify_f_equals_sqrt_w(lambda w: w ** 0.6, densities)
    assert not power.passed
    assert power.spread > 0.05
    first, second = power.witness
    assert power.norms[first] == min(power.norms)
    assert power.norms[second] == max(power.norms)

    scaled = verify_f_equals_sqrt_w(lambda w: 1.1 * np.sqrt(w), densities)
    assert not scaled.passed
    assert scaled.norms[0] == pytest.approx(1.21)
    with pytest.raises(ValueError):
        verify_f_equals_sqrt_w(np.sqrt, [])


def test_functional_is_linear_in_N(sample_grid):
    x = sample_grid.coordinates()[0]
    family = sin3_pair(sample_grid, 2, 1.0, 6.0)
    first = RealField(grid=sample_grid, values=x)
    second = RealField(grid=sample_grid, values=np.sin(x))
    combined = RealField(grid=sample_grid, values=2.0 * x - 3.0 * np.sin(x))
    expected = 2.0 * functional_I(first, family) - 3.0 * functional_I(second, family)
    assert functional_I(combined, family) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("n", [4, 8])
def test_bumps_at_peak_and_trough_of_a_sine(n, sample_grid):
    x = sample_grid.coordinates()[0]
    N = RealField(grid=sample_grid, values=np.sin(2.0 * np.pi * x / 10.0))
    half_width = 0.5 * np.pi / n
    family = sin3_pair(sample_grid, n, 2.5 - half_width, 7.5 - half_width)
    assert abs(functional_I(N, family)) == pytest.approx(2.0 * 4.0 / (3.0 * n), rel=0.05)
