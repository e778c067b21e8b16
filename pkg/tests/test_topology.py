import numpy as np
import pytest

from fuzzmech.representations import phase_to_observational, support_mask, wave_from_phase, wave_to_observational
from fuzzmech.schema import (
    EvolutionConfig,
    GridLoop,
    Hamiltonian,
    ObservationalState,
    QuantizationError,
    RealField,
    UniformGrid,
)
from fuzzmech.topology import (
    circle_loop,
    diamond_loop,
    hydrogen_section_state,
    label_components,
    phase_from_velocity_multicomponent,
    rectangle_loop,
    square_loop,
    two_gaussian_state,
    vortex_pair_state,
    vortex_state,
    wallstrom_demo,
    winding_number,
)
from tests.conftest import gaussian_state


@pytest.fixture
def vortex_grid():
    return UniformGrid.build(n=128, length=16.0, periodic=True, dim=2)


@pytest.fixture
def origin(vortex_grid):
    return vortex_grid.nearest_index((0.0, 0.0))


def test_label_components_orders_by_first_index(line_grid):
    left = gaussian_state(line_grid, center=-5.0, sigma=0.5).density()
    right = gaussian_state(line_grid, center=5.0, sigma=0.5).density()
    labeling = label_components(RealField(grid=line_grid, values=0.3 * left + 0.7 * right))
    assert labeling.count == 2
    x = line_grid.coordinates()[0]
    assert np.all(labeling.labels[np.abs(x + 5.0) < 1.0] == 1)
    assert np.all(labeling.labels[np.abs(x - 5.0) < 1.0] == 2)
    assert labeling.masses == pytest.approx((0.3, 0.7), abs=1e-10)


def test_label_components_merges_across_periodic_faces(line_grid):
    values = gaussian_state(line_grid, center=10.0).density() + gaussian_state(line_grid, center=-10.0).density()
    assert label_components(RealField(grid=line_grid, values=values)).count == 1
    bounded = UniformGrid.build(n=256, length=20.0, periodic=False)
    assert label_components(RealField(grid=bounded, values=values)).count == 2


def test_label_components_needs_a_seed_above_the_floor(line_grid):
    values = np.zeros(line_grid.shape)
    values[50:60] = 1.0
    values[200] = 5e-14
    assert label_components(RealField(grid=line_grid, values=values)).count == 1
    values[220] = 1e-12
    assert label_components(RealField(grid=line_grid, values=values)).count == 2


def test_loops_are_closed_neighbour_cycles(origin):
    for loop in (square_loop(origin, 8), rectangle_loop(origin, 12, 6), diamond_loop(origin, 14)):
        assert len(set(loop.points)) == len(loop.points)
    with pytest.raises(ValueError):
        GridLoop(points=((0, 0), (0, 2), (2, 2), (2, 0)))


def test_circle_loop_stays_on_the_grid(vortex_grid):
    loop = circle_loop(vortex_grid, (0.0, 0.0), 1.5)
    assert len(loop.points) >= 4
    with pytest.raises(ValueError):
        circle_loop(vortex_grid, (7.5, 0.0), 2.0)


@pytest.mark.parametrize("charge", [0, 1, -1, 2])
def test_winding_matches_vortex_charge_on_every_loop(charge, vortex_grid, origin):
    state = vortex_state(vortex_grid, charge)
    loops = [
        square_loop(origin, 8),
        rectangle_loop(origin, 12, 6),
        diamond_loop(origin, 14),
        circle_loop(vortex_grid, (0.0, 0.0), 1.5),
    ]
    for loop in loops:
        result = winding_number(state, loop)
        assert result.n_l == charge
        assert result.residual < 0.05
        assert result.circulation == pytest.approx(2.0 * np.pi * charge, abs=0.05)
        assert result.velocity_circulation == pytest.approx(2.0 * np.pi * charge)


@pytest.mark.parametrize("m", [1, -1])
def test_hydrogen_section_winds_with_magnetic_number(m, vortex_grid, origin):
    state = hydrogen_section_state(vortex_grid, m)
    assert winding_number(state, square_loop(origin, 8)).n_l == m
    assert winding_number(state, circle_loop(vortex_grid, (0.0, 0.0), 2.0)).n_l == m


def test_winding_is_invariant_under_loop_deformation(vortex_grid, origin):
    state = vortex_state(vortex_grid, 1)
    i, j = origin
    assert winding_number(state, square_loop((i + 3, j - 2), 10)).n_l == 1
    assert winding_number(state, rectangle_loop((i - 4, j + 1), 9, 14)).n_l == 1
    assert winding_number(state, square_loop((i + 30, j), 8)).n_l == 0


def test_vortex_pair_windings_add(vortex_grid):
    state = vortex_pair_state(vortex_grid, [1, -1], [(-2.0, 0.0), (2.0, 0.0)])
    left = vortex_grid.nearest_index((-2.0, 0.0))
    right = vortex_grid.nearest_index((2.0, 0.0))
    origin = vortex_grid.nearest_index((0.0, 0.0))
    assert winding_number(state, square_loop(left, 6)).n_l == 1
    assert winding_number(state, square_loop(right, 6)).n_l == -1
    assert winding_number(state, rectangle_loop(origin, 28, 8)).n_l == 0


def test_loop_through_a_node_is_not_quantized(vortex_grid, origin):
    state = vortex_state(vortex_grid, 1)
    i, j = origin
    with pytest.raises(QuantizationError):
        winding_number(state, square_loop((i + 2, j), 2))


def test_coarse_loop_around_a_high_charge_vortex_is_not_quantized(vortex_grid, origin):
    state = vortex_state(vortex_grid, 5)
    with pytest.raises(QuantizationError, match="under-resolves"):
        winding_number(state, square_loop(origin, 1))
    assert winding_number(state, square_loop(origin, 16)).n_l == 5


def test_loop_outside_grid_is_rejected(vortex_grid):
    with pytest.raises(ValueError):
        winding_number(vortex_state(vortex_grid, 1), square_loop((2, 2), 4))


def test_multicomponent_phase_keeps_relative_constants():
    grid = UniformGrid.build(n=512, length=40.0, periodic=True)
    left = gaussian_state(grid, center=-10.0).density()
    right = gaussian_state(grid, center=10.0).density()
    w = RealField(grid=grid, values=0.5 * (left + right))
    zero = (RealField(grid=grid, values=np.zeros(grid.shape)),)
    phase = phase_from_velocity_multicomponent(ObservationalState(w=w, v=zero), (0.3, 1.0))
    assert phase.c_gamma == 0.3
    assert phase.component_constants == (0.3, 1.0)
    assert not phase.branch_cut
    x = grid.coordinates()[0]
    assert np.allclose(phase.full_phase()[np.abs(x + 10.0) < 2.0], 0.3)
    assert np.allclose(phase.full_phase()[np.abs(x - 10.0) < 2.0], 1.0)
    with pytest.raises(ValueError):
        phase_from_velocity_multicomponent(ObservationalState(w=w, v=zero), (0.0,))


def test_multicomponent_phase_cuts_around_a_vortex(plane_grid):
    state = vortex_state(plane_grid, 1, center=(0.1, 0.1))
    phase = phase_from_velocity_multicomponent(wave_to_observational(state), (0.0,))
    assert phase.branch_cut
    rebuilt = wave_from_phase(phase)
    assert np.max(np.abs(rebuilt.density() - state.density())) < 1e-14


def test_two_gaussian_state_carries_relative_phase():
    grid = UniformGrid.build(n=512, length=40.0, periodic=True)
    state = two_gaussian_state(grid, 20.0, np.pi)
    left, right = grid.nearest_index((-10.0,)), grid.nearest_index((10.0,))
    assert state.eta.values[left].real > 0.0
    assert state.eta.values[right].real < 0.0
    assert state.eta.values[right].imag == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError, match="merged"):
        two_gaussian_state(grid, 2.0, np.pi)


def test_same_hydrodynamic_data_evolves_apart():
    grid = UniformGrid.build(n=1024, length=80.0, periodic=True)
    H = Hamiltonian.free(1.0, grid)
    report = wallstrom_demo(20.0, np.pi, H, EvolutionConfig(dt=0.01, steps=2000))
    assert report.t_overlap is not None
    assert report.diff_before < 1e-10
    assert report.diff_after > 1e-2
    assert report.certified


def test_label_components_is_stable_under_reflection_and_relabeling(line_grid):
    left = gaussian_state(line_grid, center=-5.0, sigma=0.5).density()
    right = gaussian_state(line_grid, center=5.0, sigma=0.5).density()
    values = 0.3 * left + 0.7 * right
    labeling = label_components(RealField(grid=line_grid, values=values))

    mirrored = label_components(RealField(grid=line_grid, values=values[::-1].copy()))
    assert mirrored.count == labeling.count == 2
    assert mirrored.masses == pytest.approx(labeling.masses[::-1], abs=1e-12)
    relabeled = np.where(labeling.labels > 0, labeling.count + 1 - labeling.labels, 0)
    assert np.array_equal(mirrored.labels, relabeled[::-1])

    again = label_components(RealField(grid=line_grid, values=(labeling.labels > 0).astype(float)))
    assert np.array_equal(again.labels, labeling.labels)


def test_multicomponent_phase_round_trip_reproduces_velocity():
    grid = UniformGrid.build(n=512, length=40.0, periodic=True)
    x = grid.coordinates()[0]
    w = 0.5 * (gaussian_state(grid, center=-10.0).density() + gaussian_state(grid, center=10.0).density())
    mask = support_mask(w)
    v = np.where(mask, 0.4 - 0.1 * x, 0.0)
    state = ObservationalState(w=RealField(grid=grid, values=w), v=(RealField(grid=grid, values=v),))
    phase = phase_from_velocity_multicomponent(state, (0.3, 1.0))
    recovered = phase_to_observational(phase).v[0].values
    interior = (np.abs(x + 10.0) < 4.0) | (np.abs(x - 10.0) < 4.0)
    assert np.max(np.abs(recovered[interior] - v[interior])) < 1e-6
