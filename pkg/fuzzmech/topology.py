"""
Support components, phase winding around grid loops, and the multi-component
phase construction that the velocity field alone cannot fix.
"""

import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .dynamics import schrodinger_step
from .grid import finite_difference_gradient, gaussian_amplitude
from .representations import (
    integrate_component,
    ring_circulation,
    support_floor,
    wave_from_phase,
)
from .schema import (
    CirculationError,
    ComplexField,
    EvolutionConfig,
    GridLoop,
    Hamiltonian,
    ObservationalState,
    PhaseState,
    QuantizationError,
    RealField,
    SupportLabeling,
    UniformGrid,
    WallstromReport,
    WaveState,
    WindingResult,
)

SEED_FACTOR = 10.0
QUANTIZATION_TOL = 0.1 * 2.0 * np.pi
MAX_STEP_INCREMENT = 0.5 * np.pi


# --- support components -----------------------------------------------------

def label_components(w: RealField, floor: Optional[float] = None) -> SupportLabeling:
    """
    Face-connected components of the support {w > floor}.

    Components touching across a periodic face are merged, and only components
    containing a seed above 10 * floor are kept. Labels run 1..count ordered by
    each component's lowest flat index; 0 is background.
    """
    grid = w.grid
    values = w.values
    floor = support_floor(values) if floor is None else floor
    mask = values > floor
    structure = ndimage.generate_binary_structure(grid.dim, 1)
    raw, count = ndimage.label(mask, structure=structure)
    if count == 0:
        return SupportLabeling(labels=np.zeros(grid.shape, dtype=np.int64), count=0, masses=())

    # merge raw labels that meet across periodic faces
    tails, heads = [np.arange(1, count + 1)], [np.arange(1, count + 1)]
    for a in range(grid.dim):
        if not grid.periodic[a]:
            continue
        first = np.take(raw, 0, axis=a)
        last = np.take(raw, grid.n[a] - 1, axis=a)
        touching = (first > 0) & (last > 0)
        tails.append(first[touching])
        heads.append(last[touching])
    tails, heads = np.concatenate(tails), np.concatenate(heads)
    graph = coo_matrix((np.ones(tails.size), (tails, heads)), shape=(count + 1, count + 1)).tocsr()
    _, merged = connected_components(graph, directed=False)
    groups = np.where(raw > 0, merged[raw] + 1, 0)

    seeded = np.unique(groups[(values > SEED_FACTOR * floor) & (groups > 0)])
    flat_groups = groups.ravel()
    first_index = {}
    for group in seeded.tolist():
        first_index[group] = int(np.flatnonzero(flat_groups == group)[0])
    ordered = sorted(seeded.tolist(), key=lambda group: first_index[group])

    labels = np.zeros(grid.shape, dtype=np.int64)
    masses = []
    for label, group in enumerate(ordered, start=1):
        member = groups == group
        labels[member] = label
        masses.append(float(np.sum(values[member]) * grid.cell_volume))
    return SupportLabeling(labels=labels, count=len(ordered), masses=tuple(masses))


# --- loops -------------------------------------------------------------------

def _close_loop(points: Sequence[Tuple[int, ...]]) -> GridLoop:
    """Turn a cyclic sequence of lattice points into an axis-neighbour cycle without repeats."""
    compact = []
    for point in points:
        if not compact or compact[-1] != point:
            compact.append(point)
    if len(compact) > 1 and compact[-1] == compact[0]:
        compact.pop()

    filled = []
    ring = compact + compact[:1]
    for start, stop in zip(ring[:-1], ring[1:]):
        current = list(start)
        filled.append(tuple(current))
        for axis in range(len(current)):
            step = 1 if stop[axis] > current[axis] else -1
            while current[axis] != stop[axis]:
                current[axis] += step
                if tuple(current) != tuple(stop):
                    filled.append(tuple(current))

    # loop erasure keeps the path simple
    erased, seen = [], {}
    for point in filled:
        if point in seen:
            cut = seen[point]
            for removed in erased[cut + 1:]:
                del seen[removed]
            erased = erased[: cut + 1]
            continue
        seen[point] = len(erased)
        erased.append(point)
    return GridLoop(points=tuple(erased))


def rectangle_loop(center: Tuple[int, int], half_x: int, half_y: int) -> GridLoop:
    cx, cy = center
    if half_x < 1 or half_y < 1:
        raise ValueError("rectangle half sides must be at least 1")
    corners = [(cx - half_x, cy - half_y), (cx + half_x, cy - half_y),
               (cx + half_x, cy + half_y), (cx - half_x, cy + half_y)]
    return _close_loop(corners)


def square_loop(center: Tuple[int, int], half_side: int) -> GridLoop:
    return rectangle_loop(center, half_side, half_side)


def _sampled_loop(center: Tuple[float, float], radii: Tuple[float, float], shape) -> GridLoop:
    samples = max(64, int(16 * max(radii)))
    angles = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    points = []
    for theta in angles:
        x, y = shape(theta)
        points.append((int(round(center[0] + radii[0] * x)), int(round(center[1] + radii[1] * y))))
    return _close_loop(points)


def diamond_loop(center: Tuple[int, int], radius: int) -> GridLoop:
    """Staircase approximation of |i - ci| + |j - cj| = radius."""
    if radius < 1:
        raise ValueError("diamond radius must be at least 1")

    def l1_circle(theta):
        c, s = np.cos(theta), np.sin(theta)
        scale = abs(c) + abs(s)
        return c / scale, s / scale

    return _sampled_loop(center, (radius, radius), l1_circle)


def circle_loop(grid: UniformGrid, center: Sequence[float], radius: float) -> GridLoop:
    """Rasterized circle of physical radius around a physical center on a 2D grid."""
    if grid.dim != 2:
        raise ValueError("circle loops need a 2D grid")
    h = grid.spacing
    fractional = tuple((center[a] - grid.axis_coordinates(a)[0]) / h[a] for a in range(2))
    radii = (radius / h[0], radius / h[1])
    if min(radii) < 1.0:
        raise ValueError("circle radius must span at least one cell")
    loop = _sampled_loop(fractional, radii, lambda theta: (np.cos(theta), np.sin(theta)))
    for point in loop.points:
        if not all(0 <= point[a] < grid.n[a] for a in range(2)):
            raise ValueError("circle leaves the grid")
    return loop


# --- winding -----------------------------------------------------------------

def _phase_gradient(s: WaveState) -> Tuple[np.ndarray, ...]:
    eta = s.eta
    w = np.maximum(np.abs(eta.values) ** 2, np.finfo(float).tiny)
    return tuple(np.imag(np.conj(eta.values) * finite_difference_gradient(eta, a).values) / w
                 for a in range(s.grid.dim))


def _loop_integral(grad: Tuple[np.ndarray, ...], loop: GridLoop, spacing: Tuple[float, ...]) -> float:
    """Trapezoid integral of grad gamma along the axis-neighbour steps of a closed loop."""
    total = 0.0
    ring = loop.points + loop.points[:1]
    for start, stop in zip(ring[:-1], ring[1:]):
        axis = next(a for a in range(len(start)) if start[a] != stop[a])
        step = (stop[axis] - start[axis]) * spacing[axis]
        total += 0.5 * step * (grad[axis][start] + grad[axis][stop])
    return float(total)


def winding_number(s: WaveState, loop: GridLoop) -> WindingResult:
    """
    Quantized phase winding of eta around a closed grid loop.

    n_l comes from the wrapped phase increments between neighbouring loop
    points. It is certified against the trapezoid integral of grad gamma
    along the same steps; a step turning the phase by more than pi/2 or a
    certificate off by 0.1 * 2pi raises QuantizationError.

    Args:
        s: Wave state
        loop: Closed loop of grid indices

    Returns:
        WindingResult with n_l, the integrated circulation of grad gamma,
        its distance to 2*pi*n_l and the velocity circulation 2*pi*n_l/mu
    """
    grid = s.grid
    for point in loop.points:
        if len(point) != grid.dim or not all(0 <= point[a] < grid.n[a] for a in range(grid.dim)):
            raise ValueError(f"loop point {point} lies outside the grid")
    eta = s.eta.values
    floor = support_floor(s.density())
    samples = np.array([eta[point] for point in loop.points])
    if np.any(np.abs(samples) ** 2 <= floor):
        raise QuantizationError("loop passes through a node of the density")
    increments = np.angle(np.roll(samples, -1) * np.conj(samples))
    largest = float(np.max(np.abs(increments)))
    if largest > MAX_STEP_INCREMENT:
        raise QuantizationError(f"loop under-resolves the phase: a single step turns it by {largest:.3g}")
    n_l = int(np.round(np.sum(increments) / (2.0 * np.pi)))
    circulation = _loop_integral(_phase_gradient(s), loop, grid.spacing)
    residual = abs(circulation - 2.0 * np.pi * n_l)
    if residual >= QUANTIZATION_TOL:
        raise QuantizationError(f"circulation {circulation:.6g} is not close to 2*pi*{n_l} (residual {residual:.3g})")
    return WindingResult(n_l=n_l, circulation=circulation, residual=residual,
                         velocity_circulation=2.0 * np.pi * n_l / s.mu)


# --- test states ---------------------------------------------------------------

def _complex_plane(grid: UniformGrid, center: Sequence[float]) -> np.ndarray:
    if grid.dim != 2:
        raise ValueError("vortex states need a 2D grid")
    x, y = grid.coordinates()
    return (x - center[0]) + 1j * (y - center[1])


def _normalized(values: np.ndarray, grid: UniformGrid, mu: float) -> WaveState:
    norm = float(np.sum(np.abs(values) ** 2) * grid.cell_volume)
    return WaveState(eta=ComplexField(grid=grid, values=values / np.sqrt(norm)), mu=mu)


def _charge_factor(z: np.ndarray, charge: int) -> np.ndarray:
    return z ** charge if charge >= 0 else np.conj(z) ** (-charge)


def vortex_state(grid: UniformGrid, charge: int = 1, center: Sequence[float] = (0.0, 0.0),
                 mu: float = 1.0, width: float = 1.0) -> WaveState:
    """(x + iy)^q exp(-r^2 / (2 width^2)); negative charges use the conjugate."""
    z = _complex_plane(grid, center)
    envelope = np.exp(-np.abs(z) ** 2 / (2.0 * width ** 2))
    return _normalized(_charge_factor(z, charge) * envelope, grid, mu)


def hydrogen_section_state(grid: UniformGrid, m: int = 1, z0: float = 0.5, mu: float = 1.0) -> WaveState:
    """Slice z = z0 of (x + i sgn(m) y)^|m| exp(-r / 2), with r the 3D radius."""
    z = _complex_plane(grid, (0.0, 0.0))
    radius = np.sqrt(np.abs(z) ** 2 + z0 ** 2)
    return _normalized(_charge_factor(z, m) * np.exp(-0.5 * radius), grid, mu)


def vortex_pair_state(grid: UniformGrid, charges: Sequence[int], centers: Sequence[Sequence[float]],
                      mu: float = 1.0, width: float = 4.0) -> WaveState:
    """Product of vortex factors under one wide Gaussian envelope."""
    if len(charges) != len(centers):
        raise ValueError("need one center per charge")
    values = np.exp(-np.abs(_complex_plane(grid, (0.0, 0.0))) ** 2 / (2.0 * width ** 2)).astype(np.complex128)
    for charge, center in zip(charges, centers):
        values = values * _charge_factor(_complex_plane(grid, center), charge)
    return _normalized(values, grid, mu)


# --- multi-component phase ---------------------------------------------------

def phase_from_velocity_multicomponent(s: ObservationalState, constants: Sequence[float]) -> PhaseState:
    """
    Integrate the phase separately on every support component.

    Args:
        s: Observational state
        constants: One phase constant per component, in label order

    Returns:
        PhaseState with gamma relative to constants[0]; components whose flow
        carries circulation are integrated along a breadth-first tree with
        2*pi*n jumps left across the branch cut
    """
    labeling = label_components(s.w)
    if len(constants) != labeling.count:
        raise ValueError(f"need {labeling.count} constants, one per component, got {len(constants)}")
    grid = s.w.grid
    v = [component.values for component in s.v]
    gamma = np.zeros(grid.shape)
    branch_cut = False
    for label, constant in enumerate(constants, start=1):
        mask = labeling.labels == label
        try:
            part = integrate_component(v, mask, grid, s.mu)
        except CirculationError as e:
            logging.info(f"Component {label}: {e}; integrating across a branch cut")
            part = integrate_component(v, mask, grid, s.mu, check=False)
            branch_cut = True
            if grid.dim == 1 and mask.all():
                logging.info(f"Component {label}: ring circulation {ring_circulation(v[0], grid, s.mu):.12g}")
        gamma = gamma + np.where(mask, part + (constant - constants[0]), 0.0)
    return PhaseState(
        w=s.w,
        gamma=RealField(grid=grid, values=gamma),
        c_gamma=float(constants[0]) if len(constants) else 0.0,
        mu=s.mu,
        component_constants=tuple(float(c) for c in constants),
        branch_cut=branch_cut,
    )


def two_gaussian_state(grid: UniformGrid, separation: float, c_d: float, mu: float = 1.0,
                       sigma: float = 1.0) -> WaveState:
    """Equal-weight Gaussians at +-separation/2 on axis 0 with v = 0 and relative constant c_d."""
    offset = [0.0] * grid.dim
    offset[0] = 0.5 * separation
    left = np.abs(gaussian_amplitude(grid, [-o for o in offset], sigma)) ** 2
    right = np.abs(gaussian_amplitude(grid, offset, sigma)) ** 2
    w = RealField(grid=grid, values=0.5 * (left + right))
    zero = tuple(RealField(grid=grid, values=np.zeros(grid.shape)) for _ in range(grid.dim))
    observational = ObservationalState(w=w, v=zero, mu=mu)
    labeling = label_components(w)
    if labeling.count != 2:
        raise ValueError(f"components already merged at t0: {labeling.count} component(s) found")
    phase = phase_from_velocity_multicomponent(observational, (0.0, c_d))
    return wave_from_phase(phase)


def wallstrom_demo(separation: float, c_d: float, H: Hamiltonian, cfg: EvolutionConfig,
                   sigma: float = 1.0,
                   callback: Optional[Callable[[float, float, int], None]] = None) -> WallstromReport:
    """
    Evolve two states with identical {w, v} that differ only by a relative phase constant.

    Returns:
        WallstromReport with the largest density gap while the supports stay disjoint,
        the gap at the end of the horizon, and whether the pair certifies that {w, v}
        underdetermines the evolution
    """
    grid = H.grid
    first = two_gaussian_state(grid, separation, 0.0, H.mu, sigma)
    second = two_gaussian_state(grid, separation, c_d, H.mu, sigma)

    before, t_overlap, gap = 0.0, None, 0.0
    for step in range(cfg.steps + 1):
        if step:
            first = schrodinger_step(first, H, cfg)
            second = schrodinger_step(second, H, cfg)
        gap = float(np.max(np.abs(first.density() - second.density())))
        components = label_components(RealField(grid=grid, values=first.density())).count
        if t_overlap is None:
            if components >= 2:
                before = max(before, gap)
            else:
                t_overlap = first.t
        if callback is not None:
            callback(first.t, gap, components)

    certified = before < 1e-10 and gap > 1e-2
    logging.info(f"Wallstrom pair: before={before:.3g}, after={gap:.3g}, overlap at t={t_overlap}")
    return WallstromReport(
        separation=separation,
        c_d=c_d,
        t_overlap=t_overlap,
        t_final=first.t,
        diff_before=before,
        diff_after=gap,
        certified=certified,
    )
