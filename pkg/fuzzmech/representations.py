"""
Conversions among the observational {w, v}, phase {w, gamma}, dynamical eta,
momentum {w_p, beta} and bilocal density-matrix representations.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from .grid import derivative_values, fd_first_derivative, forward_transform
from .schema import (
    CirculationError,
    ComplexField,
    DensityMatrix,
    Hamiltonian,
    MomentumState,
    Observable,
    ObservationalState,
    PhaseState,
    RealField,
    ResourceLimitError,
    UniformGrid,
    WaveState,
)

SUPPORT_RATIO = 1e-14
CIRCULATION_TOL = 1e-6 * 2.0 * np.pi
MAX_DENSE_POINTS = 256


def support_floor(w: np.ndarray) -> float:
    return SUPPORT_RATIO * float(np.max(w))


def support_mask(w: np.ndarray, floor: Optional[float] = None) -> np.ndarray:
    floor = support_floor(w) if floor is None else floor
    return w > floor


# --- support graph ----------------------------------------------------------

def support_edges(mask: np.ndarray, grid: UniformGrid) -> List[Tuple[int, np.ndarray, np.ndarray]]:
    """Face-neighbour edges (axis, tail, head) between support nodes, head = tail + e_axis."""
    flat = np.arange(grid.size).reshape(grid.shape)
    edges = []
    for a in range(grid.dim):
        head = np.roll(flat, -1, axis=a)
        valid = mask & np.roll(mask, -1, axis=a)
        if not grid.periodic[a]:
            edge = [slice(None)] * grid.dim
            edge[a] = -1
            valid[tuple(edge)] = False
        edges.append((a, flat[valid], head[valid]))
    return edges


def edge_increments(v: Sequence[np.ndarray], grid: UniformGrid, mu: float,
                    axis: int, tail: np.ndarray, head: np.ndarray) -> np.ndarray:
    """Trapezoid phase increment mu * integral of v_axis from tail to head."""
    component = v[axis].ravel()
    return mu * grid.spacing[axis] * 0.5 * (component[tail] + component[head])


def integrate_over_support(v: Sequence[np.ndarray], mask: np.ndarray, grid: UniformGrid, mu: float,
                           root: Optional[int] = None) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray, np.ndarray]]]:
    """
    Breadth-first path integration of mu*v over one connected support.

    Args:
        v: Velocity components as grid-shaped arrays
        mask: Boolean support mask
        grid: The grid the arrays live on
        mu: Mass parameter
        root: Flat index the integration starts from; lowest support index by default

    Returns:
        Relative phase (zero at the root and off the support) and, per axis, the
        (tail, head, mismatch) of every edge, where mismatch is the phase jump
        the tree path leaves across that edge
    """
    edges = support_edges(mask, grid)
    tails = np.concatenate([tail for _, tail, _ in edges])
    heads = np.concatenate([head for _, _, head in edges])
    increments = np.concatenate([edge_increments(v, grid, mu, a, tail, head) for a, tail, head in edges])

    size = grid.size
    graph = coo_matrix((np.ones(tails.size), (tails, heads)), shape=(size, size)).tocsr()
    support = np.flatnonzero(mask.ravel())
    if support.size == 0:
        raise ValueError("empty support")
    root = int(support[0]) if root is None else root

    order, predecessors = breadth_first_order(graph, root, directed=False, return_predecessors=True)
    if order.size != support.size:
        raise ValueError(f"support is disjoint: {order.size} of {support.size} nodes reachable")

    # increment for every oriented tree edge pred -> node
    lookup = {}
    for tail, head, increment in zip(tails.tolist(), heads.tolist(), increments.tolist()):
        lookup[(tail, head)] = increment
        lookup[(head, tail)] = -increment

    gamma = np.zeros(size)
    for node in order[1:].tolist():
        parent = int(predecessors[node])
        gamma[node] = gamma[parent] + lookup[(parent, node)]

    mismatches = []
    offset = 0
    for a, tail, head in edges:
        count = tail.size
        jump = gamma[head] - gamma[tail] - increments[offset: offset + count]
        mismatches.append((tail, head, jump))
        offset += count
    return gamma.reshape(grid.shape), mismatches


def plaquette_circulations(v: Sequence[np.ndarray], mask: np.ndarray, grid: UniformGrid, mu: float) -> np.ndarray:
    """Trapezoid circulation around every elementary plaquette whose corners all lie on the support."""
    h = grid.spacing
    circulations = []
    for a in range(grid.dim):
        for b in range(a + 1, grid.dim):
            inc_a = mu * h[a] * 0.5 * (v[a] + np.roll(v[a], -1, axis=a))
            inc_b = mu * h[b] * 0.5 * (v[b] + np.roll(v[b], -1, axis=b))
            loop = inc_a + np.roll(inc_b, -1, axis=a) - np.roll(inc_a, -1, axis=b) - inc_b
            corners = mask & np.roll(mask, -1, axis=a) & np.roll(mask, -1, axis=b) \
                & np.roll(np.roll(mask, -1, axis=a), -1, axis=b)
            for axis in (a, b):
                if not grid.periodic[axis]:
                    edge = [slice(None)] * grid.dim
                    edge[axis] = -1
                    corners[tuple(edge)] = False
            circulations.append(np.where(corners, loop, 0.0))
    if not circulations:
        return np.zeros(grid.shape)
    return sum(np.abs(c) for c in circulations)


def ring_circulation(v: np.ndarray, grid: UniformGrid, mu: float) -> float:
    """mu times the trapezoid integral of v once around a periodic line."""
    h = grid.spacing[0]
    return float(mu * h * 0.5 * np.sum(v + np.roll(v, -1)))


def _integrate_line(v: np.ndarray, mask: np.ndarray, grid: UniformGrid, mu: float, check: bool) -> np.ndarray:
    h = grid.spacing[0]
    n = grid.n[0]
    support = np.flatnonzero(mask)
    if support.size == n:
        gamma = mu * cumulative_trapezoid(v, dx=h, initial=0.0)
        if grid.periodic[0] and check:
            ring = ring_circulation(v, grid, mu)
            if abs(ring) > CIRCULATION_TOL:
                raise CirculationError(f"ring circulation {ring:.6g} makes the phase path dependent")
        return gamma

    # rotate so the run starts at index 0 (periodic runs may wrap)
    starts = [i for i in support if not mask[i - 1]] if grid.periodic[0] else \
        [i for i in support if i == 0 or not mask[i - 1]]
    if len(starts) != 1:
        raise ValueError(f"support is disjoint: {len(starts)} separate runs")
    start = int(starts[0])
    rolled_v = np.roll(v, -start)
    rolled_mask = np.roll(mask, -start)
    length = int(np.count_nonzero(rolled_mask))
    gamma = np.zeros(n)
    gamma[:length] = mu * cumulative_trapezoid(rolled_v[:length], dx=h, initial=0.0)
    return np.roll(gamma, start)


def phase_from_velocity(s: ObservationalState, c_gamma: float = 0.0) -> PhaseState:
    """
    Integrate gamma = mu * integral(v) + c_gamma over the support.

    Args:
        s: Observational state
        c_gamma: Global phase constant

    Returns:
        PhaseState whose relative phase is zero at the lower support edge (1D)
        or at the lowest support index (D > 1)
    """
    grid = s.w.grid
    mask = support_mask(s.w.values)
    v = [component.values for component in s.v]
    gamma = integrate_component(v, mask, grid, s.mu)
    return PhaseState(w=s.w, gamma=RealField(grid=grid, values=gamma), c_gamma=c_gamma, mu=s.mu)


def integrate_component(v: Sequence[np.ndarray], mask: np.ndarray, grid: UniformGrid, mu: float,
                        check: bool = True) -> np.ndarray:
    """
    Relative phase mu * integral(v) over one connected support, zero off the support.

    With check=False the path integration is kept even when it is path dependent,
    leaving 2*pi*n jumps across a branch cut.
    """
    if grid.dim == 1:
        gamma = _integrate_line(v[0], mask, grid, mu, check)
    else:
        if check:
            worst = float(np.max(plaquette_circulations(v, mask, grid, mu)))
            if worst > CIRCULATION_TOL:
                raise CirculationError(f"plaquette circulation {worst:.6g} exceeds {CIRCULATION_TOL:.3g}")
        gamma, mismatches = integrate_over_support(v, mask, grid, mu)
        jump = max((float(np.max(np.abs(m))) for _, _, m in mismatches if m.size), default=0.0)
        if check and jump > np.pi:
            raise CirculationError(f"phase integration around a hole or periodic cycle jumps by {jump:.6g}")
    return np.where(mask, gamma, 0.0)


def phase_to_observational(s: PhaseState) -> ObservationalState:
    """v = grad(gamma) / mu on the support, from local stencils of the phase."""
    grid = s.w.grid
    mask = support_mask(s.w.values)
    v = []
    for a in range(grid.dim):
        slope = fd_first_derivative(s.gamma.values, grid.spacing[a], a, periodic=False)
        v.append(RealField(grid=grid, values=np.where(mask, slope / s.mu, 0.0)))
    return ObservationalState(w=s.w, v=tuple(v), mu=s.mu)


def wave_from_phase(s: PhaseState) -> WaveState:
    eta = np.sqrt(s.w.values) * np.exp(1j * s.full_phase())
    return WaveState(eta=ComplexField(grid=s.w.grid, values=eta), mu=s.mu, t=s.t)


def wave_to_phase(s: WaveState) -> PhaseState:
    """w = |eta|^2 and gamma = unwrapped arg(eta), with c_gamma = 0."""
    grid = s.grid
    gamma = np.angle(s.eta.values)
    for a in range(grid.dim):
        gamma = np.unwrap(gamma, axis=a)
    return PhaseState(
        w=RealField(grid=grid, values=s.density()),
        gamma=RealField(grid=grid, values=gamma),
        c_gamma=0.0,
        mu=s.mu,
        t=s.t,
    )


def probability_current(s: WaveState) -> Tuple[RealField, ...]:
    """J = Im(eta* grad eta) / mu."""
    grid = s.grid
    eta = s.eta.values
    return tuple(
        RealField(grid=grid, values=np.imag(np.conj(eta) * derivative_values(eta, grid, a)) / s.mu)
        for a in range(grid.dim)
    )


def wave_to_observational(s: WaveState) -> ObservationalState:
    w = s.density()
    mask = support_mask(w)
    safe = np.where(mask, w, 1.0)
    v = tuple(
        RealField(grid=s.grid, values=np.where(mask, current.values / safe, 0.0))
        for current in probability_current(s)
    )
    return ObservationalState(w=RealField(grid=s.grid, values=w), v=v, mu=s.mu)


def observational_to_wave(s: ObservationalState, c_gamma: float = 0.0) -> WaveState:
    return wave_from_phase(phase_from_velocity(s, c_gamma))


# --- momentum ----------------------------------------------------------------

def momentum_state(s: WaveState) -> MomentumState:
    phi = forward_transform(s.eta)
    return MomentumState(
        w_p=RealField(grid=phi.grid, values=np.abs(phi.values) ** 2),
        beta=RealField(grid=phi.grid, values=np.angle(phi.values)),
        mu=s.mu,
    )


def mean_momentum_two_paths(s: WaveState) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """
    Mean momentum computed in momentum space and from the position-space phase.

    Returns:
        (spectral, position) tuples with one entry per axis
    """
    grid = s.grid
    momentum = momentum_state(s)
    p_coords = momentum.w_p.grid.coordinates()
    dp = momentum.w_p.grid.cell_volume
    spectral = tuple(float(np.sum(p_coords[a] * momentum.w_p.values) * dp) for a in range(grid.dim))

    w = s.density()
    angle = np.angle(s.eta.values)
    position = []
    for a in range(grid.dim):
        gamma = np.unwrap(angle, axis=a)
        slope = fd_first_derivative(gamma, grid.spacing[a], a, periodic=False)
        position.append(float(np.sum(w * slope) * grid.cell_volume))
    return spectral, tuple(position)


# --- bilocal ------------------------------------------------------------------

def _check_dense(grid: UniformGrid) -> None:
    if grid.size > MAX_DENSE_POINTS:
        raise ResourceLimitError(f"dense density matrix needs P <= {MAX_DENSE_POINTS} grid points, got {grid.size}")


def density_matrix_from_phase(s: PhaseState) -> DensityMatrix:
    """rho = sqrt(w1 w2) exp(i kappa), kappa from the relative phase only."""
    grid = s.w.grid
    _check_dense(grid)
    w = s.w.values.ravel()
    amplitude = np.sqrt(w)
    gamma = s.gamma.values.ravel()
    kappa = gamma[:, None] - gamma[None, :]
    rho = np.outer(amplitude, amplitude) * np.exp(1j * kappa)
    np.fill_diagonal(rho, w)
    return DensityMatrix(grid=grid, rho=rho, t=s.t)


def density_matrix_from_wave(s: WaveState) -> DensityMatrix:
    _check_dense(s.grid)
    eta = s.eta.values.ravel()
    return DensityMatrix(grid=s.grid, rho=np.outer(eta, np.conj(eta)), t=s.t)


def mixture(states: Sequence[WaveState], weights: Sequence[float]) -> DensityMatrix:
    """Weighted sum of pure-state kernels; used only for orthogonality checks."""
    if len(states) != len(weights) or not states:
        raise ValueError("mixture needs one weight per state")
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("mixture weights must be nonnegative and sum to 1")
    grid = states[0].grid
    _check_dense(grid)
    rho = np.zeros((grid.size, grid.size), dtype=np.complex128)
    for weight, state in zip(weights, states):
        eta = state.eta.values.ravel()
        rho += weight * np.outer(eta, np.conj(eta))
    return DensityMatrix(grid=grid, rho=rho, t=states[0].t)


def _apply_columns(rho: np.ndarray, grid: UniformGrid, operator) -> np.ndarray:
    columns = [operator(rho[:, j].reshape(grid.shape)).ravel() for j in range(rho.shape[1])]
    return np.stack(columns, axis=1)


def expectation(q: Observable, rho: DensityMatrix) -> float:
    """Tr(Q rho) with the kernel quadrature weight h^D."""
    grid = rho.grid
    weight = rho.weight
    diagonal = rho.diagonal()

    if q.kind == "identity":
        return rho.trace()
    if q.kind == "position":
        if not 0 <= q.axis < grid.dim:
            raise ValueError(f"axis {q.axis} out of range")
        return float(np.sum(grid.coordinates()[q.axis] * diagonal) * weight)
    if q.kind in ("potential-energy", "custom-diagonal"):
        if q.values is None or np.shape(q.values) != grid.shape:
            raise ValueError(f"{q.kind} observable needs values of shape {grid.shape}")
        return float(np.sum(np.asarray(q.values) * diagonal) * weight)
    if q.kind == "momentum":
        if not 0 <= q.axis < grid.dim:
            raise ValueError(f"axis {q.axis} out of range")
        applied = _apply_columns(np.asarray(rho.rho), grid, lambda f: -1j * derivative_values(f, grid, q.axis))
        return float(np.real(np.trace(applied)) * weight)
    if q.kind == "kinetic-energy":
        from .dynamics import apply_hamiltonian

        free = Hamiltonian.free(q.mu, grid)
        applied = _apply_columns(np.asarray(rho.rho), grid, lambda f: apply_hamiltonian(f, free, rho.t))
        return float(np.real(np.trace(applied)) * weight)
    raise ValueError(f"unsupported observable kind: {q.kind}")


def velocity_from_kappa(rho: DensityMatrix, mu: float) -> Tuple[RealField, ...]:
    """v = (1/mu) d kappa(r1, r2) / d r1 at r1 = r2, masked to the support."""
    grid = rho.grid
    matrix = np.asarray(rho.rho)
    w = rho.diagonal()
    mask = support_mask(w)
    v = [np.zeros(grid.size) for _ in range(grid.dim)]
    for j in np.flatnonzero(mask.ravel()).tolist():
        kappa = np.angle(matrix[:, j]).reshape(grid.shape)
        for a in range(grid.dim):
            unwrapped = np.unwrap(kappa, axis=a)
            slope = fd_first_derivative(unwrapped, grid.spacing[a], a, periodic=False)
            v[a][j] = slope.ravel()[j] / mu
    logging.info(f"Velocity recovered from kappa on {int(mask.sum())} support nodes")
    return tuple(RealField(grid=grid, values=component.reshape(grid.shape)) for component in v)
