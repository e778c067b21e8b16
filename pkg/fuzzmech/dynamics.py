"""
Time evolution in both representations.

Schrodinger schemes (split-step, Crank-Nicolson) and the dense Liouville
propagator act on eta or rho; the Madelung scheme evolves {w, gamma} directly.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy import fft as sfft
from scipy.sparse.linalg import splu
from scipy.special import eval_hermite, gammaln

from . import worker_count
from .grid import fd_first_derivative, fd_second_derivative
from .schema import (
    ComplexField,
    DensityMatrix,
    EvolutionConfig,
    Hamiltonian,
    HamiltonianScan,
    InvariantBreach,
    NodeFormationError,
    OrthogonalityReport,
    PhaseState,
    RealField,
    ResourceLimitError,
    StabilityError,
    UniformGrid,
    WaveState,
)

NORM_TOL = 1e-8
SUBSTEP_FACTOR = 0.2
MAX_DENSE_POINTS = 256
WAVE_SCHEMES = ("split-step-spectral", "crank-nicolson")


# --- Hamiltonian application -------------------------------------------------

@lru_cache(maxsize=16)
def _squared_wavenumbers(grid: UniformGrid) -> np.ndarray:
    k2 = np.zeros(grid.shape)
    for a in range(grid.dim):
        shape = [1] * grid.dim
        shape[a] = -1
        k2 = k2 + (grid.wavenumbers(a) ** 2).reshape(shape)
    return k2


def _second_difference_1d(n: int, h: float, periodic: bool) -> sp.csr_matrix:
    """Fourth-order second difference; periodic wrap or a truncated stencil (zero outside)."""
    stencil = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h * h)
    offsets = [-2, -1, 0, 1, 2]
    if periodic:
        rows, cols, vals = [], [], []
        for offset, value in zip(offsets, stencil):
            index = np.arange(n)
            rows.append(index)
            cols.append((index + offset) % n)
            vals.append(np.full(n, value))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    diagonals = [np.full(n - abs(offset), value) for offset, value in zip(offsets, stencil)]
    return sp.diags(diagonals, offsets, shape=(n, n), format="csr")


@lru_cache(maxsize=16)
def _fd_kinetic(grid: UniformGrid, b_coeffs: Tuple[Tuple[int, float], ...]) -> sp.csr_matrix:
    """-sum_l b_2l (Laplacian)^l as a sparse Kronecker sum of 1D stencils."""
    laplacian = sp.csr_matrix((grid.size, grid.size))
    for a in range(grid.dim):
        factors = [sp.identity(grid.n[b], format="csr") for b in range(grid.dim)]
        factors[a] = _second_difference_1d(grid.n[a], grid.spacing[a], grid.periodic[a])
        term = factors[0]
        for factor in factors[1:]:
            term = sp.kron(term, factor, format="csr")
        laplacian = laplacian + term
    kinetic = sp.csr_matrix((grid.size, grid.size))
    for order, coefficient in b_coeffs:
        power = sp.identity(grid.size, format="csr")
        for _ in range(order // 2):
            power = power @ laplacian
        kinetic = kinetic - coefficient * power
    return kinetic.tocsr()


def fd_hamiltonian_matrix(H: Hamiltonian, t: float = 0.0) -> Tuple[sp.csr_matrix, Optional[np.ndarray]]:
    """
    Sparse finite-difference Hamiltonian, restricted to the Dirichlet mask when present.

    Returns:
        (matrix, flat interior indices or None)
    """
    grid = H.grid
    matrix = _fd_kinetic(grid, tuple(H.b_coeffs)) + sp.diags(H.potential_at(t).ravel())
    if H.dirichlet_mask is None:
        return matrix.tocsr(), None
    interior = np.flatnonzero(H.dirichlet_mask.ravel())
    return matrix.tocsr()[interior][:, interior], interior


def _uses_spectral(H: Hamiltonian) -> bool:
    return H.grid.all_periodic and H.dirichlet_mask is None


def apply_hamiltonian(eta: Union[np.ndarray, ComplexField], H: Hamiltonian, t: float = 0.0) -> np.ndarray:
    """
    Apply H to an amplitude.

    Args:
        eta: Grid-shaped amplitude (array or field)
        H: Hamiltonian
        t: Time at which a time-dependent potential is evaluated

    Returns:
        H eta as a grid-shaped complex array
    """
    values = eta.values if isinstance(eta, ComplexField) else np.asarray(eta)
    grid = H.grid
    if values.shape != grid.shape:
        raise ValueError(f"amplitude shape {values.shape} does not match grid {grid.shape}")
    if _uses_spectral(H):
        symbol = H.symbol(_squared_wavenumbers(grid))
        kinetic = sfft.ifftn(symbol * sfft.fftn(values, workers=worker_count()), workers=worker_count())
        return kinetic + H.potential_at(t) * values
    matrix, interior = fd_hamiltonian_matrix(H, t)
    if interior is None:
        return (matrix @ values.ravel().astype(np.complex128)).reshape(grid.shape)
    result = np.zeros(grid.size, dtype=np.complex128)
    result[interior] = matrix @ values.ravel()[interior]
    return result.reshape(grid.shape)


# --- Schrodinger propagators -------------------------------------------------

class SplitStepPropagator:
    """Strang splitting exp(-iU dt/2) exp(-iK dt) exp(-iU dt/2) on periodic grids."""

    def __init__(self, H: Hamiltonian, dt: float):
        if not H.grid.all_periodic or H.dirichlet_mask is not None:
            raise ValueError("split-step-spectral: scheme incompatible with non-periodic boundary")
        if not H.has_only_b2():
            raise ValueError("split-step-spectral supports only the second-order kinetic term")
        self.H = H
        self.dt = dt
        self.k_evolve = np.exp(-1j * H.symbol(_squared_wavenumbers(H.grid)) * dt)
        self.x_evolve_half = None
        if H.potential_fn is None:
            self.x_evolve_half = np.exp(-0.5j * H.potential.values * dt)

    def step(self, eta: np.ndarray, t: float) -> np.ndarray:
        half = self.x_evolve_half
        if half is None:
            half = np.exp(-0.5j * self.H.potential_at(t + 0.5 * self.dt) * self.dt)
        eta = half * eta
        eta = sfft.ifftn(self.k_evolve * sfft.fftn(eta, workers=worker_count()), workers=worker_count())
        return half * eta


class CrankNicolsonPropagator:
    """(I + i dt/2 H) eta' = (I - i dt/2 H) eta, with a cached sparse LU factorization."""

    def __init__(self, H: Hamiltonian, dt: float):
        self.H = H
        self.dt = dt
        self._lu = None
        self._rhs = None
        self._interior = None
        if H.potential_fn is None:
            self._lu, self._rhs, self._interior = self._factorize(0.0)

    def _factorize(self, t: float):
        matrix, interior = fd_hamiltonian_matrix(self.H, t)
        identity = sp.identity(matrix.shape[0], dtype=np.complex128, format="csc")
        lhs = (identity + 0.5j * self.dt * matrix).tocsc()
        rhs = (identity - 0.5j * self.dt * matrix).tocsr()
        return splu(lhs), rhs, interior

    def step(self, eta: np.ndarray, t: float) -> np.ndarray:
        if self._lu is None:
            lu, rhs, interior = self._factorize(t + 0.5 * self.dt)
        else:
            lu, rhs, interior = self._lu, self._rhs, self._interior
        flat = eta.ravel().astype(np.complex128)
        if interior is None:
            return lu.solve(rhs @ flat).reshape(eta.shape)
        result = np.zeros_like(flat)
        result[interior] = lu.solve(rhs @ flat[interior])
        return result.reshape(eta.shape)


_PROPAGATORS: Dict[Tuple[int, float, str], Tuple[Hamiltonian, object]] = {}


def make_propagator(H: Hamiltonian, dt: float, scheme: str):
    """Return a propagator for the scheme, reusing one built for the same Hamiltonian and dt."""
    key = (id(H), dt, scheme)
    cached = _PROPAGATORS.get(key)
    if cached is not None and cached[0] is H:
        return cached[1]
    if scheme == "split-step-spectral":
        propagator = SplitStepPropagator(H, dt)
    elif scheme == "crank-nicolson":
        propagator = CrankNicolsonPropagator(H, dt)
    elif scheme == "liouville-dense":
        propagator = LiouvillePropagator(H, dt)
    else:
        raise ValueError(f"{scheme} has no step propagator")
    if len(_PROPAGATORS) >= 8:
        _PROPAGATORS.clear()
    _PROPAGATORS[key] = (H, propagator)
    return propagator


def _norm(values: np.ndarray, grid: UniformGrid) -> float:
    return float(np.sum(np.abs(values) ** 2) * grid.cell_volume)


def _wave_propagator(H: Hamiltonian, cfg: EvolutionConfig):
    if cfg.scheme not in WAVE_SCHEMES:
        raise ValueError(f"{cfg.scheme} is not a Schrodinger scheme")
    return make_propagator(H, cfg.dt, cfg.scheme)


def schrodinger_step(s: WaveState, H: Hamiltonian, cfg: EvolutionConfig) -> WaveState:
    """Advance eta by one step of cfg.dt with the configured Schrodinger scheme."""
    propagator = _wave_propagator(H, cfg)
    eta = propagator.step(s.eta.values, s.t)
    drift = abs(_norm(eta, s.grid) - 1.0)
    if drift > NORM_TOL:
        raise InvariantBreach(f"norm drift {drift:.3g} exceeds {NORM_TOL:g} at t={s.t + cfg.dt:.17g}")
    return WaveState(eta=ComplexField(grid=s.grid, values=eta), mu=s.mu, t=s.t + cfg.dt)


def evolve_wave(s: WaveState, H: Hamiltonian, cfg: EvolutionConfig,
                callback: Optional[Callable[[int, WaveState], None]] = None) -> WaveState:
    """
    Run cfg.steps Schrodinger steps.

    Args:
        s: Initial wave state
        H: Hamiltonian
        cfg: Evolution settings; scheme must be split-step-spectral or crank-nicolson
        callback: Called with (step, state) at step 0 and every record_every steps

    Returns:
        The final wave state
    """
    propagator = _wave_propagator(H, cfg)
    grid = s.grid
    eta, t = s.eta.values, s.t
    state = s
    if callback is not None:
        callback(0, s)
    for step in range(1, cfg.steps + 1):
        eta = propagator.step(eta, t)
        t = s.t + step * cfg.dt
        drift = abs(_norm(eta, grid) - 1.0)
        if drift > NORM_TOL:
            raise InvariantBreach(f"norm drift {drift:.3g} exceeds {NORM_TOL:g} at t={t:.17g}")
        if step % cfg.record_every == 0 or step == cfg.steps:
            state = WaveState(eta=ComplexField(grid=grid, values=eta), mu=s.mu, t=t)
            if callback is not None and step % cfg.record_every == 0:
                callback(step, state)
    logging.info(f"{cfg.scheme}: {cfg.steps} steps to t={t:.6g}")
    return state


# --- Madelung scheme -------------------------------------------------------

def _check_madelung(H: Hamiltonian) -> None:
    if not H.grid.all_periodic or H.dirichlet_mask is not None:
        raise ValueError("madelung-fd: scheme incompatible with non-periodic boundary")
    if not H.is_derived():
        raise ValueError("madelung-fd requires the derived Hamiltonian b_2 = 1/(2 mu)")


def _rates(w: np.ndarray, gamma: np.ndarray, H: Hamiltonian, t: float) -> Tuple[np.ndarray, np.ndarray]:
    grid = H.grid
    mu = H.mu
    s = 0.5 * np.log(np.maximum(w, 1e-300))
    dw = np.zeros_like(w)
    speed2 = np.zeros_like(w)
    quantum = np.zeros_like(w)
    for a in range(grid.dim):
        h = grid.spacing[a]
        slope = fd_first_derivative(gamma, h, a, periodic=False)
        dw -= fd_first_derivative(w * slope, h, a, periodic=grid.periodic[a]) / mu
        speed2 += slope ** 2
        s_slope = fd_first_derivative(s, h, a, periodic=False)
        quantum += fd_second_derivative(s, h, a, periodic=False) + s_slope ** 2
    dgamma = -speed2 / (2.0 * mu) - H.potential_at(t) + quantum / (2.0 * mu)
    return dw, dgamma


def madelung_rates(s: PhaseState, H: Hamiltonian) -> Tuple[RealField, RealField]:
    """
    Right-hand sides of the hydrodynamic equations.

    Returns:
        (dw/dt, dgamma/dt) as fields
    """
    _check_madelung(H)
    dw, dgamma = _rates(s.w.values, s.gamma.values, H, s.t)
    return RealField(grid=H.grid, values=dw), RealField(grid=H.grid, values=dgamma)


def _count_components(w: np.ndarray, grid: UniformGrid) -> int:
    from .topology import label_components

    return label_components(RealField(grid=grid, values=w)).count


def _shifted(grid: UniformGrid, axis: int, start: int) -> Tuple[slice, ...]:
    index = [slice(None)] * grid.dim
    index[axis] = slice(start, grid.n[axis] - 1 + start)
    return tuple(index)


def _check_nodes(w: np.ndarray, gamma: np.ndarray, grid: UniformGrid, mu: float, dt: float,
                 t: float, floor: float, full: bool) -> None:
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(gamma))):
        raise NodeFormationError("madelung state became non-finite", t)
    if np.min(w) < -floor:
        raise NodeFormationError(f"density went negative ({np.min(w):.3g})", t)
    if not full:
        return
    mask = w > floor
    for a in range(grid.dim):
        h = grid.spacing[a]
        both = mask[_shifted(grid, a, 1)] & mask[_shifted(grid, a, 0)]
        jumps = np.abs(np.diff(gamma, axis=a))[both]
        if jumps.size and float(np.max(jumps)) > 0.5 * np.pi:
            raise NodeFormationError(f"phase jumps by {float(np.max(jumps)):.3g} between neighbouring nodes", t)
        slope = fd_first_derivative(gamma, h, a, periodic=False)
        courant = float(np.max(np.abs(slope[mask]))) / mu * dt / h if mask.any() else 0.0
        if courant > 1.0:
            raise NodeFormationError(f"unresolved flow, Courant number {courant:.3g}", t)
    if _count_components(np.clip(w, 0.0, None), grid) > 1:
        raise NodeFormationError("support split into several components", t)


def substep_count(H: Hamiltonian, dt: float) -> int:
    limit = SUBSTEP_FACTOR * H.mu * min(H.grid.spacing) ** 2
    return max(1, math.ceil(dt / limit - 1e-12))


def _rk4(w: np.ndarray, gamma: np.ndarray, H: Hamiltonian, t: float, dt: float):
    k1 = _rates(w, gamma, H, t)
    k2 = _rates(w + 0.5 * dt * k1[0], gamma + 0.5 * dt * k1[1], H, t + 0.5 * dt)
    k3 = _rates(w + 0.5 * dt * k2[0], gamma + 0.5 * dt * k2[1], H, t + 0.5 * dt)
    k4 = _rates(w + dt * k3[0], gamma + dt * k3[1], H, t + dt)
    w = w + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    gamma = gamma + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    return w, gamma


def _advance_phase(w: np.ndarray, gamma: np.ndarray, H: Hamiltonian, cfg: EvolutionConfig,
                   t: float, floor: float) -> Tuple[np.ndarray, np.ndarray]:
    count = substep_count(H, cfg.dt)
    if count > cfg.max_substeps:
        raise StabilityError(f"dt={cfg.dt:g} needs {count} substeps, more than max_substeps={cfg.max_substeps}")
    dt_sub = cfg.dt / count
    for index in range(count):
        w, gamma = _rk4(w, gamma, H, t + index * dt_sub, dt_sub)
        _check_nodes(w, gamma, H.grid, H.mu, dt_sub, t + (index + 1) * dt_sub, floor, full=False)
    _check_nodes(w, gamma, H.grid, H.mu, dt_sub, t + cfg.dt, floor, full=True)
    return w, gamma


def _phase_state(template: PhaseState, w: np.ndarray, gamma: np.ndarray, t: float) -> PhaseState:
    grid = template.w.grid
    w = np.clip(w, 0.0, None)
    return template.model_copy(update={
        "w": RealField(grid=grid, values=w),
        "gamma": RealField(grid=grid, values=gamma),
        "t": t,
    })


def madelung_step(s: PhaseState, H: Hamiltonian, cfg: EvolutionConfig) -> PhaseState:
    _check_madelung(H)
    floor = 1e-14 * float(np.max(s.w.values))
    _check_nodes(s.w.values, s.gamma.values, H.grid, H.mu, cfg.dt / substep_count(H, cfg.dt), s.t, floor, full=True)
    w, gamma = _advance_phase(s.w.values, s.gamma.values, H, cfg, s.t, floor)
    return _phase_state(s, w, gamma, s.t + cfg.dt)


def evolve_phase(s: PhaseState, H: Hamiltonian, cfg: EvolutionConfig,
                 callback: Optional[Callable[[int, PhaseState], None]] = None) -> PhaseState:
    """Run cfg.steps Madelung steps; raises NodeFormationError when the flow picture breaks down."""
    _check_madelung(H)
    floor = 1e-14 * float(np.max(s.w.values))
    _check_nodes(s.w.values, s.gamma.values, H.grid, H.mu, cfg.dt / substep_count(H, cfg.dt), s.t, floor, full=True)
    w, gamma, t = s.w.values, s.gamma.values, s.t
    state = s
    if callback is not None:
        callback(0, s)
    for step in range(1, cfg.steps + 1):
        w, gamma = _advance_phase(w, gamma, H, cfg, t, floor)
        t = s.t + step * cfg.dt
        if step % cfg.record_every == 0 or step == cfg.steps:
            state = _phase_state(s, w, gamma, t)
            if callback is not None and step % cfg.record_every == 0:
                callback(step, state)
    return state


# --- continuity residual -----------------------------------------------------

def continuity_residual(s: WaveState, H: Hamiltonian) -> float:
    """
    L2 norm of 2 Im(eta* H eta) minus the hydrodynamic rate -div(w grad(gamma) / mu).

    The first term uses H as given; the second always uses the derived kinetic term,
    so the residual measures how far H is from the one the flow picture implies.
    """
    grid = s.grid
    eta = s.eta.values
    schrodinger_rate = 2.0 * np.imag(np.conj(eta) * apply_hamiltonian(eta, H, s.t))

    w = np.abs(eta) ** 2
    angle = np.angle(eta)
    flow_rate = np.zeros(grid.shape)
    for a in range(grid.dim):
        h = grid.spacing[a]
        slope = fd_first_derivative(np.unwrap(angle, axis=a), h, a, periodic=False)
        flow_rate -= fd_first_derivative(w * slope, h, a, periodic=grid.periodic[a]) / s.mu
    gap = schrodinger_rate - flow_rate
    return float(np.sqrt(np.sum(gap ** 2) * grid.cell_volume))


def hamiltonian_scan(s: WaveState, b2_values: Sequence[float], b4_values: Sequence[float],
                     threads: Optional[int] = None, potential: Optional[RealField] = None) -> HamiltonianScan:
    """Continuity residual over a (b_2, b_4) grid, evaluated concurrently and merged in parameter order."""
    grid = s.grid
    potential = potential if potential is not None else RealField(grid=grid, values=np.zeros(grid.shape))
    pairs = [(float(b2), float(b4)) for b2 in b2_values for b4 in b4_values]

    def residual(pair: Tuple[float, float]) -> float:
        b2, b4 = pair
        trial = Hamiltonian(mu=s.mu, potential=potential, b_coeffs=((2, b2), (4, b4)))
        return continuity_residual(s, trial)

    with ThreadPoolExecutor(max_workers=threads or worker_count()) as pool:
        values = list(pool.map(residual, pairs))

    table = np.array(values).reshape(len(b2_values), len(b4_values))
    i, j = np.unravel_index(int(np.argmin(table)), table.shape)
    logging.info(f"Hamiltonian scan minimum {table[i, j]:.3g} at b2={b2_values[i]}, b4={b4_values[j]}")
    return HamiltonianScan(
        b2_values=tuple(float(b) for b in b2_values),
        b4_values=tuple(float(b) for b in b4_values),
        residuals=tuple(tuple(float(r) for r in row) for row in table),
        best_b2=float(b2_values[i]),
        best_b4=float(b4_values[j]),
    )


# --- Liouville --------------------------------------------------------------

def dense_hamiltonian(H: Hamiltonian, t: float = 0.0) -> np.ndarray:
    """Dense matrix of H on grid values, built column by column and symmetrized."""
    grid = H.grid
    if grid.size > MAX_DENSE_POINTS:
        raise ResourceLimitError(f"dense Hamiltonian needs P <= {MAX_DENSE_POINTS} grid points, got {grid.size}")
    columns = []
    for j in range(grid.size):
        unit = np.zeros(grid.size, dtype=np.complex128)
        unit[j] = 1.0
        columns.append(apply_hamiltonian(unit.reshape(grid.shape), H, t).ravel())
    matrix = np.stack(columns, axis=1)
    return 0.5 * (matrix + matrix.conj().T)


class LiouvillePropagator:
    """rho -> U rho U^dagger with U = expm(-i H dt); midpoint H for time-dependent potentials."""

    def __init__(self, H: Hamiltonian, dt: float):
        self.H = H
        self.dt = dt
        self._unitary = None
        if H.potential_fn is None:
            self._unitary = scipy.linalg.expm(-1j * dense_hamiltonian(H) * dt)

    def unitary(self, t: float) -> np.ndarray:
        if self._unitary is not None:
            return self._unitary
        return scipy.linalg.expm(-1j * dense_hamiltonian(self.H, t + 0.5 * self.dt) * self.dt)

    def step(self, rho: np.ndarray, t: float) -> np.ndarray:
        u = self.unitary(t)
        return u @ rho @ u.conj().T


def liouville_step(rho: DensityMatrix, H: Hamiltonian, cfg: EvolutionConfig) -> DensityMatrix:
    propagator = make_propagator(H, cfg.dt, "liouville-dense")
    return DensityMatrix(grid=rho.grid, rho=propagator.step(np.asarray(rho.rho), rho.t), t=rho.t + cfg.dt)


def evolve_density(rho: DensityMatrix, H: Hamiltonian, cfg: EvolutionConfig,
                   callback: Optional[Callable[[int, DensityMatrix], None]] = None) -> DensityMatrix:
    propagator = make_propagator(H, cfg.dt, "liouville-dense")
    matrix, t = np.asarray(rho.rho), rho.t
    state = rho
    trace0 = rho.trace()
    if callback is not None:
        callback(0, rho)
    for step in range(1, cfg.steps + 1):
        matrix = propagator.step(matrix, t)
        t = rho.t + step * cfg.dt
        drift = abs(float(np.real(np.trace(matrix))) * rho.weight - trace0)
        if drift > NORM_TOL:
            raise InvariantBreach(f"trace drift {drift:.3g} exceeds {NORM_TOL:g} at t={t:.17g}")
        if step % cfg.record_every == 0 or step == cfg.steps:
            state = DensityMatrix(grid=rho.grid, rho=matrix, t=t)
            if callback is not None and step % cfg.record_every == 0:
                callback(step, state)
    return state


def orthogonality_preservation_check(states: Sequence[WaveState], H: Hamiltonian, cfg: EvolutionConfig,
                                     mixture_weights: Optional[Sequence[float]] = None) -> OrthogonalityReport:
    """
    Evolve several states and measure how far their Gram matrix and mixture weights drift.

    Args:
        states: Wave states on a common grid
        H: Hamiltonian shared by all states
        cfg: Evolution settings; Schrodinger schemes evolve the states, split-step otherwise
        mixture_weights: When given, the mixture is also evolved densely and its eigenvalues compared

    Returns:
        OrthogonalityReport with Gram magnitude and phase drift and the largest final overlap
    """
    if not states:
        raise ValueError("orthogonality check needs at least one state")
    grid = states[0].grid
    scheme = cfg.scheme if cfg.scheme in WAVE_SCHEMES else "split-step-spectral"
    wave_cfg = cfg.model_copy(update={"scheme": scheme})

    def gram(vectors):
        stacked = np.stack([v.ravel() for v in vectors])
        return stacked.conj() @ stacked.T * grid.cell_volume

    before = gram([state.eta.values for state in states])
    after = gram([evolve_wave(state, H, wave_cfg).eta.values for state in states])
    gram_drift = float(np.max(np.abs(after - before)))
    significant = np.abs(before) > 1e-8
    phase_gap = np.angle(after * np.conj(before))
    phase_drift = float(np.max(np.abs(phase_gap[significant]))) if significant.any() else 0.0
    off_diagonal = after - np.diag(np.diag(after))
    max_offdiagonal = float(np.max(np.abs(off_diagonal))) if len(states) > 1 else 0.0

    weight_drift = None
    if mixture_weights is not None:
        from .representations import mixture

        rho = mixture(states, mixture_weights)
        evolved = evolve_density(rho, H, cfg.model_copy(update={"scheme": "liouville-dense"}))
        eigenvalues = np.sort(np.linalg.eigvalsh(np.asarray(evolved.rho) * evolved.weight))[::-1]
        expected = np.sort(np.asarray(mixture_weights, dtype=float))[::-1]
        weight_drift = float(np.max(np.abs(eigenvalues[: expected.size] - expected)))

    return OrthogonalityReport(
        steps=cfg.steps,
        gram_drift=gram_drift,
        phase_drift=phase_drift,
        max_offdiagonal=max_offdiagonal,
        mixture_weight_drift=weight_drift,
    )


# --- stationary states -------------------------------------------------------

def _normalized(values: np.ndarray, grid: UniformGrid, mu: float) -> WaveState:
    norm = _norm(values, grid)
    if not norm > 0.0:
        raise ValueError("state vanishes on the grid")
    return WaveState(eta=ComplexField(grid=grid, values=values / np.sqrt(norm)), mu=mu)


def harmonic_eigenstate(index: int, grid: UniformGrid, mu: float = 1.0, omega: float = 1.0,
                        center: Optional[Sequence[float]] = None) -> WaveState:
    """Oscillator eigenstate with quantum number index along axis 0 and ground state elsewhere."""
    if index < 0:
        raise ValueError("eigenstate index must be nonnegative")
    center = center if center is not None else (0.0,) * grid.dim
    coords = grid.coordinates()
    scale = np.sqrt(mu * omega)
    values = np.ones(grid.shape)
    for a in range(grid.dim):
        n = index if a == 0 else 0
        xi = scale * (coords[a] - center[a])
        log_norm = -0.5 * (n * np.log(2.0) + gammaln(n + 1)) + 0.25 * np.log(mu * omega / np.pi)
        values = values * np.exp(log_norm) * eval_hermite(n, xi) * np.exp(-0.5 * xi ** 2)
    return _normalized(values.astype(np.complex128), grid, mu)


def box_mask(grid: UniformGrid, x1: float, x2: float) -> np.ndarray:
    coords = grid.coordinates()
    mask = np.ones(grid.shape, dtype=bool)
    for a in range(grid.dim):
        mask &= (coords[a] > x1) & (coords[a] < x2)
    return mask


def box_eigenstate(index: int, grid: UniformGrid, x1: float, x2: float, mu: float = 1.0) -> WaveState:
    """Infinite-well eigenstate on (x1, x2) per axis, quantum number index along axis 0."""
    if index < 0 or not x1 < x2:
        raise ValueError("box eigenstate needs index >= 0 and x1 < x2")
    coords = grid.coordinates()
    width = x2 - x1
    values = np.ones(grid.shape)
    for a in range(grid.dim):
        n = index + 1 if a == 0 else 1
        values = values * np.sin(n * np.pi * (coords[a] - x1) / width)
    values = np.where(box_mask(grid, x1, x2), values, 0.0)
    return _normalized(values.astype(np.complex128), grid, mu)
