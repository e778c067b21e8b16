"""
Differential and spectral operators on uniform grids.

Periodic axes are differentiated spectrally; every other axis uses
fourth-order finite differences with one-sided boundary rows.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import fft as sfft

from . import worker_count
from .schema import ComplexField, Diagnostics, Hamiltonian, RealField, UniformGrid, WaveState

Field = Union[RealField, ComplexField]

SQRT_2PI = np.sqrt(2.0 * np.pi)


def _rebuild(template: Field, values: np.ndarray) -> Field:
    if isinstance(template, RealField):
        return RealField(grid=template.grid, values=np.real(values))
    return ComplexField(grid=template.grid, values=values)


def _check_axis(grid: UniformGrid, axis: int) -> None:
    if not 0 <= axis < grid.dim:
        raise ValueError(f"axis {axis} out of range for a {grid.dim}D grid")


def integrate(f: Field) -> float:
    """Midpoint-rule integral: sum of samples times the cell volume."""
    total = np.sum(f.values) * f.grid.cell_volume
    if isinstance(f, ComplexField):
        return complex(total)
    return float(total)


# --- per-array kernels ------------------------------------------------------

def spectral_derivative(values: np.ndarray, grid: UniformGrid, axis: int, order: int = 1) -> np.ndarray:
    """Spectral derivative along a periodic axis; the Nyquist mode is dropped for odd orders."""
    k = grid.wavenumbers(axis)
    if order % 2 == 1 and grid.n[axis] % 2 == 0:
        k = k.copy()
        k[grid.n[axis] // 2] = 0.0
    shape = [1] * grid.dim
    shape[axis] = -1
    factor = ((1j * k) ** order).reshape(shape)
    transformed = sfft.fft(values, axis=axis, workers=worker_count())
    result = sfft.ifft(transformed * factor, axis=axis, workers=worker_count())
    if np.isrealobj(values):
        return np.real(result)
    return result


def fd_first_derivative(values: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    f = np.moveaxis(np.asarray(values), axis, -1)
    if periodic:
        out = (np.roll(f, 2, axis=-1) - 8.0 * np.roll(f, 1, axis=-1)
               + 8.0 * np.roll(f, -1, axis=-1) - np.roll(f, -2, axis=-1)) / (12.0 * h)
        return np.moveaxis(out, -1, axis)

    out = np.empty_like(f)
    out[..., 2:-2] = (f[..., :-4] - 8.0 * f[..., 1:-3] + 8.0 * f[..., 3:-1] - f[..., 4:]) / (12.0 * h)
    out[..., 0] = (-25.0 * f[..., 0] + 48.0 * f[..., 1] - 36.0 * f[..., 2]
                   + 16.0 * f[..., 3] - 3.0 * f[..., 4]) / (12.0 * h)
    out[..., 1] = (-3.0 * f[..., 0] - 10.0 * f[..., 1] + 18.0 * f[..., 2]
                   - 6.0 * f[..., 3] + f[..., 4]) / (12.0 * h)
    out[..., -1] = -(-25.0 * f[..., -1] + 48.0 * f[..., -2] - 36.0 * f[..., -3]
                     + 16.0 * f[..., -4] - 3.0 * f[..., -5]) / (12.0 * h)
    out[..., -2] = -(-3.0 * f[..., -1] - 10.0 * f[..., -2] + 18.0 * f[..., -3]
                     - 6.0 * f[..., -4] + f[..., -5]) / (12.0 * h)
    return np.moveaxis(out, -1, axis)


def fd_second_derivative(values: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    f = np.moveaxis(np.asarray(values), axis, -1)
    scale = 12.0 * h * h
    if periodic:
        out = (-np.roll(f, 2, axis=-1) + 16.0 * np.roll(f, 1, axis=-1) - 30.0 * f
               + 16.0 * np.roll(f, -1, axis=-1) - np.roll(f, -2, axis=-1)) / scale
        return np.moveaxis(out, -1, axis)

    out = np.empty_like(f)
    out[..., 2:-2] = (-f[..., :-4] + 16.0 * f[..., 1:-3] - 30.0 * f[..., 2:-2]
                      + 16.0 * f[..., 3:-1] - f[..., 4:]) / scale
    edge0 = (45.0, -154.0, 214.0, -156.0, 61.0, -10.0)
    edge1 = (10.0, -15.0, -4.0, 14.0, -6.0, 1.0)
    out[..., 0] = sum(c * f[..., i] for i, c in enumerate(edge0)) / scale
    out[..., 1] = sum(c * f[..., i] for i, c in enumerate(edge1)) / scale
    out[..., -1] = sum(c * f[..., -1 - i] for i, c in enumerate(edge0)) / scale
    out[..., -2] = sum(c * f[..., -1 - i] for i, c in enumerate(edge1)) / scale
    return np.moveaxis(out, -1, axis)


def derivative_values(values: np.ndarray, grid: UniformGrid, axis: int) -> np.ndarray:
    if grid.periodic[axis]:
        return spectral_derivative(values, grid, axis)
    return fd_first_derivative(values, grid.spacing[axis], axis, periodic=False)


def local_derivative_values(values: np.ndarray, grid: UniformGrid, axis: int) -> np.ndarray:
    return fd_first_derivative(values, grid.spacing[axis], axis, periodic=grid.periodic[axis])


def laplacian_values(values: np.ndarray, grid: UniformGrid) -> np.ndarray:
    total = np.zeros_like(values)
    for a in range(grid.dim):
        if grid.periodic[a]:
            total = total + spectral_derivative(values, grid, a, order=2)
        else:
            total = total + fd_second_derivative(values, grid.spacing[a], a, periodic=False)
    return total


# --- field operators --------------------------------------------------------

def gradient(f: Field, axis: int) -> Field:
    """
    Derivative of a field along one axis.

    Args:
        f: Real or complex field
        axis: Axis index in 0..dim-1

    Returns:
        A field of the same kind holding the derivative
    """
    _check_axis(f.grid, axis)
    return _rebuild(f, derivative_values(f.values, f.grid, axis))


def finite_difference_gradient(f: Field, axis: int) -> Field:
    """Fourth-order local-stencil derivative on any axis (wraps on periodic axes)."""
    _check_axis(f.grid, axis)
    return _rebuild(f, local_derivative_values(f.values, f.grid, axis))


def laplacian(f: Field) -> Field:
    return _rebuild(f, laplacian_values(f.values, f.grid))


def divergence(vec: Sequence[Field]) -> Field:
    if not vec:
        raise ValueError("divergence needs at least one component")
    grid = vec[0].grid
    if len(vec) != grid.dim or any(component.grid != grid for component in vec):
        raise ValueError("divergence needs one component per axis on a common grid")
    total = sum(derivative_values(component.values, grid, a) for a, component in enumerate(vec))
    return _rebuild(vec[0], total)


# --- transforms -------------------------------------------------------------

def _momentum_phase(grid: UniformGrid, sign: float) -> np.ndarray:
    """exp(sign * i p.x0) with p in FFT order."""
    phase = np.ones(grid.shape, dtype=np.complex128)
    for a in range(grid.dim):
        shape = [1] * grid.dim
        shape[a] = -1
        x0 = grid.axis_coordinates(a)[0]
        phase = phase * np.exp(sign * 1j * grid.wavenumbers(a) * x0).reshape(shape)
    return phase


def forward_transform(eta: ComplexField) -> ComplexField:
    """Unitary-normalized transform of a position amplitude onto the ascending momentum grid."""
    grid = eta.grid
    if not grid.all_periodic:
        raise ValueError("forward_transform requires a periodic grid")
    scale = np.prod([h / SQRT_2PI for h in grid.spacing])
    spectrum = sfft.fftn(eta.values, workers=worker_count()) * _momentum_phase(grid, -1.0) * scale
    return ComplexField(grid=grid.momentum_grid(), values=sfft.fftshift(spectrum))


def inverse_transform(phi: ComplexField, position_grid: UniformGrid) -> ComplexField:
    if not position_grid.all_periodic:
        raise ValueError("inverse_transform requires a periodic position grid")
    if phi.grid != position_grid.momentum_grid():
        raise ValueError("momentum amplitude does not live on the grid's momentum grid")
    scale = np.prod([SQRT_2PI / h for h in position_grid.spacing])
    unshifted = sfft.ifftshift(phi.values) * _momentum_phase(position_grid, 1.0)
    values = sfft.ifftn(unshifted, workers=worker_count()) * scale
    return ComplexField(grid=position_grid, values=values)


# --- diagnostics ------------------------------------------------------------

def diagnostics(state: Union[WaveState, ComplexField], hamiltonian: Optional[Hamiltonian] = None) -> Diagnostics:
    """
    Scalar summaries of a dynamical state.

    Args:
        state: Wave state, or a bare amplitude (mass taken from the Hamiltonian, else 1)
        hamiltonian: Hamiltonian for the energy; the free derived one when omitted

    Returns:
        Diagnostics with norm, moments, mean velocity and momentum, energy and continuity residual
    """
    from .dynamics import apply_hamiltonian, continuity_residual

    if isinstance(state, WaveState):
        eta, mu, t = state.eta, state.mu, state.t
    else:
        eta, mu, t = state, (hamiltonian.mu if hamiltonian else 1.0), 0.0
    grid = eta.grid
    norm = eta.norm()
    if not norm > 0.0:
        raise ValueError("diagnostics of a zero-norm state")
    if hamiltonian is None:
        hamiltonian = Hamiltonian.free(mu, grid)

    psi = eta.values / np.sqrt(norm)
    w = np.abs(psi) ** 2
    dv = grid.cell_volume
    coords = grid.coordinates()

    mean_x, variances, mean_v = [], [], []
    for a in range(grid.dim):
        m = float(np.sum(coords[a] * w) * dv)
        mean_x.append(m)
        variances.append(float(np.sum((coords[a] - m) ** 2 * w) * dv))
        current = np.imag(np.conj(psi) * derivative_values(psi, grid, a)) / mu
        mean_v.append(float(np.sum(current) * dv))

    if grid.all_periodic:
        phi = forward_transform(ComplexField(grid=grid, values=psi))
        w_p = np.abs(phi.values) ** 2
        p_coords = phi.grid.coordinates()
        dp = phi.grid.cell_volume
        mean_p = [float(np.sum(p_coords[a] * w_p) * dp) for a in range(grid.dim)]
    else:
        mean_p = [mu * value for value in mean_v]

    h_psi = apply_hamiltonian(psi, hamiltonian, t)
    energy = float(np.real(np.sum(np.conj(psi) * h_psi)) * dv)

    normalized = WaveState(eta=ComplexField(grid=grid, values=psi), mu=mu, t=t)
    residual = continuity_residual(normalized, hamiltonian)

    return Diagnostics(
        norm=norm,
        mean_x=tuple(mean_x),
        sigma_x=float(np.sqrt(sum(variances))),
        mean_v=tuple(mean_v),
        mean_p=tuple(mean_p),
        energy=energy,
        continuity_residual=residual,
    )


def gaussian_amplitude(grid: UniformGrid, center: Sequence[float], sigma: float,
                       momentum: Optional[Sequence[float]] = None) -> np.ndarray:
    """Normalized Gaussian packet sqrt(w) * exp(i p0.x) with density standard deviation sigma."""
    coords = grid.coordinates()
    momentum = momentum if momentum is not None else (0.0,) * grid.dim
    r2 = sum((coords[a] - center[a]) ** 2 for a in range(grid.dim))
    phase = sum(momentum[a] * coords[a] for a in range(grid.dim))
    values = np.exp(-r2 / (4.0 * sigma ** 2) + 1j * phase)
    return values / np.sqrt(np.sum(np.abs(values) ** 2) * grid.cell_volume)


def as_tuple(values, dim: int) -> Tuple[float, ...]:
    values = tuple(np.atleast_1d(values).tolist())
    if len(values) == 1:
        return values * dim
    if len(values) != dim:
        raise ValueError(f"expected 1 or {dim} entries, got {len(values)}")
    return values
