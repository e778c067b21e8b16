"""
Variational oracle: compact test bumps probing whether a normalization
factor N(x) is constant, and the f(w) = sqrt(w) check over density samples.
"""

import logging
import math
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from .schema import (
    BumpFamily,
    ConstancyVerdict,
    DbrWitness,
    RealField,
    SqrtVerdict,
    UniformGrid,
)

CONSTANCY_TOL = 1e-7
SQRT_TOL = 1e-8


@lru_cache(maxsize=64)
def bump_norm(kind: str, n: int) -> float:
    """Integral of one positive bump: 4/(3n) in 1D, (4 pi/n^3) int_0^{pi/2} u^2 cos^3 u du in 3D."""
    if n < 1:
        raise ValueError("bump frequency n must be at least 1")
    if kind == "sin3-pair-1D":
        return 4.0 / (3.0 * n)
    if kind == "cos3-sphere-pair-3D":
        radial, _ = quad(lambda u: u * u * math.cos(u) ** 3, 0.0, 0.5 * math.pi)
        return 4.0 * math.pi / n ** 3 * radial
    raise ValueError(f"unknown bump kind: {kind}")


def sin3_profile(n: int, h: float) -> np.ndarray:
    """sin^3(n s) sampled at s = j h on [0, pi/n]."""
    count = int(math.floor(math.pi / (n * h) + 1e-12)) + 1
    return np.sin(n * h * np.arange(count)) ** 3


def cos3_profile(n: int, spacing: Sequence[float]) -> Tuple[np.ndarray, Tuple[int, int, int]]:
    """cos^3(n |r|) inside the ball |r| <= pi/(2n), as a stencil centred on its middle cell."""
    radius = 0.5 * math.pi / n
    reach = tuple(int(math.floor(radius / h + 1e-12)) for h in spacing)
    axes = [np.arange(-k, k + 1) * h for k, h in zip(reach, spacing)]
    x, y, z = np.meshgrid(*axes, indexing="ij")
    r = np.sqrt(x ** 2 + y ** 2 + z ** 2)
    return np.where(r <= radius, np.cos(n * r) ** 3, 0.0), reach


def sampled_mass(family: BumpFamily) -> float:
    grid = family.grid
    if family.kind == "sin3-pair-1D":
        return float(np.sum(sin3_profile(family.n, grid.spacing[0])) * grid.cell_volume)
    profile, _ = cos3_profile(family.n, grid.spacing)
    return float(np.sum(profile) * grid.cell_volume)


def sin3_pair(grid: UniformGrid, n: int, x0: float, x1: float) -> BumpFamily:
    """+sin^3 bump starting at x0 and -sin^3 bump starting at x1, snapped to grid nodes."""
    if grid.dim != 1:
        raise ValueError("sin3-pair-1D needs a 1D grid")
    placements = ((grid.nearest_index([x0])[0],), (grid.nearest_index([x1])[0],))
    family = BumpFamily(kind="sin3-pair-1D", n=n, placements=placements, grid=grid)
    _check_family(family)
    return family


def cos3_pair(grid: UniformGrid, n: int, r1: Sequence[float], r2: Sequence[float]) -> BumpFamily:
    """+cos^3 ball around r1 and -cos^3 ball around r2, snapped to grid nodes."""
    if grid.dim != 3:
        raise ValueError("cos3-sphere-pair-3D needs a 3D grid")
    placements = (grid.nearest_index(r1), grid.nearest_index(r2))
    family = BumpFamily(kind="cos3-sphere-pair-3D", n=n, placements=placements, grid=grid)
    _check_family(family)
    return family


def _check_family(family: BumpFamily) -> None:
    grid = family.grid
    if family.kind == "sin3-pair-1D":
        width = sin3_profile(family.n, grid.spacing[0]).size
        (i0,), (i1,) = family.placements
        for start in (i0, i1):
            if start < 0 or start + width > grid.n[0]:
                raise ValueError(f"bump at index {start} leaves the domain")
        if abs(i0 - i1) < width:
            raise ValueError("bump supports overlap")
        return
    _, reach = cos3_profile(family.n, grid.spacing)
    for center in family.placements:
        for a in range(3):
            # one full radius of clearance beyond the ball itself
            if center[a] - 2 * reach[a] < 0 or center[a] + 2 * reach[a] >= grid.n[a]:
                raise ValueError(f"ball at {center} is closer than one radius to the boundary")
    gap = [abs(p - q) for p, q in zip(*family.placements)]
    if all(g <= 2 * k for g, k in zip(gap, reach)):
        separation = math.sqrt(sum((g * h) ** 2 for g, h in zip(gap, grid.spacing)))
        if separation <= math.pi / family.n:
            raise ValueError("ball supports overlap")


def _bump_integral(values: np.ndarray, family: BumpFamily, which: int) -> float:
    grid = family.grid
    if family.kind == "sin3-pair-1D":
        profile = sin3_profile(family.n, grid.spacing[0])
        start = family.placements[which][0]
        return float(np.dot(profile, values[start: start + profile.size]) * grid.cell_volume)
    profile, reach = cos3_profile(family.n, grid.spacing)
    center = family.placements[which]
    window = tuple(slice(c - k, c + k + 1) for c, k in zip(center, reach))
    return float(np.sum(profile * values[window]) * grid.cell_volume)


def functional_I(N: RealField, family: BumpFamily) -> float:
    """
    Sum of N times the signed bump pair over the grid.

    Args:
        N: Sampled normalization factor
        family: Bump pair on the same grid

    Returns:
        Integral of N over the positive bump minus the integral over the negative bump
    """
    if N.grid != family.grid:
        raise ValueError("N and the bump family must share a grid")
    _check_family(family)
    return _bump_integral(N.values, family, 0) - _bump_integral(N.values, family, 1)


def normalized_I(N: RealField, family: BumpFamily) -> float:
    return functional_I(N, family) / sampled_mass(family)


def _prefix_argmin(values: np.ndarray) -> np.ndarray:
    """Index of the first minimum of values[:k+1] for every k."""
    running = np.minimum.accumulate(values)
    previous = np.concatenate(([np.inf], running[:-1]))
    marks = np.where(values < previous, np.arange(values.size), 0)
    return np.maximum.accumulate(marks)


def _suffix_argmin(values: np.ndarray) -> np.ndarray:
    """Index of the first minimum of values[k:] for every k."""
    reverse = values[::-1]
    running = np.minimum.accumulate(reverse)
    marks = np.where(reverse == running, np.arange(values.size), 0)
    lowest = values.size - 1 - np.maximum.accumulate(marks)
    return lowest[::-1]


def _best_pair(bump: np.ndarray, width: int) -> Tuple[float, int, int]:
    """Largest bump[i] - bump[j] over placements with |i - j| >= width, lowest indices on ties."""
    count = bump.size
    best_value, best_i, best_j = -np.inf, -1, -1
    prefix = _prefix_argmin(bump)
    suffix = _suffix_argmin(bump)
    for i in range(count):
        candidates = []
        if i - width >= 0:
            candidates.append(int(prefix[i - width]))
        if i + width < count:
            candidates.append(int(suffix[i + width]))
        if not candidates:
            continue
        j = min(candidates, key=lambda k: (bump[k], k))
        value = float(bump[i] - bump[j])
        if value > best_value:
            best_value, best_i, best_j = value, i, j
    return best_value, best_i, best_j


def certify_constancy(N: RealField, n_max: int, tol: float = CONSTANCY_TOL) -> ConstancyVerdict:
    """
    Scan every 1D sin^3 bump pair for n = 1..n_max and decide whether N is constant.

    Args:
        N: Normalization factor sampled on a 1D grid
        n_max: Largest bump frequency
        tol: Relative tolerance; N is constant iff every |I| < tol * 4/(3n)

    Returns:
        ConstancyVerdict with the maximizing witness when N is not constant
    """
    grid = N.grid
    if grid.dim != 1:
        raise ValueError("certify_constancy scans 1D samples")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    values = N.values
    h = grid.spacing[0]

    constant = True
    best = None
    for n in range(1, n_max + 1):
        profile = sin3_profile(n, h)
        width = profile.size
        if 2 * width > values.size:
            logging.info(f"Bump pair for n={n} does not fit on {values.size} samples")
            continue
        bump = np.correlate(values, profile, mode="valid") * h
        value, i0, i1 = _best_pair(bump, width)
        if value >= tol * bump_norm("sin3-pair-1D", n):
            constant = False
        if best is None or value > best[0]:
            best = (value, n, i0, i1, width)

    if best is None:
        raise ValueError("grid too short for any bump pair")
    value, n, i0, i1, width = best
    if constant:
        return ConstancyVerdict(constant=True, max_abs_I=max(value, 0.0))

    coords = grid.axis_coordinates(0)
    norm = bump_norm("sin3-pair-1D", n)
    d1 = float(np.min(values[i0: i0 + width]))
    d2 = float(np.max(values[i1: i1 + width]))
    witness = DbrWitness(
        n=n,
        placements=((i0,), (i1,)),
        positions=((float(coords[i0]),), (float(coords[i1]),)),
        value=value,
        d1=d1,
        d2=d2,
        bound=(d1 - d2) * norm,
    )
    return ConstancyVerdict(constant=False, max_abs_I=value, witness=witness)


def verify_f_equals_sqrt_w(trial_f: Callable[[np.ndarray], np.ndarray], w_samples: Sequence[RealField],
                           tol: float = SQRT_TOL) -> SqrtVerdict:
    """Check that integral of trial_f(w)^2 is 1 for every sampled density."""
    if not w_samples:
        raise ValueError("need at least one density sample")
    norms = []
    for sample in w_samples:
        f = np.asarray(trial_f(sample.values), dtype=float)
        norms.append(float(np.sum(f ** 2) * sample.grid.cell_volume))
    norms_array = np.array(norms)
    passed = bool(np.all(np.abs(norms_array - 1.0) < tol))
    witness = None if passed else (int(np.argmin(norms_array)), int(np.argmax(norms_array)))
    return SqrtVerdict(passed=passed, norms=tuple(norms), spread=float(np.ptp(norms_array)), witness=witness)


def random_mixture_densities(grid: UniformGrid, count: int, seed: int = 0,
                             max_terms: int = 3) -> List[RealField]:
    """Random Gaussian mixtures with widths in [0.3, 3], normalized on the grid."""
    rng = np.random.default_rng(seed)
    coords = grid.coordinates()
    densities = []
    for _ in range(count):
        terms = int(rng.integers(1, max_terms + 1))
        weights = rng.dirichlet(np.ones(terms))
        values = np.zeros(grid.shape)
        for weight in weights:
            sigma = rng.uniform(0.3, 3.0)
            center = [rng.uniform(-0.25 * extent, 0.25 * extent) for extent in grid.length]
            r2 = sum((coords[a] - center[a]) ** 2 for a in range(grid.dim))
            values += weight * np.exp(-r2 / (2.0 * sigma ** 2))
        values /= np.sum(values) * grid.cell_volume
        densities.append(RealField(grid=grid, values=values))
    return densities
