import re
import logging
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .grid import gaussian_amplitude
from .schema import (
    ConfigError,
    ContinuumFuzzyPoint,
    FuzzyPoint,
    FuzzyPoset,
    PosetVerdict,
    RealField,
    UniformGrid,
)


def confinement_weights(l: int, n: int, n_ordered: Optional[int] = None) -> FuzzyPoint:
    """
    Uniform membership of a fuzzy element confined between b_l and b_n.

    Args:
        l: Index of the last ordered element below the fuzzy element
        n: Index of the first ordered element above it
        n_ordered: Length of the ordered chain; defaults to n + 1

    Returns:
        FuzzyPoint with weight 1/(n-l-1) on b_{l+1}..b_{n-1}, as exact fractions
    """
    if l < 0 or l + 2 > n:
        raise ValueError(f"confinement needs 0 <= l and l + 2 <= n, got l={l}, n={n}")
    n_ordered = n + 1 if n_ordered is None else n_ordered
    if n_ordered < n:
        raise ValueError(f"n_ordered={n_ordered} is shorter than the interval end {n}")
    share = Fraction(1, n - l - 1)
    weights = tuple(share if l < i < n else Fraction(0) for i in range(n_ordered))
    return FuzzyPoint(weights=weights, interval=(l, n))


def _first_violation(poset: FuzzyPoset, j: int, i: int) -> Optional[PosetVerdict]:
    m, b, a = poset.incomparable[j], poset.below[j], poset.above[j]
    if not m[i] and np.any(m[:i]) and np.any(m[i + 1:]):
        return PosetVerdict(ok=False, violation="contiguity", row=j, column=i,
                            detail=f"incomparable run of a_{j} is broken at b_{i}")
    relations = int(m[i]) + int(b[i]) + int(a[i])
    if relations != 1:
        detail = "no relation recorded" if relations == 0 else "ordered and incomparable at once"
        return PosetVerdict(ok=False, violation="exclusivity", row=j, column=i,
                            detail=f"a_{j} vs b_{i}: {detail}")
    if b[i] and i > 0 and not b[i - 1]:
        return PosetVerdict(ok=False, violation="transitivity", row=j, column=i,
                            detail=f"b_{i} <= a_{j} but not b_{i - 1} <= a_{j}")
    if a[i] and i + 1 < poset.n_ordered and not a[i + 1]:
        return PosetVerdict(ok=False, violation="transitivity", row=j, column=i,
                            detail=f"a_{j} <= b_{i} but not a_{j} <= b_{i + 1}")
    return None


def check_poset_consistency(p: FuzzyPoset) -> PosetVerdict:
    """First violation in row-major order, or an OK verdict."""
    for j in range(p.n_fuzzy):
        for i in range(p.n_ordered):
            verdict = _first_violation(p, j, i)
            if verdict is not None:
                logging.info(f"Poset check failed: {verdict.detail}")
                return verdict
    return PosetVerdict(ok=True, detail=f"{p.n_fuzzy} fuzzy elements over {p.n_ordered} ordered elements")


def ordered_point_density(x_c: Sequence[float], grid: UniformGrid) -> ContinuumFuzzyPoint:
    """Discrete delta of height 1/h^D at the node nearest to x_c."""
    point = np.atleast_1d(np.asarray(x_c, dtype=float))
    if not grid.contains(point):
        raise ValueError(f"point {point.tolist()} lies outside the domain")
    values = np.zeros(grid.shape)
    values[grid.nearest_index(point)] = 1.0 / grid.cell_volume
    return ContinuumFuzzyPoint(density=RealField(grid=grid, values=values))


def continuum_point(fp: FuzzyPoint, positions: Sequence[Sequence[float]], grid: UniformGrid) -> ContinuumFuzzyPoint:
    """Deposit each membership weight at its ordered element's position."""
    if len(positions) != len(fp.weights):
        raise ValueError(f"need one position per ordered element, got {len(positions)} for {len(fp.weights)}")
    values = np.zeros(grid.shape)
    for weight, position in zip(fp.weights, positions):
        if not weight:
            continue
        point = np.atleast_1d(np.asarray(position, dtype=float))
        if not grid.contains(point):
            raise ValueError(f"position {point.tolist()} lies outside the domain")
        values[grid.nearest_index(point)] += float(weight) / grid.cell_volume
    return ContinuumFuzzyPoint(density=RealField(grid=grid, values=values))


def gaussian_point(center: Sequence[float], sigma: float, grid: UniformGrid) -> ContinuumFuzzyPoint:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape != (grid.dim,):
        raise ValueError(f"center needs {grid.dim} coordinates")
    density = np.abs(gaussian_amplitude(grid, center, sigma)) ** 2
    return ContinuumFuzzyPoint(density=RealField(grid=grid, values=density))


# --- text form --------------------------------------------------------------

_LINE = re.compile(r"^a(\d+)\s*:\s*interval\s+(-?\d+)\s*\.\.\s*(-?\d+)\s*,\s*weights\s+(.+)$")


def _row_interval(p: FuzzyPoset, j: int) -> Tuple[int, int]:
    below = np.flatnonzero(p.below[j])
    above = np.flatnonzero(p.above[j])
    l = int(below[-1]) if below.size else -1
    n = int(above[0]) if above.size else p.n_ordered
    return l, n


def dump_poset(p: FuzzyPoset, weights: Optional[Sequence[FuzzyPoint]] = None) -> str:
    verdict = check_poset_consistency(p)
    if not verdict.ok:
        raise ValueError(f"cannot serialize an inconsistent poset: {verdict.detail}")
    lines = []
    for j in range(p.n_fuzzy):
        l, n = _row_interval(p, j)
        point = weights[j] if weights is not None else None
        if point is None or point == confinement_weights(l, n, p.n_ordered):
            text = "uniform"
        else:
            text = ",".join(str(point.weights[i]) for i in range(l + 1, n))
        lines.append(f"a{j}: interval {l}..{n}, weights {text}")
    return "\n".join(lines) + "\n"


def parse_poset(text: str, n_ordered: int) -> Tuple[FuzzyPoset, List[FuzzyPoint]]:
    intervals, points = [], []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _LINE.match(line)
        if not match:
            raise ConfigError(f"expected 'aJ: interval L..N, weights ...', got {line!r}", line=number, column=1)
        index, l, n, spec = int(match.group(1)), int(match.group(2)), int(match.group(3)), match.group(4).strip()
        if index != len(intervals):
            raise ConfigError(f"fuzzy elements must be listed in order, expected a{len(intervals)}",
                              line=number, column=1)
        try:
            if spec == "uniform":
                point = confinement_weights(l, n, n_ordered)
            else:
                inner = [Fraction(part.strip()) for part in spec.split(",")]
                if len(inner) != n - l - 1:
                    raise ValueError(f"interval {l}..{n} needs {n - l - 1} weights, got {len(inner)}")
                full = [Fraction(0)] * n_ordered
                full[l + 1: n] = inner
                point = FuzzyPoint.from_weights(full, (l, n))
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigError(str(e), line=number, column=raw.find("weights") + 1)
        intervals.append((l, n))
        points.append(point)
    if not intervals:
        raise ConfigError("no fuzzy elements found")
    return FuzzyPoset.from_intervals(n_ordered, intervals), points
