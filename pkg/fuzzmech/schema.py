import math
from fractions import Fraction
from typing import Annotated, Any, Callable, Dict, List, Literal, Optional, Tuple, TypedDict

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator, model_validator


# --- Errors -----------------------------------------------------------------

class FuzzmechError(Exception):
    """Base class for every error raised by the simulator."""


class ConfigError(FuzzmechError, ValueError):
    """Usage or scenario configuration problem (CLI exit code 2)."""

    def __init__(self, message: str, line: Optional[int] = None,
                 column: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.column = column
        self.key = key
        if line is not None:
            message = f"line {line}, column {column or 1}: {message}"
        super().__init__(message)


class InvariantBreach(FuzzmechError, RuntimeError):
    """A conservation law or state invariant failed mid-run (exit code 1)."""


class NodeFormationError(InvariantBreach):
    """The hydrodynamic state developed a node; the flow velocity is undefined."""

    def __init__(self, message: str, t: float):
        self.t = t
        super().__init__(f"{message} (t={t:.17g})")


class StabilityError(InvariantBreach):
    """Requested time step needs more substeps than the scheme allows."""


class CirculationError(FuzzmechError, ValueError):
    """Phase integration is path dependent: a nodal circulation is present."""


class QuantizationError(FuzzmechError, ValueError):
    """A loop touches a node or its phase increment is not close to 2*pi*n."""


class ResourceLimitError(FuzzmechError, ValueError):
    """A dense object would exceed desk-scale size."""


# --- Grid and fields --------------------------------------------------------

class UniformGrid(BaseModel):
    """Uniform grid on a box of R^D; periodic axes are node centred, others cell centred."""
    model_config = ConfigDict(frozen=True)

    dim: int = Field(..., ge=1, le=3, description="Number of axes")
    n: Tuple[int, ...] = Field(..., description="Points per axis")
    length: Tuple[float, ...] = Field(..., description="Physical extent per axis")
    periodic: Tuple[bool, ...] = Field(..., description="Periodicity per axis")
    origin: Optional[Tuple[float, ...]] = Field(None, description="Lower box corner; default -length/2")

    @model_validator(mode="after")
    def _check_axes(self) -> "UniformGrid":
        for name in ("n", "length", "periodic"):
            if len(getattr(self, name)) != self.dim:
                raise ValueError(f"grid.{name} must have {self.dim} entries")
        if self.origin is not None and len(self.origin) != self.dim:
            raise ValueError(f"grid.origin must have {self.dim} entries")
        if any(count < 8 for count in self.n):
            raise ValueError("grid.n must be at least 8 on every axis")
        if any(not np.isfinite(extent) or extent <= 0 for extent in self.length):
            raise ValueError("grid.length must be positive on every axis")
        return self

    @classmethod
    def build(cls, n, length, periodic=True, dim: Optional[int] = None,
              origin=None) -> "UniformGrid":
        """Build a grid broadcasting scalar arguments over ``dim`` axes."""
        def as_tuple(value):
            return tuple(value) if isinstance(value, (tuple, list)) else (value,)

        n, length, periodic = as_tuple(n), as_tuple(length), as_tuple(periodic)
        dim = dim or max(len(n), len(length), len(periodic))
        n = n * dim if len(n) == 1 else n
        length = length * dim if len(length) == 1 else length
        periodic = periodic * dim if len(periodic) == 1 else periodic
        if origin is not None:
            origin = as_tuple(origin)
            origin = origin * dim if len(origin) == 1 else origin
        return cls(dim=dim, n=tuple(int(c) for c in n), length=tuple(float(e) for e in length),
                   periodic=tuple(bool(p) for p in periodic),
                   origin=None if origin is None else tuple(float(o) for o in origin))

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.n)

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(extent / count for extent, count in zip(self.length, self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def all_periodic(self) -> bool:
        return all(self.periodic)

    def lower_corner(self, axis: int) -> float:
        if self.origin is not None:
            return self.origin[axis]
        return -0.5 * self.length[axis]

    def axis_coordinates(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        offset = 0.0 if self.periodic[axis] else 0.5
        return self.lower_corner(axis) + (np.arange(self.n[axis]) + offset) * h

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        axes = [self.axis_coordinates(a) for a in range(self.dim)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def wavenumbers(self, axis: int) -> np.ndarray:
        """Angular wavenumbers of the axis in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n[axis], d=self.spacing[axis])

    def momentum_grid(self) -> "UniformGrid":
        if not self.all_periodic:
            raise ValueError("momentum grid requires every axis to be periodic")
        lengths, origins = [], []
        for a in range(self.dim):
            p = np.fft.fftshift(self.wavenumbers(a))
            lengths.append(2.0 * np.pi / self.spacing[a])
            origins.append(float(p[0]))
        return UniformGrid(dim=self.dim, n=self.n, length=tuple(lengths),
                           periodic=(True,) * self.dim, origin=tuple(origins))

    def contains(self, point) -> bool:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != (self.dim,):
            return False
        for a in range(self.dim):
            lo = self.lower_corner(a)
            if not lo <= point[a] <= lo + self.length[a]:
                return False
        return True

    def nearest_index(self, point) -> Tuple[int, ...]:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        index = []
        for a in range(self.dim):
            coords = self.axis_coordinates(a)
            index.append(int(np.argmin(np.abs(coords - point[a]))))
        return tuple(index)


class _ArrayModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class RealField(_ArrayModel):
    """Real samples of a scalar function on a grid (w, U, gamma, velocity components)."""
    grid: UniformGrid
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_float_array(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_samples(self) -> "RealField":
        if self.values.shape != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        return self

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)

    def as_density(self, tol: float = 1e-8) -> "RealField":
        """Return self after checking the density role: nonnegative with unit integral."""
        if np.any(self.values < 0):
            raise ValueError("density must be nonnegative")
        total = self.integral()
        if abs(total - 1.0) > tol:
            raise ValueError(f"density must integrate to 1, got {total:.17g}")
        return self


class ComplexField(_ArrayModel):
    """Complex samples on a grid (eta, momentum amplitudes)."""
    grid: UniformGrid
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_complex_array(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.complex128)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_samples(self) -> "ComplexField":
        if self.values.shape != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        return self

    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume)


class Diagnostics(BaseModel):
    """Scalar summaries of a state at one instant."""
    norm: float = Field(..., gt=0)
    mean_x: Tuple[float, ...]
    sigma_x: float = Field(..., ge=0)
    mean_v: Tuple[float, ...]
    mean_p: Tuple[float, ...]
    energy: float
    continuity_residual: float


# --- State representations --------------------------------------------------

class ObservationalState(_ArrayModel):
    """Density and flow velocity {w, v}; v is stored as 0 off the support."""
    w: RealField
    v: Tuple[RealField, ...]
    mu: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check_components(self) -> "ObservationalState":
        if len(self.v) != self.w.grid.dim:
            raise ValueError("velocity needs one component per axis")
        self.w.as_density()
        return self

    def current(self) -> Tuple[np.ndarray, ...]:
        return tuple(self.w.values * component.values for component in self.v)


class PhaseState(_ArrayModel):
    """Density and phase {w, gamma}; the full phase is gamma + c_gamma."""
    w: RealField
    gamma: RealField
    c_gamma: float = 0.0
    mu: float = Field(1.0, gt=0)
    t: float = 0.0
    component_constants: Tuple[float, ...] = ()
    branch_cut: bool = False

    @model_validator(mode="after")
    def _check_density(self) -> "PhaseState":
        if self.gamma.grid != self.w.grid:
            raise ValueError("w and gamma must share a grid")
        self.w.as_density()
        return self

    def full_phase(self) -> np.ndarray:
        return self.gamma.values + self.c_gamma


class WaveState(_ArrayModel):
    """Normalized complex amplitude eta with its mass parameter."""
    eta: ComplexField
    mu: float = Field(1.0, gt=0)
    t: float = 0.0

    @model_validator(mode="after")
    def _check_norm(self) -> "WaveState":
        total = self.eta.norm()
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"wave state must be normalized, got norm {total:.17g}")
        return self

    @property
    def grid(self) -> UniformGrid:
        return self.eta.grid

    def density(self) -> np.ndarray:
        return np.abs(self.eta.values) ** 2


class MomentumState(_ArrayModel):
    """Momentum density w_p and auxiliary phase beta on the momentum grid."""
    w_p: RealField
    beta: RealField
    mu: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check_density(self) -> "MomentumState":
        self.w_p.as_density()
        return self

    def velocity_distribution(self) -> RealField:
        """w_u(u) = mu * w_p(mu * u) on the velocity grid (momentum grid scaled by 1/mu)."""
        p_grid = self.w_p.grid
        u_grid = UniformGrid(
            dim=p_grid.dim,
            n=p_grid.n,
            length=tuple(extent / self.mu for extent in p_grid.length),
            periodic=p_grid.periodic,
            origin=tuple(p_grid.lower_corner(a) / self.mu for a in range(p_grid.dim)),
        )
        return RealField(grid=u_grid, values=self.w_p.values * self.mu ** p_grid.dim)


class DensityMatrix(_ArrayModel):
    """Dense kernel rho(r1, r2) over grid points; traces use the cell volume as weight."""
    grid: UniformGrid
    rho: np.ndarray
    t: float = 0.0

    @field_validator("rho", mode="before")
    @classmethod
    def _as_complex_matrix(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.complex128)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_shape(self) -> "DensityMatrix":
        size = self.grid.size
        if self.rho.shape != (size, size):
            raise ValueError(f"density matrix must be {size}x{size}")
        if not np.all(np.isfinite(self.rho)):
            raise ValueError("density matrix must be finite")
        return self

    @property
    def weight(self) -> float:
        return self.grid.cell_volume

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).reshape(self.grid.shape)

    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)) * self.weight)

    def purity(self) -> float:
        return float(np.sum(np.abs(self.rho) ** 2) * self.weight ** 2)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self.rho - self.rho.conj().T)) <= tol)

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.rho * self.weight)))

    def kappa(self, i: int, j: int) -> float:
        """Bilocal correlation between flat grid indices i and j."""
        return float(np.angle(self.rho[i, j]))


class Observable(_ArrayModel):
    """Operator specification for trace expectations."""
    kind: Literal["position", "momentum", "potential-energy", "kinetic-energy",
                  "identity", "custom-diagonal"]
    axis: int = 0
    values: Optional[np.ndarray] = None
    mu: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _check_mass(self) -> "Observable":
        if self.kind == "kinetic-energy" and self.mu is None:
            raise ValueError("kinetic-energy observable needs the particle mass mu")
        return self


# --- Dynamics ----------------------------------------------------------------

class Hamiltonian(_ArrayModel):
    """H = -sum_l b_{2l} d^{2l} + U(x, t); defaults to the single term b_2 = 1/(2 mu)."""
    mu: float = Field(..., gt=0)
    potential: RealField
    b_coeffs: Tuple[Tuple[int, float], ...] = ()
    potential_fn: Optional[Callable[[float], np.ndarray]] = None
    dirichlet_mask: Optional[np.ndarray] = None

    @model_validator(mode="before")
    @classmethod
    def _default_coefficients(cls, data: Any) -> Any:
        if isinstance(data, dict) and not data.get("b_coeffs"):
            data = {**data, "b_coeffs": ((2, 1.0 / (2.0 * float(data["mu"]))),)}
        return data

    @model_validator(mode="after")
    def _check_coefficients(self) -> "Hamiltonian":
        for order, coefficient in self.b_coeffs:
            if order < 2 or order % 2:
                raise ValueError(f"Hamiltonian orders must be even and >= 2, got {order}")
            if not np.isfinite(coefficient):
                raise ValueError("Hamiltonian coefficients must be finite")
        if self.dirichlet_mask is not None and self.dirichlet_mask.shape != self.potential.grid.shape:
            raise ValueError("dirichlet_mask must match the grid")
        return self

    @classmethod
    def derived(cls, mu: float, potential: RealField, **kwargs) -> "Hamiltonian":
        return cls(mu=mu, potential=potential, **kwargs)

    @classmethod
    def free(cls, mu: float, grid: UniformGrid, **kwargs) -> "Hamiltonian":
        return cls(mu=mu, potential=RealField(grid=grid, values=np.zeros(grid.shape)), **kwargs)

    @property
    def grid(self) -> UniformGrid:
        return self.potential.grid

    @property
    def kinetic_coefficient(self) -> float:
        return float(sum(b for order, b in self.b_coeffs if order == 2))

    def is_derived(self) -> bool:
        extra = [b for order, b in self.b_coeffs if order != 2 and b != 0.0]
        return not extra and math.isclose(self.kinetic_coefficient, 1.0 / (2.0 * self.mu), rel_tol=1e-12)

    def has_only_b2(self) -> bool:
        return all(order == 2 or b == 0.0 for order, b in self.b_coeffs)

    def symbol(self, k2: np.ndarray) -> np.ndarray:
        """Fourier symbol of the differential part for squared wavenumber k2."""
        total = np.zeros_like(k2, dtype=np.float64)
        for order, coefficient in self.b_coeffs:
            total -= coefficient * (-k2) ** (order // 2)
        return total

    def potential_at(self, t: float) -> np.ndarray:
        if self.potential_fn is None:
            return self.potential.values
        return np.asarray(self.potential_fn(t), dtype=np.float64)


class EvolutionConfig(BaseModel):
    dt: float = Field(..., gt=0)
    steps: int = Field(1, ge=1)
    scheme: Literal["split-step-spectral", "crank-nicolson", "madelung-fd", "liouville-dense"] = "split-step-spectral"
    record_every: int = Field(1, ge=1)
    max_substeps: int = Field(1000, ge=1)


class OrthogonalityReport(BaseModel):
    steps: int
    gram_drift: float
    phase_drift: float
    max_offdiagonal: float
    mixture_weight_drift: Optional[float] = None


class HamiltonianScan(BaseModel):
    b2_values: Tuple[float, ...]
    b4_values: Tuple[float, ...]
    residuals: Tuple[Tuple[float, ...], ...]
    best_b2: float
    best_b4: float


class CompareReport(BaseModel):
    times: Tuple[float, ...]
    l2_gaps: Tuple[float, ...]
    linf_gaps: Tuple[float, ...]
    passed: bool
    halted_at: Optional[float] = None
    message: str


# --- Fuzzy structures -------------------------------------------------------

class FuzzyPoset(_ArrayModel):
    """Ordered chain b_0 <= b_1 <= ... plus fuzzy elements a_j related to it.

    incomparable[j, i] is M_{ji}; below[j, i] means b_i <= a_j; above[j, i] means a_j <= b_i.
    """
    n_ordered: int = Field(..., ge=1)
    incomparable: np.ndarray
    below: np.ndarray
    above: np.ndarray

    @field_validator("incomparable", "below", "above", mode="before")
    @classmethod
    def _as_bool_matrix(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=bool, ndmin=2)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_shapes(self) -> "FuzzyPoset":
        shape = self.incomparable.shape
        if shape[1] != self.n_ordered or self.below.shape != shape or self.above.shape != shape:
            raise ValueError("relation matrices must all be (n_fuzzy, n_ordered)")
        return self

    @property
    def n_fuzzy(self) -> int:
        return int(self.incomparable.shape[0])

    @classmethod
    def from_intervals(cls, n_ordered: int, intervals: List[Tuple[int, int]]) -> "FuzzyPoset":
        """a_j sits strictly between b_l and b_n: incomparable to b_{l+1}..b_{n-1}."""
        rows = len(intervals)
        incomparable = np.zeros((rows, n_ordered), dtype=bool)
        below = np.zeros((rows, n_ordered), dtype=bool)
        above = np.zeros((rows, n_ordered), dtype=bool)
        for j, (l, n) in enumerate(intervals):
            if l < 0 or l + 2 > n or n > n_ordered:
                raise ValueError(f"interval ({l}, {n}) invalid for {n_ordered} ordered elements")
            below[j, : l + 1] = True
            incomparable[j, l + 1: n] = True
            above[j, n:] = True
        return cls(n_ordered=n_ordered, incomparable=incomparable, below=below, above=above)


class FuzzyPoint(BaseModel):
    """Membership weights of one fuzzy element over the ordered chain."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    weights: Tuple[Fraction, ...]
    interval: Tuple[int, int]

    @model_validator(mode="after")
    def _check_weights(self) -> "FuzzyPoint":
        l, n = self.interval
        if l < 0 or l + 2 > n or n > len(self.weights):
            raise ValueError(f"interval ({l}, {n}) invalid for {len(self.weights)} weights")
        if any(weight < 0 for weight in self.weights):
            raise ValueError("membership weights must be nonnegative")
        if sum(self.weights, Fraction(0)) != 1:
            raise ValueError(f"membership weights must sum to 1, got {sum(self.weights, Fraction(0))}")
        outside = [i for i, weight in enumerate(self.weights) if weight and not l < i < n]
        if outside:
            raise ValueError(f"weight on b_{outside[0]} lies outside the open interval ({l}, {n})")
        return self

    @classmethod
    def from_weights(cls, weights, interval: Tuple[int, int]) -> "FuzzyPoint":
        """Build from exact fractions, or from floats whose compensated sum is 1 within 1e-12."""
        weights = list(weights)
        if all(isinstance(weight, (Fraction, int)) for weight in weights):
            return cls(weights=tuple(Fraction(weight) for weight in weights), interval=interval)
        floats = [float(weight) for weight in weights]
        if any(not np.isfinite(weight) for weight in floats):
            raise ValueError("membership weights must be finite")
        total = math.fsum(floats)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"membership weights must sum to 1, got {total:.17g}")
        exact = [Fraction(weight).limit_denominator(10 ** 12) for weight in floats]
        remainder = 1 - sum(exact, Fraction(0))
        if remainder:
            largest = max(range(len(exact)), key=lambda i: exact[i])
            exact[largest] += remainder
        return cls(weights=tuple(exact), interval=tuple(interval))

    @property
    def tolerance_scale(self) -> int:
        l, n = self.interval
        return n - l - 1

    def as_array(self) -> np.ndarray:
        return np.array([float(weight) for weight in self.weights])


class ContinuumFuzzyPoint(_ArrayModel):
    density: RealField

    @model_validator(mode="after")
    def _check_density(self) -> "ContinuumFuzzyPoint":
        self.density.as_density()
        return self


class PosetVerdict(BaseModel):
    ok: bool
    violation: Optional[Literal["contiguity", "transitivity", "exclusivity"]] = None
    row: Optional[int] = None
    column: Optional[int] = None
    detail: str = ""


# --- Topology ----------------------------------------------------------------

class SupportLabeling(_ArrayModel):
    labels: np.ndarray
    count: int
    masses: Tuple[float, ...]


class GridLoop(BaseModel):
    """Closed cycle of grid indices joined by axis-neighbour steps."""
    model_config = ConfigDict(frozen=True)

    points: Tuple[Tuple[int, ...], ...]

    @model_validator(mode="after")
    def _check_cycle(self) -> "GridLoop":
        if len(self.points) < 4:
            raise ValueError("a loop needs at least four points")
        if len(set(self.points)) != len(self.points):
            raise ValueError("loop must not intersect itself")
        ring = self.points + self.points[:1]
        for start, stop in zip(ring[:-1], ring[1:]):
            steps = [abs(a - b) for a, b in zip(start, stop)]
            if sorted(steps)[-1] != 1 or sum(steps) != 1:
                raise ValueError(f"loop step {start}->{stop} is not an axis-neighbour step")
        return self


class WindingResult(BaseModel):
    n_l: int
    circulation: float
    residual: float
    velocity_circulation: float


class WallstromReport(BaseModel):
    separation: float
    c_d: float
    t_overlap: Optional[float]
    t_final: float
    diff_before: float
    diff_after: float
    certified: bool


# --- Variational oracle ------------------------------------------------------

class BumpFamily(BaseModel):
    """Pair of compact test bumps; placements are start indices (1D) or centre indices (3D)."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["sin3-pair-1D", "cos3-sphere-pair-3D"]
    n: int = Field(..., ge=1)
    placements: Tuple[Tuple[int, ...], Tuple[int, ...]]
    grid: UniformGrid

    @model_validator(mode="after")
    def _check_kind(self) -> "BumpFamily":
        expected = 1 if self.kind == "sin3-pair-1D" else 3
        if self.grid.dim != expected:
            raise ValueError(f"{self.kind} needs a {expected}D grid")
        if any(len(p) != expected for p in self.placements):
            raise ValueError("placement dimension does not match the bump kind")
        return self


class DbrWitness(BaseModel):
    n: int
    placements: Tuple[Tuple[int, ...], Tuple[int, ...]]
    positions: Tuple[Tuple[float, ...], Tuple[float, ...]]
    value: float
    d1: float
    d2: float
    bound: float


class ConstancyVerdict(BaseModel):
    constant: bool
    max_abs_I: float
    witness: Optional[DbrWitness] = None

    @model_validator(mode="after")
    def _check_witness(self) -> "ConstancyVerdict":
        if self.constant == (self.witness is not None):
            raise ValueError("witness must be present exactly when constancy fails")
        return self


class SqrtVerdict(BaseModel):
    passed: bool
    norms: Tuple[float, ...]
    spread: float
    witness: Optional[Tuple[int, int]] = None


# --- Scenario configuration --------------------------------------------------

def _split_list(value: Any) -> Any:
    """Expand comma lists ('128,128') and wrap scalars."""
    if isinstance(value, str):
        return tuple(part.strip() for part in value.split(",") if part.strip())
    if isinstance(value, (int, float, bool)):
        return (value,)
    return value


IntList = Annotated[Tuple[int, ...], BeforeValidator(_split_list)]
FloatList = Annotated[Tuple[float, ...], BeforeValidator(_split_list)]
BoolList = Annotated[Tuple[bool, ...], BeforeValidator(_split_list)]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSection(_Section):
    dim: int = Field(1, ge=1, le=3)
    n: IntList
    length: FloatList
    periodic: BoolList = (True,)

    @model_validator(mode="after")
    def _broadcast(self) -> "GridSection":
        for name in ("n", "length", "periodic"):
            value = getattr(self, name)
            if len(value) == 1:
                setattr(self, name, value * self.dim)
            elif len(value) != self.dim:
                raise ValueError(f"grid.{name} needs 1 or {self.dim} entries")
        return self

    def to_grid(self) -> UniformGrid:
        return UniformGrid(dim=self.dim, n=self.n, length=self.length, periodic=self.periodic)


class ParticleSection(_Section):
    mu: float = Field(..., gt=0)


class PotentialSection(_Section):
    kind: Literal["free", "harmonic", "box", "file"] = "free"
    omega: float = Field(1.0, gt=0)
    x1: Optional[float] = None
    x2: Optional[float] = None
    path: Optional[str] = None

    @model_validator(mode="after")
    def _check_kind(self) -> "PotentialSection":
        if self.kind == "box" and (self.x1 is None or self.x2 is None or self.x1 >= self.x2):
            raise ValueError("box potential needs potential.x1 < potential.x2")
        if self.kind == "file" and not self.path:
            raise ValueError("file potential needs potential.path")
        return self


class InitialSection(_Section):
    kind: Literal["gaussian", "two-gaussian", "vortex", "eigenstate", "superposition"] = "gaussian"
    x0: FloatList = (0.0,)
    sigma: float = Field(1.0, gt=0)
    p0: FloatList = (0.0,)
    separation: float = Field(20.0, gt=0)
    c_d: float = 0.0
    charge: int = 1
    index: int = Field(0, ge=0)
    indices: IntList = (0, 1)


class EvolveSection(_Section):
    scheme: Literal["split-step-spectral", "crank-nicolson", "madelung-fd", "liouville-dense"] = "split-step-spectral"
    dt: float = Field(..., gt=0)
    steps: int = Field(..., ge=1)
    record_every: int = Field(1, ge=1)

    def to_config(self) -> EvolutionConfig:
        return EvolutionConfig(dt=self.dt, steps=self.steps, scheme=self.scheme,
                               record_every=self.record_every)


class OutputSection(_Section):
    path: str = "output"
    formats: Annotated[Tuple[Literal["csv", "checkpoint"], ...], BeforeValidator(_split_list)] = ("csv",)


class ScenarioConfig(BaseModel):
    """Resolved scenario; built from a flat ``section.key = value`` file."""
    grid: GridSection
    particle: ParticleSection
    potential: PotentialSection = Field(default_factory=PotentialSection)
    initial: InitialSection = Field(default_factory=InitialSection)
    evolve: EvolveSection
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _check_compatibility(self) -> "ScenarioConfig":
        bounded = self.potential.kind == "box" or not all(self.grid.periodic)
        if bounded and self.evolve.scheme in ("split-step-spectral", "madelung-fd"):
            raise ValueError(f"{self.evolve.scheme}: scheme incompatible with non-periodic boundary")
        if self.evolve.scheme == "liouville-dense" and int(np.prod(self.grid.n)) > 256:
            raise ValueError("liouville-dense needs at most 256 grid points")
        if self.initial.kind == "vortex" and self.grid.dim != 2:
            raise ValueError("vortex initial state needs grid.dim = 2")
        if self.initial.kind in ("eigenstate", "superposition") and self.potential.kind not in ("harmonic", "box"):
            raise ValueError("eigenstates need a harmonic or box potential")
        return self

    def resolved_lines(self) -> List[str]:
        lines = []
        for section, values in self.model_dump().items():
            for key, value in values.items():
                if value is None:
                    continue
                if isinstance(value, (tuple, list)):
                    value = ",".join(str(item).lower() if isinstance(item, bool) else str(item) for item in value)
                elif isinstance(value, bool):
                    value = str(value).lower()
                lines.append(f"{section}.{key} = {value}")
        return lines


class CheckpointData(_ArrayModel):
    grid: UniformGrid
    mu: float
    t: float
    w: np.ndarray
    gamma: Optional[np.ndarray] = None
    v: Optional[Tuple[np.ndarray, ...]] = None


class RunState(TypedDict, total=False):
    """The state object passed between nodes of the scenario graph."""
    # Inputs
    config_path: str
    mode: str  # "run" or "compare"

    # Resolved scenario
    config: ScenarioConfig
    hamiltonian: Hamiltonian
    initial: WaveState
    output_dir: str

    # Results
    rows: List[Dict[str, float]]
    checkpoints: List[str]
    report: Dict[str, Any]
    error: Optional[str]
    exit_code: int
