"""
FZM1 checkpoint files.

Layout (little-endian): magic "FZM1", version u16, dim u16, per-axis counts u32,
per-axis lengths f64, mu f64, t f64, flags u32, then float64 row-major payload:
w, gamma (full phase) when flag bit 0, velocity components when flag bit 1.
Flag bit 2 + a marks axis a periodic. The grid origin is the default -length/2.
"""

import os
import struct
from typing import Optional

import numpy as np

from .representations import wave_from_phase, wave_to_observational, wave_to_phase
from .schema import CheckpointData, PhaseState, RealField, UniformGrid, WaveState

MAGIC = b"FZM1"
VERSION = 1
HAS_GAMMA = 1
HAS_V = 2


def _header_format(dim: int) -> str:
    return f"<4sHH{dim}I{dim}dddI"


def write_checkpoint(path: str, data: CheckpointData) -> str:
    grid = data.grid
    if grid.origin is not None and any(
        abs(grid.origin[a] + 0.5 * grid.length[a]) > 1e-12 for a in range(grid.dim)
    ):
        raise ValueError("checkpoints store grids with the default centred origin only")
    flags = 0
    if data.gamma is not None:
        flags |= HAS_GAMMA
    if data.v is not None:
        flags |= HAS_V
    for a, periodic in enumerate(grid.periodic):
        if periodic:
            flags |= 1 << (2 + a)

    header = struct.pack(_header_format(grid.dim), MAGIC, VERSION, grid.dim,
                         *grid.n, *grid.length, data.mu, data.t, flags)
    arrays = [data.w]
    if data.gamma is not None:
        arrays.append(data.gamma)
    if data.v is not None:
        if len(data.v) != grid.dim:
            raise ValueError("checkpoint velocity needs one component per axis")
        arrays.extend(data.v)

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as file:
        file.write(header)
        for array in arrays:
            if np.shape(array) != grid.shape:
                raise ValueError(f"checkpoint array shape {np.shape(array)} does not match grid {grid.shape}")
            file.write(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return path


def read_checkpoint(path: str) -> CheckpointData:
    with open(path, "rb") as file:
        blob = file.read()
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise ValueError(f"{path} is not an FZM1 checkpoint")
    version, dim = struct.unpack_from("<HH", blob, 4)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    if not 1 <= dim <= 3:
        raise ValueError(f"invalid checkpoint dimension {dim}")
    header = struct.calcsize(_header_format(dim))
    if len(blob) < header:
        raise ValueError("truncated checkpoint header")
    fields = struct.unpack_from(_header_format(dim), blob, 0)
    counts = fields[3: 3 + dim]
    lengths = fields[3 + dim: 3 + 2 * dim]
    mu, t, flags = fields[3 + 2 * dim:]
    periodic = tuple(bool(flags & (1 << (2 + a))) for a in range(dim))
    grid = UniformGrid(dim=dim, n=tuple(counts), length=tuple(lengths), periodic=periodic)

    count = 1 + (1 if flags & HAS_GAMMA else 0) + (dim if flags & HAS_V else 0)
    payload = np.frombuffer(blob, dtype="<f8", offset=header)
    if payload.size != count * grid.size:
        raise ValueError(f"checkpoint payload holds {payload.size} values, expected {count * grid.size}")
    arrays = [payload[i * grid.size: (i + 1) * grid.size].reshape(grid.shape).astype(np.float64)
              for i in range(count)]
    w = arrays.pop(0)
    gamma = arrays.pop(0) if flags & HAS_GAMMA else None
    v = tuple(arrays) if flags & HAS_V else None
    return CheckpointData(grid=grid, mu=mu, t=t, w=w, gamma=gamma, v=v)


def checkpoint_from_wave(state: WaveState) -> CheckpointData:
    """w, the full unwrapped phase and the masked flow velocity of a wave state."""
    phase = wave_to_phase(state)
    observational = wave_to_observational(state)
    return CheckpointData(
        grid=state.grid,
        mu=state.mu,
        t=state.t,
        w=phase.w.values,
        gamma=phase.full_phase(),
        v=tuple(component.values for component in observational.v),
    )


def wave_from_checkpoint(data: CheckpointData, renormalize: Optional[bool] = True) -> WaveState:
    if data.gamma is None:
        raise ValueError("checkpoint has no phase; the wave state cannot be rebuilt")
    w = np.clip(data.w, 0.0, None)
    if renormalize:
        w = w / (np.sum(w) * data.grid.cell_volume)
    phase = PhaseState(
        w=RealField(grid=data.grid, values=w),
        gamma=RealField(grid=data.grid, values=data.gamma),
        mu=data.mu,
        t=data.t,
    )
    return wave_from_phase(phase)
