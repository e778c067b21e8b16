import os
import logging
import traceback
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .dynamics import box_eigenstate, box_mask, harmonic_eigenstate
from .grid import as_tuple, gaussian_amplitude
from .schema import (
    ComplexField,
    ConfigError,
    Hamiltonian,
    RealField,
    RunState,
    ScenarioConfig,
    UniformGrid,
    WaveState,
)
from .topology import two_gaussian_state, vortex_state


class ScenarioProcessor:
    """
    Turns scenario files and sampled inputs into validated domain objects.
    Scenario files are flat ``section.key = value`` text; ``#`` starts a comment.
    """

    @staticmethod
    def load_scenario(state: RunState) -> RunState:
        """
        Graph node: read and validate the scenario named in the state.

        Args:
            state: Run state holding config_path

        Returns:
            Updated state with the resolved config, or error and exit code 2
        """
        try:
            config_path = state.get("config_path")
            if not config_path:
                raise ConfigError("No scenario file provided")
            print(f"Loading scenario: {config_path}")
            config = ScenarioProcessor.load_config(config_path)
            output_dir = state.get("output_dir") or config.output.path
            return {**state, "config": config, "output_dir": output_dir}
        except ConfigError as e:
            logging.error(f"Scenario error: {str(e)}")
            return {**state, "error": str(e), "exit_code": 2}
        except Exception as e:
            logging.error(f"Error in load_scenario: {str(e)}")
            logging.error(traceback.format_exc())
            return {**state, "error": f"Error loading scenario: {str(e)}", "exit_code": 2}

    @staticmethod
    def parse_flat_config(text: str) -> Tuple[Dict[str, Dict[str, str]], Dict[str, int]]:
        """
        Tokenize ``section.key = value`` lines.

        Returns:
            (nested sections, line number of every dotted key)
        """
        sections: Dict[str, Dict[str, str]] = {}
        lines: Dict[str, int] = {}
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].rstrip()
            if not line.strip():
                continue
            if "=" not in line:
                raise ConfigError("expected 'section.key = value'", line=number, column=len(line) + 1)
            key, value = line.split("=", 1)
            dotted = key.strip()
            column = len(key) - len(key.lstrip()) + 1
            if dotted.count(".") != 1 or not all(part.strip() for part in dotted.split(".")):
                raise ConfigError(f"key {dotted!r} must have the form section.key", line=number, column=column)
            value = value.strip()
            if not value:
                raise ConfigError(f"missing value for {dotted}", line=number, column=line.index("=") + 2, key=dotted)
            if dotted in lines:
                raise ConfigError(f"duplicate key {dotted} (first set on line {lines[dotted]})",
                                  line=number, column=column, key=dotted)
            section, name = (part.strip() for part in dotted.split("."))
            sections.setdefault(section, {})[name] = value
            lines[dotted] = number
        return sections, lines

    @staticmethod
    def load_config(path: str) -> ScenarioConfig:
        if not os.path.exists(path):
            raise ConfigError(f"Scenario file not found: {path}")
        with open(path, "r", encoding="utf-8") as file:
            text = file.read()
        return ScenarioProcessor.config_from_text(text)

    @staticmethod
    def config_from_text(text: str) -> ScenarioConfig:
        sections, lines = ScenarioProcessor.parse_flat_config(text)
        unknown = sorted(set(sections) - set(ScenarioConfig.model_fields))
        if unknown:
            first = min((key for key in lines if key.split(".")[0] in unknown), key=lines.get)
            raise ConfigError(f"unknown section {unknown[0]!r}", line=lines[first], column=1, key=first)
        for name in ScenarioConfig.model_fields:
            sections.setdefault(name, {})
        try:
            return ScenarioConfig.model_validate(sections)
        except ValidationError as e:
            raise ScenarioProcessor._config_error(e, lines)

    @staticmethod
    def _config_error(error: ValidationError, lines: Dict[str, int]) -> ConfigError:
        """Report the first validation problem by its dotted key."""
        detail = error.errors()[0]
        location = [str(part) for part in detail["loc"] if not isinstance(part, int)]
        dotted = ".".join(location[:2])
        message = detail["msg"].removeprefix("Value error, ")
        if detail["type"] == "missing":
            return ConfigError(f"missing key {dotted}", key=dotted)
        if detail["type"] == "extra_forbidden":
            return ConfigError(f"unknown key {dotted}", line=lines.get(dotted), key=dotted)
        if dotted:
            return ConfigError(f"{dotted}: {message}", line=lines.get(dotted), key=dotted)
        return ConfigError(message)

    @staticmethod
    def load_potential_file(path: str, grid: UniformGrid) -> RealField:
        """
        Read a potential from two-column sampled text and interpolate it onto the grid.

        Columns are x and U, separated by commas or whitespace; ``#`` starts a
        comment and a non-numeric header row is skipped. x must increase
        strictly and cover every grid coordinate.

        Args:
            path: Path to the sampled potential
            grid: 1D grid to interpolate onto

        Returns:
            U linearly interpolated at the grid coordinates
        """
        if grid.dim != 1:
            raise ConfigError("potential files describe 1D potentials")
        try:
            frame = pd.read_csv(path, comment="#", sep=r"[\s,]+", engine="python", header=None)
        except Exception as e:
            raise ConfigError(f"Error reading potential file {path}: {str(e)}")
        frame = frame.apply(pd.to_numeric, errors="coerce").dropna(how="all")
        if frame.shape[1] != 2 or len(frame) < 2:
            raise ConfigError(f"potential file {path} needs two columns x, U and at least two rows")
        samples = frame.to_numpy(dtype=float)
        if not np.all(np.isfinite(samples)):
            raise ConfigError("potential file contains non-finite values")
        x, u = samples[:, 0], samples[:, 1]
        if np.any(np.diff(x) <= 0):
            raise ConfigError("potential file x column must increase strictly")
        coordinates = grid.coordinates()[0]
        if x[0] > coordinates[0] or x[-1] < coordinates[-1]:
            raise ConfigError(f"potential file covers [{x[0]:g}, {x[-1]:g}], grid needs "
                              f"[{coordinates[0]:g}, {coordinates[-1]:g}]")
        return RealField(grid=grid, values=np.interp(coordinates, x, u))

    @staticmethod
    def load_samples(path: str, spacing: Optional[float] = None) -> RealField:
        """
        Read 1D samples of N for the constancy oracle.

        Args:
            path: CSV with columns x,N or a single N column
            spacing: Sample spacing, required for a single N column

        Returns:
            N as a field on a cell-centred, non-periodic 1D grid
        """
        try:
            frame = pd.read_csv(path, comment="#")
        except Exception as e:
            raise ConfigError(f"Error reading samples {path}: {str(e)}")
        if "N" not in frame.columns:
            raise ConfigError(f"samples file {path} needs an N column")
        values = frame["N"].to_numpy(dtype=float)
        if values.size < 8:
            raise ConfigError("need at least 8 samples")
        if "x" in frame.columns:
            x = frame["x"].to_numpy(dtype=float)
            steps = np.diff(x)
            spacing = float(np.mean(steps))
            if spacing <= 0 or np.max(np.abs(steps - spacing)) > 1e-9 * max(1.0, abs(spacing)):
                raise ConfigError("x column must be uniformly increasing")
            origin = float(x[0]) - 0.5 * spacing
        elif spacing is None or spacing <= 0:
            raise ConfigError("a single N column needs a positive --spacing")
        else:
            origin = 0.0
        grid = UniformGrid(dim=1, n=(values.size,), length=(values.size * spacing,),
                           periodic=(False,), origin=(origin,))
        return RealField(grid=grid, values=values)

    @staticmethod
    def build_hamiltonian(config: ScenarioConfig) -> Hamiltonian:
        grid = config.grid.to_grid()
        mu = config.particle.mu
        potential = config.potential
        if potential.kind == "free":
            return Hamiltonian.free(mu, grid)
        if potential.kind == "harmonic":
            r2 = sum(axis ** 2 for axis in grid.coordinates())
            values = 0.5 * mu * potential.omega ** 2 * r2
            return Hamiltonian(mu=mu, potential=RealField(grid=grid, values=values))
        if potential.kind == "box":
            return Hamiltonian.free(mu, grid, dirichlet_mask=box_mask(grid, potential.x1, potential.x2))
        return Hamiltonian(mu=mu, potential=ScenarioProcessor.load_potential_file(potential.path, grid))

    @staticmethod
    def build_initial_state(config: ScenarioConfig) -> WaveState:
        grid = config.grid.to_grid()
        mu = config.particle.mu
        initial = config.initial
        potential = config.potential
        dim = grid.dim

        if initial.kind == "gaussian":
            values = gaussian_amplitude(grid, as_tuple(initial.x0, dim), initial.sigma, as_tuple(initial.p0, dim))
            return WaveState(eta=ComplexField(grid=grid, values=values), mu=mu)
        if initial.kind == "two-gaussian":
            return two_gaussian_state(grid, initial.separation, initial.c_d, mu, initial.sigma)
        if initial.kind == "vortex":
            return vortex_state(grid, initial.charge, as_tuple(initial.x0, dim), mu, initial.sigma)

        def eigenstate(index: int) -> WaveState:
            if potential.kind == "harmonic":
                return harmonic_eigenstate(index, grid, mu, potential.omega)
            return box_eigenstate(index, grid, potential.x1, potential.x2, mu)

        if initial.kind == "eigenstate":
            return eigenstate(initial.index)
        values = sum(eigenstate(index).eta.values for index in initial.indices)
        values = values / np.sqrt(np.sum(np.abs(values) ** 2) * grid.cell_volume)
        return WaveState(eta=ComplexField(grid=grid, values=values), mu=mu)

    @staticmethod
    def prepare(config: ScenarioConfig) -> Tuple[Hamiltonian, WaveState]:
        """Build the Hamiltonian and initial state, reporting construction problems as config errors."""
        try:
            return ScenarioProcessor.build_hamiltonian(config), ScenarioProcessor.build_initial_state(config)
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"cannot build scenario: {str(e)}")
