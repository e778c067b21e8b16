import os
import logging
import traceback
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from langgraph.graph import END, StateGraph

from .checkpoint import checkpoint_from_wave, write_checkpoint
from .dynamics import (
    evolve_density,
    evolve_phase,
    evolve_wave,
    madelung_step,
    schrodinger_step,
)
from .grid import diagnostics
from .processors import ScenarioProcessor
from .representations import density_matrix_from_wave, wave_to_phase
from .schema import (
    ComplexField,
    CompareReport,
    ConfigError,
    DensityMatrix,
    EvolutionConfig,
    Hamiltonian,
    InvariantBreach,
    NodeFormationError,
    PhaseState,
    RealField,
    RunState,
    WaveState,
)
from .topology import label_components

COMPARE_TOL = 1e-4


def build_run_graph():
    """
    Build the LangGraph workflow for one scenario.

    The graph has four nodes:
    1. load_scenario: Reads and validates the scenario file
    2. prepare_state: Builds the Hamiltonian and initial wave state
    3. evolve: Runs the configured scheme (or the scheme comparison)
    4. write_outputs: Writes series.csv or compare.csv

    Returns:
        A compiled StateGraph
    """
    workflow = StateGraph(RunState)

    workflow.add_node("load_scenario", ScenarioProcessor.load_scenario)
    workflow.add_node("prepare_state", prepare_state)
    workflow.add_node("evolve", evolve)
    workflow.add_node("write_outputs", write_outputs)

    # config errors stop the pipeline; invariant breaches still write what was recorded
    workflow.add_conditional_edges("load_scenario", _continue_or_stop, {"continue": "prepare_state", "stop": END})
    workflow.add_conditional_edges("prepare_state", _continue_or_stop, {"continue": "evolve", "stop": END})
    workflow.add_conditional_edges("evolve", _continue_or_stop, {"continue": "write_outputs", "stop": END})
    workflow.add_edge("write_outputs", END)

    workflow.set_entry_point("load_scenario")
    return workflow.compile()


def _continue_or_stop(state: RunState) -> str:
    if state.get("exit_code") == 2:
        return "stop"
    if state.get("error") and not state.get("rows"):
        return "stop"
    return "continue"


def prepare_state(state: RunState) -> RunState:
    try:
        hamiltonian, initial = ScenarioProcessor.prepare(state["config"])
        print(f"Prepared {initial.grid.dim}D grid with {initial.grid.size} points")
        return {**state, "hamiltonian": hamiltonian, "initial": initial}
    except ConfigError as e:
        logging.error(f"Scenario error: {str(e)}")
        return {**state, "error": str(e), "exit_code": 2}
    except Exception as e:
        logging.error(f"Error in prepare_state: {str(e)}")
        logging.error(traceback.format_exc())
        return {**state, "error": f"Error preparing scenario: {str(e)}", "exit_code": 2}


def _series_row(eta: ComplexField, t: float, H: Hamiltonian) -> Dict[str, float]:
    """One series.csv row from an amplitude that need not be exactly normalized."""
    grid = eta.grid
    report = diagnostics(eta, H)
    row: Dict[str, float] = {"t": t, "norm": report.norm}
    for a in range(grid.dim):
        row[f"mean_x_{a}"] = report.mean_x[a]
    row["sigma_x"] = report.sigma_x
    for a in range(grid.dim):
        row[f"mean_p_{a}"] = report.mean_p[a]
    row["energy"] = report.energy
    row["continuity_residual"] = report.continuity_residual
    w = np.abs(eta.values) ** 2
    row["n_components"] = label_components(RealField(grid=grid, values=w)).count
    return row


def _phase_amplitude(s: PhaseState) -> ComplexField:
    values = np.sqrt(np.clip(s.w.values, 0.0, None)) * np.exp(1j * s.full_phase())
    return ComplexField(grid=s.w.grid, values=values)


def _leading_amplitude(rho: DensityMatrix) -> ComplexField:
    """sqrt(lambda) u for the leading eigenpair; exact for a pure kernel."""
    eigenvalues, eigenvectors = np.linalg.eigh(np.asarray(rho.rho))
    values = np.sqrt(max(float(eigenvalues[-1]), 0.0)) * eigenvectors[:, -1]
    return ComplexField(grid=rho.grid, values=values.reshape(rho.grid.shape))


def _run_scheme(state: RunState, rows: List[Dict[str, float]], checkpoints: List[str]) -> None:
    config = state["config"]
    H: Hamiltonian = state["hamiltonian"]
    initial: WaveState = state["initial"]
    cfg = config.evolve.to_config()
    write_checkpoints = "checkpoint" in config.output.formats
    output_dir = state["output_dir"]

    def save(step: int, wave: Optional[WaveState]) -> None:
        if write_checkpoints and wave is not None:
            path = os.path.join(output_dir, f"checkpoint_{step}.fzm")
            checkpoints.append(write_checkpoint(path, checkpoint_from_wave(wave)))

    if cfg.scheme in ("split-step-spectral", "crank-nicolson"):
        def record_wave(step: int, s: WaveState) -> None:
            rows.append(_series_row(s.eta, s.t, H))
            save(step, s)

        evolve_wave(initial, H, cfg, record_wave)

    elif cfg.scheme == "madelung-fd":
        def record_phase(step: int, s: PhaseState) -> None:
            eta = _phase_amplitude(s)
            rows.append(_series_row(eta, s.t, H))
            norm = eta.norm()
            save(step, WaveState(eta=ComplexField(grid=eta.grid, values=eta.values / np.sqrt(norm)),
                                 mu=s.mu, t=s.t))

        evolve_phase(wave_to_phase(initial), H, cfg, record_phase)

    else:
        def record_density(step: int, rho: DensityMatrix) -> None:
            eta = _leading_amplitude(rho)
            rows.append(_series_row(eta, rho.t, H))

        evolve_density(density_matrix_from_wave(initial), H, cfg, record_density)


def _gaps(first: np.ndarray, second: np.ndarray, cell_volume: float):
    gap = np.abs(first - second)
    return float(np.sqrt(np.sum(gap ** 2) * cell_volume)), float(np.max(gap))


def compare_schemes(initial: WaveState, H: Hamiltonian, cfg: EvolutionConfig) -> CompareReport:
    """
    Evolve the same data with madelung-fd and a Schrodinger scheme in lockstep.

    Args:
        initial: Wave state providing both initial conditions
        H: Derived Hamiltonian on a periodic grid
        cfg: Evolution settings; a madelung or liouville scheme falls back to split-step

    Returns:
        CompareReport with L2 and Linf density gaps at every recorded time
    """
    scheme = cfg.scheme if cfg.scheme in ("split-step-spectral", "crank-nicolson") else "split-step-spectral"
    wave_cfg = cfg.model_copy(update={"scheme": scheme})
    phase_cfg = cfg.model_copy(update={"scheme": "madelung-fd"})
    grid = initial.grid

    wave, phase = initial, wave_to_phase(initial)
    times, l2_gaps, linf_gaps = [initial.t], [0.0], [0.0]
    halted_at = None
    for step in range(1, cfg.steps + 1):
        wave = schrodinger_step(wave, H, wave_cfg)
        try:
            phase = madelung_step(phase, H, phase_cfg)
        except NodeFormationError as e:
            halted_at = e.t
            logging.warning(f"Madelung scheme halted: {str(e)}")
            break
        if step % cfg.record_every == 0 or step == cfg.steps:
            l2, linf = _gaps(phase.w.values, wave.density(), grid.cell_volume)
            times.append(wave.t)
            l2_gaps.append(l2)
            linf_gaps.append(linf)

    if halted_at is not None:
        return CompareReport(times=tuple(times), l2_gaps=tuple(l2_gaps), linf_gaps=tuple(linf_gaps),
                             passed=False, halted_at=halted_at,
                             message=f"madelung halted at t={halted_at:.17g}")
    passed = l2_gaps[-1] < COMPARE_TOL
    verdict = "PASS" if passed else "FAIL"
    return CompareReport(times=tuple(times), l2_gaps=tuple(l2_gaps), linf_gaps=tuple(linf_gaps),
                         passed=passed, message=f"{verdict}: final L2 gap {l2_gaps[-1]:.3e} (tolerance {COMPARE_TOL:g})")


def evolve(state: RunState) -> RunState:
    """
    Graph node: run the scheme or the comparison.

    Invariant breaches keep the rows recorded so far and set exit code 1.
    """
    rows: List[Dict[str, float]] = []
    checkpoints: List[str] = []
    try:
        if state.get("mode") == "compare":
            config = state["config"]
            try:
                report = compare_schemes(state["initial"], state["hamiltonian"], config.evolve.to_config())
            except ConfigError:
                raise
            except ValueError as e:
                raise ConfigError(str(e))
            print(report.message)
            return {**state, "report": report.model_dump(), "exit_code": 0}
        _run_scheme(state, rows, checkpoints)
        print(f"Recorded {len(rows)} rows")
        return {**state, "rows": rows, "checkpoints": checkpoints, "exit_code": 0}
    except InvariantBreach as e:
        logging.error(f"Invariant breach: {str(e)}")
        return {**state, "rows": rows, "checkpoints": checkpoints, "error": str(e), "exit_code": 1}
    except ConfigError as e:
        logging.error(f"Scenario error: {str(e)}")
        return {**state, "rows": rows, "error": str(e), "exit_code": 2}
    except Exception as e:
        logging.error(f"Error in evolve: {str(e)}")
        logging.error(traceback.format_exc())
        return {**state, "rows": rows, "checkpoints": checkpoints, "error": f"Error evolving: {str(e)}",
                "exit_code": 1}


def _write_csv(path: str, frame: pd.DataFrame, header_lines: List[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as file:
        for line in header_lines:
            file.write(f"# {line}\n")
        frame.to_csv(file, index=False, float_format="%.17g")


def write_outputs(state: RunState) -> RunState:
    """Graph node: write series.csv (run) or compare.csv (compare) under the output directory."""
    try:
        output_dir = state["output_dir"]
        os.makedirs(output_dir, exist_ok=True)
        header = state["config"].resolved_lines()
        if state.get("mode") == "compare":
            report = state["report"]
            frame = pd.DataFrame({"t": report["times"], "l2_gap": report["l2_gaps"], "linf_gap": report["linf_gaps"]})
            path = os.path.join(output_dir, "compare.csv")
            _write_csv(path, frame, header + [report["message"]])
        else:
            frame = pd.DataFrame(state.get("rows", []))
            if not frame.empty:
                frame["n_components"] = frame["n_components"].astype(int)
            path = os.path.join(output_dir, "series.csv")
            _write_csv(path, frame, header)
        print(f"Wrote {path}")
        return state
    except Exception as e:
        logging.error(f"Error in write_outputs: {str(e)}")
        logging.error(traceback.format_exc())
        return {**state, "error": f"Error writing outputs: {str(e)}", "exit_code": state.get("exit_code") or 1}


class ScenarioRunner:
    """Runs scenario files through the graph, one scenario per call."""

    def __init__(self):
        self.graph = build_run_graph()

    def _invoke(self, config_path: str, mode: str, output_dir: Optional[str]) -> Dict[str, Any]:
        state: RunState = {
            "config_path": config_path,
            "mode": mode,
            "output_dir": output_dir,
            "rows": [],
            "checkpoints": [],
            "report": {},
            "error": None,
            "exit_code": 0,
        }
        try:
            result = self.graph.invoke(state, {"recursion_limit": 50})
        except Exception as e:
            logging.error(f"Error running scenario graph: {str(e)}")
            logging.error(traceback.format_exc())
            return {**state, "error": str(e), "exit_code": 1}
        if result.get("error"):
            print(f"Error: {result['error']}")
        return result

    def run(self, config_path: str, output_dir: Optional[str] = None) -> Dict[str, Any]:
        """
        Run a scenario.

        Args:
            config_path: Path to the scenario file
            output_dir: Overrides output.path when given

        Returns:
            Final run state; exit_code is 0, 1 (invariant breach) or 2 (config error)
        """
        return self._invoke(config_path, "run", output_dir)

    def compare(self, config_path: str, output_dir: Optional[str] = None) -> Dict[str, Any]:
        return self._invoke(config_path, "compare", output_dir)
