import numpy as np
import pandas as pd
import pytest

from fuzzmech.__main__ import main
from fuzzmech.checkpoint import (
    checkpoint_from_wave,
    read_checkpoint,
    wave_from_checkpoint,
    write_checkpoint,
)
from fuzzmech.processors import ScenarioProcessor
from fuzzmech.schema import CheckpointData, ConfigError, UniformGrid
from fuzzmech.topology import vortex_state

FREE_SCENARIO = """\
# free packet
grid.n = 128
grid.length = 20
particle.mu = 1
initial.kind = gaussian
initial.p0 = 0.5
evolve.scheme = split-step-spectral
evolve.dt = 0.01
evolve.steps = 20
evolve.record_every = 5
"""


def write_scenario(tmp_path, text, name="scenario.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_config_fills_defaults_and_broadcasts_lists():
    config = ScenarioProcessor.config_from_text(
        "grid.dim = 2\ngrid.n = 32, 16\ngrid.length = 8\nparticle.mu = 2\nevolve.dt = 0.1\nevolve.steps = 3\n"
    )
    grid = config.grid.to_grid()
    assert grid.n == (32, 16)
    assert grid.length == (8.0, 8.0)
    assert config.potential.kind == "free"
    assert config.output.formats == ("csv",)
    assert "grid.periodic = true,true" in config.resolved_lines()


def test_config_reports_missing_key():
    with pytest.raises(ConfigError, match="missing key particle.mu"):
        ScenarioProcessor.config_from_text("grid.n = 64\ngrid.length = 10\nevolve.dt = 0.1\nevolve.steps = 1\n")


def test_config_reports_lines_of_bad_entries():
    with pytest.raises(ConfigError) as error:
        ScenarioProcessor.config_from_text(FREE_SCENARIO + "solver.tolerance = 1\n")
    assert error.value.line == 11
    assert "unknown section" in str(error.value)

    with pytest.raises(ConfigError) as error:
        ScenarioProcessor.config_from_text(FREE_SCENARIO.replace("evolve.dt = 0.01", "evolve.dt = -1"))
    assert error.value.line == 8
    assert error.value.key == "evolve.dt"

    with pytest.raises(ConfigError) as error:
        ScenarioProcessor.config_from_text(FREE_SCENARIO + "grid.n = 64\n")
    assert "duplicate key" in str(error.value)

    with pytest.raises(ConfigError) as error:
        ScenarioProcessor.config_from_text("grid.n 64\n")
    assert error.value.line == 1


def test_config_rejects_spectral_scheme_on_bounded_grid():
    text = FREE_SCENARIO + "grid.periodic = false\n"
    with pytest.raises(ConfigError, match="scheme incompatible with non-periodic boundary"):
        ScenarioProcessor.config_from_text(text)


def test_run_writes_series_with_resolved_config(tmp_path):
    path = write_scenario(tmp_path, FREE_SCENARIO)
    out = tmp_path / "out"
    assert main(["run", path, "--out", str(out)]) == 0

    text = (out / "series.csv").read_text(encoding="utf-8")
    assert text.startswith("# grid.dim = 1\n")
    assert "# evolve.scheme = split-step-spectral" in text
    frame = pd.read_csv(out / "series.csv", comment="#")
    assert list(frame["t"]) == pytest.approx([0.0, 0.05, 0.1, 0.15, 0.2])
    assert np.all(np.abs(frame["norm"] - 1.0) < 1e-10)
    assert frame["mean_p_0"].iloc[-1] == pytest.approx(0.5, abs=1e-8)
    assert set(frame["n_components"]) == {1}


def test_compare_writes_gap_table(tmp_path):
    text = FREE_SCENARIO.replace("grid.n = 128", "grid.n = 256").replace("evolve.dt = 0.01", "evolve.dt = 0.005")
    path = write_scenario(tmp_path, text)
    out = tmp_path / "out"
    assert main(["compare", path, "--out", str(out)]) == 0

    lines = (out / "compare.csv").read_text(encoding="utf-8").splitlines()
    assert any(line.startswith("# PASS: final L2 gap") for line in lines)
    frame = pd.read_csv(out / "compare.csv", comment="#")
    assert list(frame.columns) == ["t", "l2_gap", "linf_gap"]
    assert frame["l2_gap"].iloc[0] == 0.0
    assert frame["l2_gap"].iloc[-1] < 1e-4


def test_madelung_run_through_a_node_exits_one(tmp_path):
    text = """\
grid.n = 256
grid.length = 20
particle.mu = 1
potential.kind = harmonic
initial.kind = superposition
initial.indices = 0,1
evolve.scheme = madelung-fd
evolve.dt = 0.005
evolve.steps = 10
"""
    path = write_scenario(tmp_path, text)
    assert main(["run", path, "--out", str(tmp_path / "out")]) == 1


def test_usage_and_config_errors_exit_two(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.txt")]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["demo", "unknown-demo"]) == 2
    bad = write_scenario(tmp_path, "grid.n = 64\n")
    assert main(["run", bad, "--out", str(tmp_path / "out")]) == 2
    assert "Error" in capsys.readouterr().out


def test_help_exits_zero():
    assert main(["--help"]) == 0


def test_checkpoint_round_trip(tmp_path, plane_grid):
    state = vortex_state(plane_grid, 1)
    path = write_checkpoint(str(tmp_path / "state.fzm"), checkpoint_from_wave(state))
    data = read_checkpoint(path)
    assert data.grid == plane_grid
    assert data.mu == state.mu
    assert data.gamma is not None and len(data.v) == 2
    assert np.array_equal(data.w, state.density())
    rebuilt = wave_from_checkpoint(data)
    assert np.max(np.abs(rebuilt.eta.values - state.eta.values)) < 1e-12


def test_checkpoint_rejects_foreign_files(tmp_path, line_grid):
    path = tmp_path / "junk.fzm"
    path.write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(ValueError):
        read_checkpoint(str(path))

    shifted = UniformGrid.build(n=256, length=20.0, origin=0.0)
    data = CheckpointData(grid=shifted, mu=1.0, t=0.0, w=np.ones(shifted.shape) / 20.0)
    with pytest.raises(ValueError):
        write_checkpoint(str(tmp_path / "shifted.fzm"), data)

    no_phase = CheckpointData(grid=line_grid, mu=1.0, t=0.0, w=np.ones(line_grid.shape) / 20.0)
    written = write_checkpoint(str(tmp_path / "density.fzm"), no_phase)
    with pytest.raises(ValueError):
        wave_from_checkpoint(read_checkpoint(written))


def test_run_checkpoints_feed_the_winding_command(tmp_path, capsys):
    text = """\
grid.dim = 2
grid.n = 64
grid.length = 12
particle.mu = 1
initial.kind = vortex
initial.charge = 1
evolve.dt = 0.001
evolve.steps = 2
evolve.record_every = 2
output.formats = csv,checkpoint
"""
    path = write_scenario(tmp_path, text)
    out = tmp_path / "out"
    assert main(["run", path, "--out", str(out)]) == 0
    assert (out / "checkpoint_0.fzm").exists()
    assert (out / "checkpoint_2.fzm").exists()
    capsys.readouterr()

    assert main(["winding", "--checkpoint", str(out / "checkpoint_2.fzm"), "--loop", "0,0,1.5"]) == 0
    assert "n_l = 1" in capsys.readouterr().out
    assert main(["winding", "--checkpoint", str(out / "checkpoint_2.fzm"), "--loop", "0,0"]) == 2


def test_dbr_command_reports_both_verdicts(tmp_path, capsys):
    x = 0.0125 + 0.025 * np.arange(400)
    linear = tmp_path / "linear.csv"
    pd.DataFrame({"x": x, "N": x}).to_csv(linear, index=False)
    assert main(["dbr", "--input", str(linear)]) == 0
    output = capsys.readouterr().out
    assert output.startswith("FAIL(constancy)")
    assert "lower bound" in output

    flat = tmp_path / "flat.csv"
    pd.DataFrame({"N": np.full(400, 2.0)}).to_csv(flat, index=False)
    assert main(["dbr", "--input", str(flat), "--spacing", "0.025"]) == 0
    assert capsys.readouterr().out.startswith("PASS(constancy)")
    assert main(["dbr", "--input", str(flat)]) == 2


def test_potential_file_is_interpolated_onto_the_grid(tmp_path, line_grid):
    samples = np.linspace(-11.0, 11.0, 45)
    path = tmp_path / "potential.txt"
    path.write_text("# sampled ramp\nx U\n" + "".join(f"{x:.6f} {2.0 * x + 1.0:.6f}\n" for x in samples),
                    encoding="utf-8")
    U = ScenarioProcessor.load_potential_file(str(path), line_grid)
    x = line_grid.coordinates()[0]
    assert np.max(np.abs(U.values - (2.0 * x + 1.0))) < 1e-9

    curved = tmp_path / "harmonic.csv"
    pd.DataFrame({"x": samples, "U": 0.5 * samples ** 2}).to_csv(curved, index=False)
    text = FREE_SCENARIO + f"potential.kind = file\npotential.path = {curved}\n"
    H = ScenarioProcessor.build_hamiltonian(ScenarioProcessor.config_from_text(text))
    x = H.grid.coordinates()[0]
    # linear interpolation of x^2/2 between samples 0.5 apart
    assert np.max(np.abs(H.potential.values - 0.5 * x ** 2)) <= 0.5 ** 2 / 8.0 + 1e-12


def test_potential_file_must_cover_the_grid(tmp_path, line_grid):
    short = tmp_path / "short.csv"
    pd.DataFrame({"x": np.linspace(-5.0, 5.0, 11), "U": np.zeros(11)}).to_csv(short, index=False)
    with pytest.raises(ConfigError, match="covers"):
        ScenarioProcessor.load_potential_file(str(short), line_grid)

    unordered = tmp_path / "unordered.csv"
    pd.DataFrame({"x": [-12.0, 3.0, 1.0, 12.0], "U": np.zeros(4)}).to_csv(unordered, index=False)
    with pytest.raises(ConfigError, match="increase"):
        ScenarioProcessor.load_potential_file(str(unordered), line_grid)

    three = tmp_path / "three.csv"
    pd.DataFrame({"x": [-12.0, 12.0], "U": [0.0, 0.0], "V": [1.0, 1.0]}).to_csv(three, index=False)
    with pytest.raises(ConfigError, match="two columns"):
        ScenarioProcessor.load_potential_file(str(three), line_grid)

    text = FREE_SCENARIO + f"potential.kind = file\npotential.path = {short}\n"
    path = write_scenario(tmp_path, text)
    assert main(["run", path, "--out", str(tmp_path / "out")]) == 2
