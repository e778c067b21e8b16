#!/usr/bin/env python3
"""
Command-line interface for the fuzzy-manifold simulator.
Exit codes: 0 ok, 1 invariant breach, 2 usage or config error.
"""
import argparse
import logging
import os
import sys
import traceback

from .checkpoint import read_checkpoint, wave_from_checkpoint
from .demos import DEMOS, run_demo
from .processors import ScenarioProcessor
from .runner import ScenarioRunner
from .schema import ConfigError, InvariantBreach, QuantizationError
from .topology import circle_loop, winding_number
from .variational import certify_constancy


def _parse_loop(text: str):
    try:
        cx, cy, r = (float(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"--loop expects cx,cy,r, got {text!r}")
    return (cx, cy), r


def _dbr(args) -> int:
    samples = ScenarioProcessor.load_samples(args.input, args.spacing)
    verdict = certify_constancy(samples, args.n_max)
    if verdict.constant:
        print(f"PASS(constancy): max |I| = {verdict.max_abs_I:.3e} over n = 1..{args.n_max}")
        return 0
    witness = verdict.witness
    print(f"FAIL(constancy): I = {witness.value:.6e} at n={witness.n}")
    print(f"  positive bump starts at x={witness.positions[0][0]:.6g} (index {witness.placements[0][0]})")
    print(f"  negative bump starts at x={witness.positions[1][0]:.6g} (index {witness.placements[1][0]})")
    print(f"  d1={witness.d1:.6g}, d2={witness.d2:.6g}, lower bound {witness.bound:.6e}")
    return 0


def _winding(args) -> int:
    data = read_checkpoint(args.checkpoint)
    if data.grid.dim != 2:
        raise ConfigError("winding needs a 2D checkpoint")
    state = wave_from_checkpoint(data)
    center, radius = _parse_loop(args.loop)
    loop = circle_loop(state.grid, center, radius)
    result = winding_number(state, loop)
    print(f"n_l = {result.n_l}")
    print(f"circulation = {result.circulation:.12g}, residual = {result.residual:.3e}")
    print(f"velocity circulation = {result.velocity_circulation:.12g}")
    return 0


def main(argv=None) -> int:
    """Main entry point"""
    parser = argparse.ArgumentParser(
        prog="fuzzmech",
        description="Fuzzy-manifold hydrodynamics: scenario runs, scheme comparison and demonstrations",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run a scenario file")
    run.add_argument("config", help="Path to the scenario file")
    run.add_argument("--out", help="Output directory (overrides output.path)")

    compare = commands.add_parser("compare", help="Compare madelung-fd against a Schrodinger scheme")
    compare.add_argument("config", help="Path to the scenario file")
    compare.add_argument("--out", help="Output directory (overrides output.path)")

    demo = commands.add_parser("demo", help="Run a named demonstration")
    demo.add_argument("name", choices=sorted(DEMOS))
    demo.add_argument("--out", default="output", help="Directory for the demo CSV files")

    dbr = commands.add_parser("dbr", help="Check whether sampled N(x) is constant")
    dbr.add_argument("--input", required=True, help="CSV with columns x,N or a single N column")
    dbr.add_argument("--spacing", type=float, help="Sample spacing for a single N column")
    dbr.add_argument("--n-max", type=int, default=8, help="Largest bump frequency")

    winding = commands.add_parser("winding", help="Winding number of a checkpointed 2D state")
    winding.add_argument("--checkpoint", required=True, help="FZM1 checkpoint file")
    winding.add_argument("--loop", required=True, help="Circle as cx,cy,r")

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2

    try:
        if args.command in ("run", "compare"):
            if not os.path.exists(args.config):
                print(f"Error: Scenario file not found: {args.config}")
                return 2
            runner = ScenarioRunner()
            method = runner.run if args.command == "run" else runner.compare
            result = method(args.config, output_dir=args.out)
            return int(result.get("exit_code", 1))
        if args.command == "demo":
            return 0 if run_demo(args.name, args.out) else 1
        if args.command == "dbr":
            return _dbr(args)
        return _winding(args)
    except ConfigError as e:
        print(f"Error: {str(e)}")
        return 2
    except (InvariantBreach, QuantizationError) as e:
        print(f"Error: {str(e)}")
        return 1
    except (ValueError, OSError) as e:
        print(f"Error: {str(e)}")
        return 2
    except Exception as e:
        print(f"Error: {str(e)}")
        logging.error(traceback.format_exc())
        return 1


if __name__ == "__main__":
    sys.exit(main())
