"""Command-line entry point: ``fsiprecond {table,theory,evolve,mesh}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import bench
from .fsisystem import MeshTanglingError
from .meshkit import GEOMETRIES


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _strs(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--geometry", choices=GEOMETRIES)
    common.add_argument("--levels", type=_ints, help="comma-separated refinement levels")
    common.add_argument("--dt", type=_floats, dest="dts", help="comma-separated time steps")
    common.add_argument("--density-ratios", type=_floats, dest="density_ratios")
    common.add_argument("--precond", type=_strs, dest="preconditioners", help="subset of M1,M2,M3,SC")
    common.add_argument("--tol", type=float)
    common.add_argument("--max-iter", type=int, dest="max_iter")
    common.add_argument("--out")
    common.add_argument("--serial", action="store_true", default=None, help="run sweep cells in order")
    common.add_argument("--steps", type=int)
    common.add_argument("--inflow", type=float, dest="inflow_peak", help="peak inflow velocity")
    common.add_argument("--solve-step", type=int, dest="solve_step",
                        help="report the solve of this step instead of the first")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fsiprecond", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("table", parents=[common], help="iteration-count tables")
    sub.add_parser("theory", parents=[common], help="inf-sup, spectrum and norm identity checks")
    sub.add_parser("evolve", parents=[common], help="run the time loop and write checkpoints")
    sub.add_parser("mesh", parents=[common], help="export meshes")
    return parser


def config_from_args(args) -> bench.BenchConfig:
    config = bench.load_config(args.config) if args.config else bench.BenchConfig()
    updates = {}
    for name in ("geometry", "levels", "dts", "density_ratios", "preconditioners", "tol", "max_iter", "out",
                 "steps", "inflow_peak", "solve_step"):
        val = getattr(args, name, None)
        if val is not None:
            updates[name] = val
    if args.serial is not None:
        updates["serial"] = True
    elif not args.config:
        updates["serial"] = False
    return replace(config, **updates)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = config_from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "table":
        table = bench.run_iteration_table(config)
        csv_path, _ = table.write(config.out)
        print(table.to_text(), end="")
        print(f"wrote {csv_path}")
        return 0
    if args.command == "theory":
        bundle = bench.run_theory_suite(config)
        bundle.write(config.out)
        print(bundle.summary(), end="")
        return 0 if bundle.passed else 1
    if args.command == "evolve":
        try:
            result = bench.run_time_evolution(config)
        except MeshTanglingError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 3
        failed = sum(not rep.converged for rep in result.reports)
        print(f"{len(result.checkpoints)} steps written to {result.out_dir}; {failed} unconverged solves")
        return 0
    paths = bench.export_meshes(config)
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
