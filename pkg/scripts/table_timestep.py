"""Iteration counts of M1, M2, M3 and SC over time steps (density ratio 10).

    python3 scripts/table_timestep.py --levels 0,1,2 --out out/timestep
"""
import argparse

from fsiprecond.bench import BenchConfig, run_iteration_table


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--geometry", default="cavity_halves")
    ap.add_argument("--levels", default="0,1,2")
    ap.add_argument("--dt", default="1e-2,1e-3,1e-4")
    ap.add_argument("--ratio", type=float, default=10.0)
    ap.add_argument("--tol", type=float, default=1e-10)
    ap.add_argument("--out", default="out/timestep")
    args = ap.parse_args()
    config = BenchConfig(geometry=args.geometry, levels=tuple(int(v) for v in args.levels.split(",")),
                         dts=tuple(float(v) for v in args.dt.split(",")), density_ratios=(args.ratio,),
                         tol=args.tol, out=args.out)
    table = run_iteration_table(config)
    table.write(config.out)
    print(table.to_text(), end="")


if __name__ == "__main__":
    main()
