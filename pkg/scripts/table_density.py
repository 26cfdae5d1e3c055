"""Iteration counts of M1, M2, M3 and SC over structure/fluid density ratios (k = 1e-2).

    python3 scripts/table_density.py --levels 0,1,2 --out out/density
"""
import argparse

from fsiprecond.bench import BenchConfig, run_iteration_table


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--geometry", default="cavity_halves")
    ap.add_argument("--levels", default="0,1,2")
    ap.add_argument("--ratios", default="1,10,100")
    ap.add_argument("--dt", type=float, default=1e-2)
    ap.add_argument("--tol", type=float, default=1e-10)
    ap.add_argument("--out", default="out/density")
    args = ap.parse_args()
    config = BenchConfig(geometry=args.geometry, levels=tuple(int(v) for v in args.levels.split(",")),
                         dts=(args.dt,), density_ratios=tuple(float(v) for v in args.ratios.split(",")),
                         tol=args.tol, out=args.out)
    table = run_iteration_table(config)
    table.write(config.out)
    print(table.to_text(), end="")


if __name__ == "__main__":
    main()
