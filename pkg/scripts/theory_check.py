"""Dense inf-sup, spectrum and norm-identity checks; exits 1 if any check fails.

    python3 scripts/theory_check.py --levels 0,1,2 --out out/theory
"""
import argparse
import sys

from fsiprecond.bench import BenchConfig, run_theory_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--levels", default="0,1,2")
    ap.add_argument("--out", default="out/theory")
    args = ap.parse_args()
    config = BenchConfig(levels=tuple(int(v) for v in args.levels.split(",")), out=args.out)
    bundle = run_theory_suite(config)
    bundle.write(config.out)
    print(bundle.summary(), end="")
    for amp, d0, d1, min_det, beta in bundle.geometry:
        print(f"interface bump {amp:g}: d0 {d0:.4f} d1 {d1:.4f} min det {min_det:.4f} beta_V {beta:.4f}")
    return 0 if bundle.passed else 1


if __name__ == "__main__":
    sys.exit(main())
