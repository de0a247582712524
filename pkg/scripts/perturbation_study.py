"""MEP deviation against model error for DW(10) plus a sinusoidal bump."""

import argparse
from pathlib import Path

from mepstab.io import write_json, write_table_csv
from mepstab.landscape import DoubleWell, SinusoidalBump
from mepstab.perturbation import run_study


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=201)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--deltas", type=float, nargs="+",
                   default=[0.0, 1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2])
    p.add_argument("--mask", choices=["none", "x"], default="none",
                   help="'x' keeps only the first coordinate")
    p.add_argument("--out", type=Path)
    args = p.parse_args()
    mask = None if args.mask == "none" else [True, False]
    study = run_study(DoubleWell(10.0), SinusoidalBump(3.0, 2.0), args.deltas, [-1.0, 0.0], [1.0, 0.0],
                      n=args.n, tol=args.tol, mask=mask)
    print(f"{'delta':>8} {'model err':>10} {'MEP err':>10} {'subspace':>9} {'ratio':>8}")
    for r in study.rows:
        ratio = r.mep_error_c1 / r.model_error_c1 if r.model_error_c1 > 0 else float("nan")
        print(f"{r.delta:8.1e} {r.model_error_c1:10.3e} {r.mep_error_c1:10.3e} {r.subspace_error:9.2e} {ratio:8.4f}")
    print(f"slope {study.slope:.4f}, 95% CI [{study.slope_ci[0]:.4f}, {study.slope_ci[1]:.4f}]")
    if args.out:
        write_table_csv(study.table(), args.out / "study.csv")
        write_json(study.summary(), args.out / "study.json")


if __name__ == "__main__":
    main()
