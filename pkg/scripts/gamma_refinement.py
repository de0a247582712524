"""Stability constant estimate on DW(kappa) as the transverse gap closes and the grid is refined."""

import argparse
import time

from mepstab.landscape import DoubleWell
from mepstab.mep import solve_string
from mepstab.stability import estimate_gamma


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--kappas", type=float, nargs="+", default=[16.0, 10.0, 8.5, 8.1])
    p.add_argument("--grids", type=int, nargs="+", default=[101, 201])
    p.add_argument("--trials", type=int, default=50)
    args = p.parse_args()
    print(f"{'kappa':>6} " + " ".join(f"{'n=' + str(n):>10}" for n in args.grids) + f" {'seconds':>8}")
    for k in args.kappas:
        model = DoubleWell(k)
        t0 = time.perf_counter()
        vals = []
        for n in args.grids:
            sol = solve_string(model, [-1.0, 0.0], [1.0, 0.0], n=n, tol=1e-10)
            vals.append(estimate_gamma(model, sol, trials=args.trials).gamma_hat)
        print(f"{k:6.2f} " + " ".join(f"{v:10.4f}" for v in vals) + f" {time.perf_counter() - t0:8.2f}")


if __name__ == "__main__":
    main()
