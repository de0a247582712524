"""Compare the computed double-well MEP with its closed form on several grids."""

import argparse

import numpy as np

from mepstab.landscape import DoubleWell
from mepstab.mep import solve_string
from mepstab.stability import lambda_bar


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--kappa", type=float, default=10.0)
    p.add_argument("--grids", type=int, nargs="+", default=[51, 101, 201, 401])
    args = p.parse_args()
    model = DoubleWell(args.kappa)
    print(f"{'n':>5} {'node err':>10} {'sbar err':>10} {'lam0-8':>10} {'lam(s)+4':>10} {'lam1-8':>10}")
    for n in args.grids:
        sol = solve_string(model, [-1.0, 0.0], [1.0, 0.0], n=n, tol=1e-10)
        a = sol.alphas
        err = np.max(np.abs(sol.path.nodes - np.column_stack([2 * a - 1, 0 * a])))
        lam = lambda_bar(model, sol)
        print(f"{n:>5} {err:10.2e} {abs(sol.sbar - 0.5):10.2e} {lam.dprime0 - 8:10.2e} "
              f"{lam.dprime_sbar + 4:10.2e} {lam.dprime1 - 8:10.2e}")


if __name__ == "__main__":
    main()
