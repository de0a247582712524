"""Both double-well constructions for which the endpoint spectral condition fails."""

import argparse

from mepstab.counterexamples import degenerate_witness, swapped_witness


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--eta0", type=float, default=0.02)
    p.add_argument("--ns", type=int, nargs="+", default=[2, 4, 8, 16, 32, 64, 128])
    args = p.parse_args()
    d = degenerate_witness(args.ns, eta0=args.eta0)
    print("kappa = 8, variations ((eta0 - a)/eta0)^n lambda(a) e_y")
    print(f"{'n':>5} {'|psi|_X':>9} {'|f|_Y':>9} {'ratio':>8}")
    for row in d.table():
        print(f"{row['n']:>5} {row['xnorm_psi']:9.4f} {row['ynorm_f']:9.4f} {row['ratio']:8.4f}")
    print(f"closed-form defect {d.closed_form_defect.max():.1e}")
    s = swapped_witness()
    print("\nkappa = 4, variation a^(1/2) (a - 1/4)^2 e_y")
    for k, v in s.summary().items():
        print(f"  {k:>20}: {v}")


if __name__ == "__main__":
    main()
