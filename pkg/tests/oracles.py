"""Independent reference solutions used by the tests."""

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.special import roots_jacobi


def dw_lambda(a):
    x = 2.0 * np.asarray(a) - 1.0
    return 2.0 * x * (x * x - 1.0)


def shoot_dw_perp(alphas, kappa, f, df, sbar=0.5, h=1e-4, stop=1e-7):
    """Regular solution of lam(a) b' = kappa b - f(a) on the straight double-well MEP.

    Starts from the Taylor expansion at the saddle, where lam vanishes with
    slope -4, and integrates outward to both endpoints with an implicit
    Radau scheme.  Returns the solution at ``alphas`` (zero at 0 and 1).
    """
    pin = f(sbar) / kappa
    slope = df(sbar) / (kappa + 4.0)

    def rhs(a, b):
        return (kappa * b - f(a)) / dw_lambda(a)

    out = np.zeros(len(alphas))
    for end in (stop, 1.0 - stop):
        d = np.sign(end - sbar)
        x0 = sbar + d * h
        run = solve_ivp(rhs, (x0, end), [pin + slope * d * h], method="Radau",
                        rtol=1e-11, atol=1e-13, dense_output=True)
        sel = ((alphas - sbar) * d >= h) & (alphas > 0) & (alphas < 1)
        out[sel] = run.sol(alphas[sel])[0]
    near = np.abs(alphas - sbar) < h
    out[near] = pin + slope * (alphas[near] - sbar)
    return out


def picard_dw_perp(kappa, f, delta=0.1, m=801, iters=60, order=60):
    """Picard iteration for the same equation on [1/2 - delta, 1/2 + delta].

    With x = a - 1/2 the coefficient lam = -4x + 16x^3 is frozen to its
    linear part l = -4x and the remainder moved to the source:
    l b' = kappa b + r,  r = -f + (l - lam) b'.  The regular solution of the
    frozen problem is b(x) = (1/c) int_0^1 t^(p) r(x t) dt with c = -4 and
    p = -kappa / c - 1, which needs no singular quadrature.
    Returns the grid of alphas and the solution on it.
    """
    c = -4.0
    p = -kappa / c - 1.0
    u, w = roots_jacobi(order, 0.0, p)
    t = 0.5 * (1.0 + u)
    w = w * 0.5 ** (p + 1.0)
    x = np.linspace(-delta, delta, m)
    q = 4.0 * x**2 / (1.0 - 4.0 * x**2)  # (l - lam) / lam
    b = np.full(m, f(0.5) / kappa)
    for _ in range(iters):
        g = -f(0.5 + x)
        r = CubicSpline(x, g + q * (kappa * b + g))
        new = (r(np.outer(x, t)) @ w) / c
        done = np.max(np.abs(new - b)) < 1e-14
        b = new
        if done:
            break
    return 0.5 + x, b
