"""Variations on the double-well MEP that defeat the stability estimate when (B) fails.

Both constructions live on the straight MEP of ``DoubleWell(kappa)``, whose
transverse eigenvector is the constant ``e_y``.  ``kappa = 8`` makes the
transverse eigenvalue at the minimizers equal to the tangential one,
``kappa = 4`` puts it below.  The grids are graded geometrically toward
alpha = 0, where the constructions concentrate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .geometry import DiscretePath, NodeField, node_derivative, x_norm, y_norm
from .landscape import DoubleWell
from .mep import MepSolution
from .stability import apply_dF

__all__ = [
    "DegenerateWitness",
    "SwappedWitness",
    "graded_alphas",
    "dw_solution",
    "dw_lambda",
    "degenerate_witness",
    "swapped_witness",
]

TANGENT_EIGENVALUE = 8.0  # Hessian of the double well along x at (+-1, 0)


def graded_alphas(n: int = 201, a_min: float = 1e-6, per_decade: int = 40, upto: float = 0.05,
                  breaks=()) -> np.ndarray:
    """Geometric nodes from ``a_min`` to ``upto`` followed by a uniform grid of ``n`` nodes on [0, 1].

    >>> a = graded_alphas(11, a_min=1e-3, per_decade=2, upto=0.1)
    >>> a[[0, 1, -1]].tolist()
    [0.0, 0.001, 1.0]
    """
    decades = np.log10(upto / a_min)
    fine = np.geomspace(a_min, upto, max(int(np.ceil(decades * per_decade)) + 1, 2))
    coarse = np.linspace(0.0, 1.0, n)
    a = np.union1d(np.concatenate([[0.0], fine, coarse[coarse > upto]]), np.asarray(breaks, dtype=float))
    # drop coincident nodes
    keep = np.concatenate([[True], np.diff(a) > 1e-12])
    return a[keep]


def _cluster(x: float, width: float = 2e-3, count: int = 80) -> np.ndarray:
    """Nodes packed geometrically on both sides of a curvature jump at ``x``."""
    d = np.geomspace(1e-9, width, count)
    return x + np.concatenate([-d, d])


def dw_lambda(alphas, order: int = 0) -> np.ndarray:
    """Tangential multiplier of the straight double-well MEP, or its derivative."""
    x = 2.0 * np.asarray(alphas, dtype=float) - 1.0
    if order == 0:
        return 2.0 * x * (x * x - 1.0)
    return 4.0 * (3.0 * x * x - 1.0)


def dw_solution(alphas) -> MepSolution:
    """The exact MEP (2 alpha - 1, 0) of the double well on an arbitrary grid."""
    a = np.asarray(alphas, dtype=float)
    nodes = np.stack([2.0 * a - 1.0, np.zeros_like(a)], axis=1)
    return MepSolution(DiscretePath(a, nodes), 0.5, np.zeros(2), TANGENT_EIGENVALUE, TANGENT_EIGENVALUE)


def _kappa(model) -> float:
    if not isinstance(model, DoubleWell):
        raise PreconditionError("the witnesses are built on the double-well landscape")
    return float(model.kappa)


@dataclass(frozen=True, eq=False)
class DegenerateWitness:
    eta0: float
    ns: tuple
    ynorm_f: np.ndarray
    xnorm_psi: np.ndarray
    closed_form_defect: np.ndarray
    membership_defect: float
    profiles: dict

    @property
    def ratio(self) -> np.ndarray:
        return self.ynorm_f / self.xnorm_psi

    def table(self) -> list:
        return [{"n": int(n), "ynorm_f": float(y), "xnorm_psi": float(x), "ratio": float(y / x)}
                for n, y, x in zip(self.ns, self.ynorm_f, self.xnorm_psi)]

    def summary(self) -> dict:
        r = self.ratio
        return {
            "kind": "degenerate",
            "eta0": self.eta0,
            "ns": [int(n) for n in self.ns],
            "min_xnorm_psi": float(self.xnorm_psi.min()),
            "ynorm_decreasing": bool(np.all(np.diff(self.ynorm_f) < 0)),
            "ynorm_final_over_first": float(self.ynorm_f[-1] / self.ynorm_f[0]),
            "ratio_final_over_first": float(r[-1] / r[0]),
            "max_closed_form_defect": float(self.closed_form_defect.max()),
            "membership_defect": self.membership_defect,
        }


def degenerate_witness(n_list=(2, 4, 8, 16, 32), grid: int = 201, eta0: float = 0.02,
                       model: DoubleWell | None = None, a_min: float = 1e-6,
                       per_decade: int = 60) -> DegenerateWitness:
    """Variations ((eta0 - a)/eta0)^n lambda(a) e_y supported on [0, eta0] and their images."""
    kappa = _kappa(DoubleWell(TANGENT_EIGENVALUE) if model is None else model)
    if abs(kappa - TANGENT_EIGENVALUE) > 1e-12 * TANGENT_EIGENVALUE:
        raise PreconditionError(f"needs a transverse eigenvalue equal to {TANGENT_EIGENVALUE:g}, got kappa={kappa:g}")
    if not 0.0 < eta0 < 0.25:
        raise PreconditionError("eta0 must lie in (0, sbar/2)")
    ns = tuple(int(n) for n in n_list)
    if any(n < 2 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        raise PreconditionError("exponents must be increasing and at least 2")
    # the profiles vary on the scale eta0/n; resolve it uniformly on [0, 2 eta0]
    dense = np.linspace(0.0, 2 * eta0, 16 * max(ns) * 2 + 1)
    dense = np.concatenate([dense, _cluster(eta0)])
    a = graded_alphas(grid, a_min=a_min, per_decade=per_decade, upto=2 * eta0, breaks=dense)
    near = a[a <= eta0]
    membership = float(np.max(np.abs(kappa - dw_lambda(near, 1))))
    if membership > 1.0:
        raise PreconditionError(f"eta0 too large: eigenvalue mismatch {membership:.3g} exceeds 1")
    model = DoubleWell(kappa)
    sol = dw_solution(a)
    lam = dw_lambda(a)
    dlam = dw_lambda(a, 1)
    inside = a <= eta0
    ys, xs, defects, profiles = [], [], [], {}
    for n in ns:
        r = np.where(inside, (eta0 - a) / eta0, 0.0)
        beta = r**n * lam
        psi = np.zeros((len(a), 2))
        psi[:, 1] = beta
        f = apply_dF(model, sol, psi)
        closed = np.where(inside, lam * (kappa - dlam) * r**n + lam**2 * n * r ** (n - 1) / eta0, 0.0)
        defects.append(float(np.max(np.abs(f.values[:, 1] - closed))))
        ys.append(y_norm(f, sol.sbar))
        xs.append(x_norm(NodeField(a, psi)))
        profiles[n] = beta
    return DegenerateWitness(eta0, ns, np.array(ys), np.array(xs), np.array(defects), membership,
                             {"alphas": a, **profiles})


@dataclass(frozen=True, eq=False)
class SwappedWitness:
    sigma_j: float
    eta1: float
    ynorm_f: float
    ynorm_f_refined: float
    ynorm_f_graded: float
    ynorm_f_reference: float
    blowup_fit: float
    truncation_fit: float
    closed_form_defect: float

    @property
    def refinement_change(self) -> float:
        return abs(self.ynorm_f_refined - self.ynorm_f) / self.ynorm_f

    def summary(self) -> dict:
        return {
            "kind": "swapped",
            "sigma_j": self.sigma_j,
            "eta1": self.eta1,
            "ynorm_f": self.ynorm_f,
            "ynorm_f_refined": self.ynorm_f_refined,
            "refinement_change": self.refinement_change,
            "ynorm_f_graded": self.ynorm_f_graded,
            "ynorm_f_reference": self.ynorm_f_reference,
            "blowup_fit": self.blowup_fit,
            "truncation_fit": self.truncation_fit,
            "closed_form_defect": self.closed_form_defect,
        }


def _swapped_beta(a, sigma_j, eta1, order=0):
    inside = (a > 0) & (a <= eta1)
    safe = np.where(inside, a, 1.0)
    if order == 0:
        v = safe**sigma_j * (safe - eta1) ** 2
    else:
        v = sigma_j * safe ** (sigma_j - 1) * (safe - eta1) ** 2 + 2 * safe**sigma_j * (safe - eta1)
    return np.where(inside, v, 0.0)


def _swapped_image(kappa, sigma_j, eta1, alphas):
    sol = dw_solution(alphas)
    psi = np.zeros((len(alphas), 2))
    psi[:, 1] = _swapped_beta(alphas, sigma_j, eta1)
    return sol, psi, apply_dF(DoubleWell(kappa), sol, psi)


def _bridged_ynorm(f: NodeField, grid: int, sbar: float) -> float:
    """Y-norm of a graded-grid field after spline evaluation on the uniform grid."""
    u = np.linspace(0.0, 1.0, grid)
    return y_norm(NodeField(u, f.at(u)), sbar)


def swapped_witness(grid: int = 201, model: DoubleWell | None = None, a_min: float = 1e-8,
                    per_decade: int = 40, refine: int = 4) -> SwappedWitness:
    """Variation a^sigma (a - eta1)^2 e_y whose derivative is unbounded at 0 but whose image is in Y.

    The image is computed on a grid graded toward 0 and its Y-norm is taken
    on the uniform grid of ``grid`` nodes.  Spline differentiation cannot
    resolve the square-root profile in the first graded cells, so the norm
    over the graded nodes themselves grows like ``a_min ** (sigma_j - 1)``;
    it is reported as ``ynorm_f_graded`` next to a dense evaluation of the
    exact image, ``ynorm_f_reference``.
    """
    kappa = _kappa(DoubleWell(4.0) if model is None else model)
    if kappa >= TANGENT_EIGENVALUE or kappa <= 0:
        raise PreconditionError(f"needs 0 < kappa < {TANGENT_EIGENVALUE:g}, got {kappa:g}")
    sigma_j = kappa / TANGENT_EIGENVALUE
    eta1 = 0.5 * 0.5
    a = graded_alphas(grid, a_min=a_min, per_decade=per_decade, upto=0.05, breaks=_cluster(eta1))
    sol, psi, f = _swapped_image(kappa, sigma_j, eta1, a)
    yn = _bridged_ynorm(f, grid, sol.sbar)
    a4 = graded_alphas(grid, a_min=a_min / refine, per_decade=refine * per_decade, upto=0.05, breaks=_cluster(eta1))
    _, _, f4 = _swapped_image(kappa, sigma_j, eta1, a4)
    yn4 = _bridged_ynorm(f4, grid, sol.sbar)

    def exact(x):
        # kappa beta - lambda beta' with kappa = 8 sigma_j, factored to avoid cancellation near 0
        inside = x <= eta1
        v = x ** (sigma_j + 1) * (x - eta1) * (
            8 * sigma_j * (x - eta1) * (3 - 2 * x) - 16 * (2 * x * x - 3 * x + 1))
        return np.where(inside, v, 0.0)

    defect = float(np.max(np.abs(f.values[:, 1] - exact(a))))
    dense = np.concatenate([[0.0], np.geomspace(1e-12, 1e-2, 4001)[:-1], np.linspace(1e-2, 1.0, 20001)])
    ref = y_norm(NodeField(dense, np.stack([np.zeros_like(dense), exact(dense)], axis=1)), sol.sbar)

    beta = psi[:, 1]
    d = np.abs(node_derivative(a, beta))
    win = (a >= 100 * a_min) & (a <= 1e-3)
    fit = float(np.polyfit(np.log(a[win]), np.log(d[win]), 1)[0])
    # C^1 norm of psi restricted to [c, 1] as c -> 0
    cuts = np.geomspace(100 * a_min, 1e-3, 9)
    norms = [np.max(np.abs(beta[a >= c])) + np.max(d[a >= c]) for c in cuts]
    trunc = float(np.polyfit(np.log(cuts), np.log(norms), 1)[0])
    return SwappedWitness(sigma_j, eta1, float(yn), float(yn4), float(y_norm(f, sol.sbar)), float(ref),
                          fit, trunc, defect)
