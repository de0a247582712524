"""Response of the MEP to small perturbations of the energy and to subspace restriction."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import InputError, MepError
from .geometry import DiscretePath, tangent_field, x_norm
from .landscape import EnergyModel, PerturbedModel
from .mep import MepSolution, StringOptions, find_minimizer, solve_string

__all__ = ["StudyRow", "PerturbationStudy", "interpolate_path", "tube_samples", "run_study"]

log = logging.getLogger(__name__)


def _projector(mask, dim):
    if mask is None:
        return lambda Y: np.asarray(Y, dtype=float)
    m = np.asarray(mask, dtype=bool)
    if m.shape != (dim,):
        raise InputError("mask must be a boolean vector of length dim")
    return lambda Y: np.where(m, np.asarray(Y, dtype=float), 0.0)


def interpolate_path(base, yA_d, yB_d, mask=None) -> DiscretePath:
    """Project a path onto the retained coordinates and correct it affinely to new endpoints.

    ``base`` is a :class:`MepSolution` or a :class:`DiscretePath`.
    """
    path = base.path if isinstance(base, MepSolution) else base
    proj = _projector(mask, path.dim)
    a = path.alphas[:, None]
    yA_d = np.asarray(yA_d, dtype=float)
    yB_d = np.asarray(yB_d, dtype=float)
    nodes = proj(path.nodes) + a * (yB_d - proj(path.yb)) + (1.0 - a) * (yA_d - proj(path.ya))
    # pin endpoints exactly against rounding in the affine sum
    nodes[0], nodes[-1] = yA_d, yB_d
    return DiscretePath(path.alphas, nodes)


def tube_samples(path: DiscretePath, epsilon: float, probes: int, rng: np.random.Generator) -> np.ndarray:
    """Path nodes plus ``probes`` uniform points in the closed epsilon-ball around each node."""
    n, N = path.nodes.shape
    d = rng.normal(size=(n, probes, N))
    d /= np.linalg.norm(d, axis=2, keepdims=True)
    r = epsilon * rng.random((n, probes, 1)) ** (1.0 / N)
    return np.concatenate([path.nodes, (path.nodes[:, None, :] + r * d).reshape(-1, N)])


@dataclass(frozen=True)
class StudyRow:
    delta: float
    model_error_c1: float
    model_error_c2: float
    subspace_error: float
    mep_error_c1: float
    minA_shift: float
    minB_shift: float
    converged: bool
    message: str = ""


@dataclass(frozen=True)
class PerturbationStudy:
    deltas: tuple
    rows: tuple
    slope: float
    slope_ci: tuple
    shift_constants: tuple
    epsilon: float
    probes: int
    base: MepSolution | None = field(default=None, compare=False, repr=False)

    def table(self) -> list:
        return [asdict(r) for r in self.rows]

    def summary(self) -> dict:
        return {
            "slope": self.slope,
            "slope_ci": list(self.slope_ci),
            "shift_constants": list(self.shift_constants),
            "epsilon": self.epsilon,
            "probes": self.probes,
            "rows": len(self.rows),
            "failed": sum(not r.converged for r in self.rows),
        }


def _model_errors(base: EnergyModel, pert: EnergyModel, samples: np.ndarray, proj):
    P = proj(samples)
    de = np.abs(pert.energy(P) - base.energy(P))
    dg = np.linalg.norm(pert.gradient(P) - proj(base.gradient(P)), axis=1)
    dh = np.linalg.norm(pert.hessian(P) - base.hessian(P), ord=2, axis=(1, 2))
    c1 = float(np.max(de + dg))
    return c1, float(np.max(de + dg + dh))


def _fit_slope(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2:
        return float("nan"), (float("nan"), float("nan"))
    lx, ly = np.log(x[ok]), np.log(y[ok])
    if ok.sum() == 2:
        s = float((ly[1] - ly[0]) / (lx[1] - lx[0]))
        return s, (s, s)
    fit = stats.linregress(lx, ly)
    q = stats.t.ppf(0.975, ok.sum() - 2) * fit.stderr
    return float(fit.slope), (float(fit.slope - q), float(fit.slope + q))


def run_study(model: EnergyModel, bump: EnergyModel, deltas, yA, yB, epsilon: float | None = None,
              n: int = 101, tol: float = 1e-8, mask=None, probes: int = 20, seed: int = 0,
              base: MepSolution | None = None, opts: StringOptions | None = None) -> PerturbationStudy:
    """Solve the MEP of ``model + delta * bump`` for each delta and compare with the base MEP.

    ``yA`` and ``yB`` seed the base minimizers.  Rows whose perturbed solve
    fails are kept with ``converged=False``.
    """
    deltas = sorted(float(d) for d in deltas)
    if not deltas:
        raise InputError("deltas must not be empty")
    if any(d < 0 or not np.isfinite(d) for d in deltas):
        raise InputError("deltas must be finite and non-negative")
    if base is None:
        yA = find_minimizer(model, yA)
        yB = find_minimizer(model, yB)
        base = solve_string(model, yA, yB, n=n, tol=tol, opts=opts)
    else:
        yA, yB = base.path.ya, base.path.yb
    L = tangent_field(base.path).length
    eps = 0.1 * L if epsilon is None else float(epsilon)
    if eps <= 0:
        raise InputError("epsilon must be positive")
    proj = _projector(mask, model.dim)
    samples = tube_samples(base.path, eps, probes, np.random.default_rng(seed))
    subspace_error = float(np.max(np.linalg.norm(samples - proj(samples), axis=1)))

    rows = []
    for d in deltas:
        pert = PerturbedModel(model, bump, d, mask)
        c1, c2 = _model_errors(model, pert, samples, proj)
        try:
            yA_d = find_minimizer(pert, proj(yA))
            yB_d = find_minimizer(pert, proj(yB))
            init = interpolate_path(base, yA_d, yB_d, mask)
            sol = solve_string(pert, yA_d, yB_d, n=base.path.n, tol=tol, init_path=init, opts=opts)
            err = x_norm(sol.path.nodes - base.path.nodes)
            rows.append(StudyRow(d, c1, c2, subspace_error, err,
                                 float(np.linalg.norm(yA_d - yA)), float(np.linalg.norm(yB_d - yB)), True))
        except MepError as exc:
            log.warning("perturbed solve failed at delta=%g: %s", d, exc)
            nan = float("nan")
            rows.append(StudyRow(d, c1, c2, subspace_error, nan, nan, nan, False, str(exc)))

    good = [r for r in rows if r.converged and r.delta > 0]
    slope, ci = _fit_slope([r.model_error_c1 for r in good], [r.mep_error_c1 for r in good])
    shifts = tuple(
        float(max(r.minA_shift, r.minB_shift) / r.model_error_c1) for r in good if r.model_error_c1 > 0
    )
    return PerturbationStudy(tuple(deltas), tuple(rows), slope, ci, shifts, eps, probes, base)
