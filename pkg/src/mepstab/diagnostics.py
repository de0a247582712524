"""Critical-point classification, assumption certificates and endpoint limits of the residual."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError, NotCriticalError
from .geometry import DiscretePath, gamma, interp_row, spline, tangent_field
from .landscape import EnergyModel, evaluate
from .mep import MepSolution, residual_F, saddle_weight
from .stability import lambda_bar

__all__ = [
    "CriticalPointReport",
    "AssumptionReport",
    "EndpointLimits",
    "classify_critical",
    "check_assumptions",
    "endpoint_limits",
    "GAP_TOL",
]

GAP_TOL = 1e-6


@dataclass(frozen=True)
class CriticalPointReport:
    location: tuple
    kind: str
    spectrum: tuple
    tangent_eigenvalue: float
    gap: float

    def to_dict(self) -> dict:
        return asdict(self)


def _tangent_gap(spectrum: np.ndarray, value: float) -> float:
    """Distance from ``value`` to the spectrum with its nearest eigenvalue removed."""
    if not np.isfinite(value) or spectrum.size < 2:
        return float("inf") if np.isfinite(value) else float("nan")
    rest = np.delete(spectrum, np.argmin(np.abs(spectrum - value)))
    return float(np.min(np.abs(rest - value)))


def classify_critical(model: EnergyModel, y, tol: float = 1e-6, tangent=None,
                      eig_tol: float | None = None) -> CriticalPointReport:
    """Classify a critical point by the signs of its Hessian spectrum.

    >>> from mepstab.landscape import DoubleWell
    >>> r = classify_critical(DoubleWell(10.0), [0.0, 0.0])
    >>> r.kind, r.spectrum
    ('index1_saddle', (-4.0, 10.0))
    """
    _, g, H = evaluate(model, y)
    gnorm = float(np.linalg.norm(g))
    if gnorm > tol:
        raise NotCriticalError(f"gradient norm {gnorm:.3e} exceeds {tol:.1e}")
    spec = np.linalg.eigvalsh(H)
    eps = tol if eig_tol is None else eig_tol
    if np.any(np.abs(spec) <= eps):
        kind = "degenerate"
    else:
        neg = int(np.sum(spec < -eps))
        kind = {0: "minimizer", 1: "index1_saddle"}.get(neg, "higher_index")
    if tangent is None:
        tev = float("nan")
    else:
        t = np.asarray(tangent, dtype=float)
        t = t / np.linalg.norm(t)
        tev = float(t @ H @ t)
    return CriticalPointReport(
        tuple(float(v) for v in np.asarray(y, dtype=float)),
        kind,
        tuple(float(v) for v in spec),
        tev,
        _tangent_gap(spec, tev),
    )


@dataclass(frozen=True)
class AssumptionReport:
    a_holds: bool
    lambda_crossings: tuple
    gradient_dips: tuple
    kinds: tuple
    b_holds: bool
    sigma_a: float
    sigma_b: float
    simple_a: bool
    simple_b: bool
    lowest_a: bool
    lowest_b: bool
    gap_a: float
    gap_b: float
    omega_s: float
    omega_a: float
    omega_b: float
    dlambda0: float
    dlambda1: float
    sigma_ratio_a: float
    sigma_ratio: float

    def to_dict(self) -> dict:
        return asdict(self)


def _endpoint_verdict(spec: np.ndarray, sigma: float, gap_tol: float):
    scale = max(abs(sigma), 1.0)
    gap = _tangent_gap(spec, sigma)
    simple = bool(gap > gap_tol * scale)
    lowest = bool(sigma <= spec[0] + gap_tol * scale)
    rest = np.delete(spec, np.argmin(np.abs(spec - sigma)))
    omega = float(rest.min()) if rest.size else float("inf")
    return simple, lowest, gap, omega


def _gradient_dips(model, path: DiscretePath, sbar: float, rel: float = 1e-3):
    """Interior local minima of |grad E| along the nodes that are small relative to its peak."""
    g = np.linalg.norm(model.gradient(path.nodes), axis=1)
    a = path.alphas
    h = float(np.max(np.diff(a)))
    dips = []
    for i in range(1, len(a) - 1):
        if abs(a[i] - sbar) <= 1.5 * h or a[i] <= 1.5 * h or a[i] >= 1 - 1.5 * h:
            continue
        if g[i] <= g[i - 1] and g[i] <= g[i + 1] and g[i] <= rel * g.max():
            dips.append(float(a[i]))
    return tuple(dips)


def check_assumptions(model: EnergyModel, sol: MepSolution, gap_tol: float = GAP_TOL,
                      crit_tol: float = 1e-6) -> AssumptionReport:
    """Certify the single-saddle structure of the path and the endpoint spectral conditions."""
    path = sol.path
    lam = lambda_bar(model, sol)
    td = tangent_field(path)
    t0, t1 = td.unit[0], td.unit[-1]
    reports = []
    for y, tan in ((path.ya, t0), (sol.saddle, None), (path.yb, t1)):
        try:
            reports.append(classify_critical(model, y, crit_tol, tangent=tan))
        except NotCriticalError:
            reports.append(None)
    kinds = tuple(r.kind if r is not None else "not_critical" for r in reports)
    dips = _gradient_dips(model, path, sol.sbar)
    a_holds = (kinds == ("minimizer", "index1_saddle", "minimizer")
               and not lam.sign_changes and not dips)

    spec_a = np.linalg.eigvalsh(model.hessian(path.ya))
    spec_b = np.linalg.eigvalsh(model.hessian(path.yb))
    spec_s = np.linalg.eigvalsh(model.hessian(sol.saddle))
    simple_a, lowest_a, gap_a, omega_a = _endpoint_verdict(spec_a, sol.sigma_a, gap_tol)
    simple_b, lowest_b, gap_b, omega_b = _endpoint_verdict(spec_b, sol.sigma_b, gap_tol)
    pos = spec_s[spec_s > 0]
    omega_s = float(pos.min()) if pos.size else float("nan")
    # At a critical endpoint the derivative of lambda reduces to a Hessian quadratic form.
    L2 = td.length**2
    dl0 = float(td.velocity[0] @ model.hessian(path.ya) @ td.velocity[0] / L2)
    dl1 = float(td.velocity[-1] @ model.hessian(path.yb) @ td.velocity[-1] / L2)
    return AssumptionReport(
        a_holds=bool(a_holds),
        lambda_crossings=tuple(lam.sign_changes),
        gradient_dips=dips,
        kinds=kinds,
        b_holds=bool(simple_a and lowest_a and simple_b and lowest_b),
        sigma_a=float(sol.sigma_a),
        sigma_b=float(sol.sigma_b),
        simple_a=simple_a,
        simple_b=simple_b,
        lowest_a=lowest_a,
        lowest_b=lowest_b,
        gap_a=gap_a,
        gap_b=gap_b,
        omega_s=omega_s,
        omega_a=omega_a,
        omega_b=omega_b,
        dlambda0=dl0,
        dlambda1=dl1,
        sigma_ratio_a=omega_a / dl0,
        sigma_ratio=omega_b / dl1,
    )


@dataclass(frozen=True, eq=False)
class EndpointLimits:
    """Limits of the weighted residual quotients, by formula and by spline extrapolation."""

    limit0: np.ndarray
    limit_sbar: np.ndarray
    limit1: np.ndarray
    quotient0: np.ndarray
    quotient_sbar: np.ndarray
    quotient1: np.ndarray

    def __iter__(self):
        return iter((self.limit0, self.limit_sbar))

    @property
    def disagreement(self) -> float:
        pairs = ((self.limit0, self.quotient0), (self.limit_sbar, self.quotient_sbar),
                 (self.limit1, self.quotient1))
        return float(max(np.linalg.norm(a - b) / max(1.0, np.linalg.norm(a)) for a, b in pairs))

    def to_dict(self) -> dict:
        return {k: [float(x) for x in getattr(self, k)]
                for k in ("limit0", "limit_sbar", "limit1", "quotient0", "quotient_sbar", "quotient1")}


def endpoint_limits(model: EnergyModel, sol: MepSolution, path: DiscretePath | None = None) -> EndpointLimits:
    """Evaluate the limiting quotients of the residual at 0, the saddle parameter and 1.

    ``limit0`` is the limit of F(alpha)/(alpha(alpha-1)) as alpha -> 0,
    ``limit_sbar`` that of (F(alpha) - F(sbar))/(alpha - sbar), and
    ``limit1`` the analogue of ``limit0`` at 1.  Each is computed from the
    Hessian along the tangent and cross-checked by differentiating the spline
    of ``residual_F``.
    """
    path = sol.path if path is None else path
    if path.dim != sol.path.dim:
        raise InputError("path dimension differs from the solution")
    a = path.alphas
    sbar = sol.sbar
    td = tangent_field(path)
    L = td.length
    gam = gamma(path, td).values
    gam_s = float(interp_row(a, sbar) @ gam)
    grad_s = model.gradient(path(sbar))

    def kernel(s: float) -> np.ndarray:
        v = path(s, 1)
        speed = float(np.linalg.norm(v))
        t = v / speed
        Hv = model.hessian(path(s)) @ v
        par = (t @ Hv) * t
        dw = float(saddle_weight(np.array([s]), sbar, 1)[0])
        out = (Hv - par) - (speed - L) / L * par
        out = out + dw * speed / L * (t @ grad_s) * t
        out = out + sol.sigma * (speed - L - dw * gam_s) * t
        return out

    F = residual_F(model, sol, path).values
    S = spline(a, F)
    return EndpointLimits(
        limit0=-kernel(0.0),
        limit_sbar=kernel(sbar),
        limit1=kernel(1.0),
        quotient0=-S(0.0, 1),
        quotient_sbar=S(sbar, 1),
        quotient1=S(1.0, 1),
    )
