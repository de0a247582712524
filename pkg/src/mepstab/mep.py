"""Minimizers, the string method with a Newton polish, climbing image, and MEP residuals."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lstsq
from scipy.optimize import minimize_scalar

from .errors import (
    DegeneratePathError,
    InputError,
    ModelEvaluationError,
    SolverError,
    WrongCriticalPointError,
)
from .geometry import (
    DiscretePath,
    NodeField,
    TangentData,
    diff_matrix,
    gamma,
    interp_row,
    GAUSS_WEIGHTS,
    GAUSS_NODES,
    reparameterize,
    tangent_field,
    trapezoid_weights,
)
from .landscape import EnergyModel, evaluate

__all__ = [
    "StringOptions",
    "MepSolution",
    "find_minimizer",
    "solve_string",
    "locate_saddle",
    "solution_from_path",
    "mep_system_residual",
    "residual_F",
    "saddle_weight",
    "jacobian_F",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StringOptions:
    """Knobs of :func:`solve_string`; the defaults suit the built-in landscapes."""

    max_iters: int = 20000
    dt_safety: float = 0.5
    dt_grow: float = 1.1
    polish_switch: float = 1e-4
    polish_iters: int = 40
    stall_iters: int | None = None  # default: 10 * n
    cap_every: int = 20
    blowup: float = 10.0
    climb_iters: int = 200
    newton_iters: int = 50


@dataclass(frozen=True, eq=False)
class MepSolution:
    path: DiscretePath
    sbar: float
    saddle: np.ndarray
    sigma_a: float
    sigma_b: float
    residual_history: tuple = ()
    converged: bool = True
    gamma_residual: float = 0.0

    @property
    def alphas(self) -> np.ndarray:
        return self.path.alphas

    @property
    def sigma(self) -> float:
        return self.sigma_a + self.sigma_b

    def to_dict(self) -> dict:
        return {
            "sbar": float(self.sbar),
            "saddle": [float(x) for x in self.saddle],
            "sigma_a": float(self.sigma_a),
            "sigma_b": float(self.sigma_b),
            "residual_history": [float(r) for r in self.residual_history],
            "converged": bool(self.converged),
        }


def saddle_weight(alphas, sbar: float, order: int = 0):
    """The weight alpha(alpha-1)/(sbar(sbar-1)) or its derivative."""
    a = np.asarray(alphas, dtype=float)
    c = sbar * (sbar - 1.0)
    if order == 0:
        return a * (a - 1.0) / c
    if order == 1:
        return (2.0 * a - 1.0) / c
    return np.full_like(a, 2.0 / c)


# --------------------------------------------------------------------------- minimizers


def find_minimizer(model: EnergyModel, seed, tol: float = 1e-10, max_iters: int = 500) -> np.ndarray:
    """Gradient descent with backtracking, switching to Newton once the Hessian is positive definite.

    For a model with a coordinate ``mask`` the search and the minimality
    check run in the retained coordinates only.

    >>> from mepstab.landscape import DoubleWell
    >>> find_minimizer(DoubleWell(10.0), [0.7, 0.3]).round(8).tolist()
    [1.0, 0.0]
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    y = np.array(seed, dtype=float)
    # a masked model is constant along the dropped coordinates; work in the retained ones
    mask = getattr(model, "mask", None)
    keep = np.arange(model.dim) if mask is None else np.flatnonzero(mask)

    def local(y):
        e, g, H = evaluate(model, y)
        return e, g[keep], H[np.ix_(keep, keep)]

    for _ in range(max_iters):
        e, g, H = local(y)
        gn = np.linalg.norm(g)
        if gn <= tol:
            break
        w, V = np.linalg.eigh(H)
        if w[0] > 0:
            step = -V @ ((V.T @ g) / w)
        else:
            step = -g / max(np.abs(w).max(), 1.0)
        slope = g @ step
        if slope >= 0:
            step, slope = -g, -gn * gn
        full = np.zeros_like(y)
        full[keep] = step
        t = 1.0
        while t > 1e-12:
            trial = y + t * full
            if (model.energy(trial) <= e + 1e-4 * t * slope
                    or np.linalg.norm(model.gradient(trial)[keep]) < gn):
                break
            t *= 0.5
        y = y + t * full
    else:
        raise SolverError(f"minimizer search did not converge from seed {list(seed)}")
    w = np.linalg.eigvalsh(local(y)[2])
    if w[0] <= 0:
        raise WrongCriticalPointError(f"converged to a non-minimizer (lowest eigenvalue {w[0]:.3g})")
    return y


# --------------------------------------------------------------------------- string method


def _perp_forces(model, path, td=None):
    td = tangent_field(path) if td is None else td
    g = model.gradient(path.nodes)
    along = np.einsum("ij,ij->i", g, td.unit)
    return g - along[:, None] * td.unit, g, td


def _sup_perp(force) -> float:
    return float(np.max(np.linalg.norm(force[1:-1], axis=1)))


def _sup_perp_inner(force) -> float:
    return float(np.max(np.linalg.norm(force, axis=1)))


def _step_cap(model, path, safety) -> float:
    """Explicit-step limit from the Hessian spectrum and an upwind CFL bound."""
    H = model.hessian(path.nodes)
    lam = np.max(np.abs(np.linalg.eigvalsh(H)))
    td = tangent_field(path)
    g = model.gradient(path.nodes)
    transport = np.max(np.abs(np.einsum("ij,ij->i", g, td.unit)))
    spacing = td.length / (path.n - 1)
    return safety * min(1.0 / max(lam, 1e-12), spacing / max(transport, 1e-300))


def _upwind_tangents(model, path):
    """Energy-upwinded chord tangents at the interior nodes.

    The descent phase projects with these instead of the spline tangents: the
    centred tangent turns the projected force into a centred advection term,
    which explicit time stepping amplifies into node zig-zag.
    """
    y = path.nodes
    e = model.energy(y)
    fw, bw = y[2:] - y[1:-1], y[1:-1] - y[:-2]
    ep, e0, em = e[2:], e[1:-1], e[:-2]
    up = ((ep > e0) & (e0 > em))[:, None]
    down = ((ep < e0) & (e0 < em))[:, None]
    dmax = np.maximum(np.abs(ep - e0), np.abs(em - e0))[:, None]
    dmin = np.minimum(np.abs(ep - e0), np.abs(em - e0))[:, None]
    mixed = np.where((ep > em)[:, None], fw * dmax + bw * dmin, fw * dmin + bw * dmax)
    t = np.where(up, fw, np.where(down, bw, mixed))
    norm = np.linalg.norm(t, axis=1)
    norm[norm == 0.0] = 1.0
    return t / norm[:, None]


def _descent_force(model, path):
    g = model.gradient(path.nodes[1:-1])
    t = _upwind_tangents(model, path)
    return g - np.einsum("ij,ij->i", g, t)[:, None] * t


def _cumtrapz_matrix(alphas):
    n = len(alphas)
    h = np.diff(alphas)
    C = np.zeros((n, n))
    for k in range(1, n):
        C[k] = C[k - 1]
        C[k, k - 1] += 0.5 * h[k - 1]
        C[k, k] += 0.5 * h[k - 1]
    return C


def _quadrature_setup(alphas):
    """Spline-derivative rows at 8 Gauss points per interval and cumulative-length weights."""
    n = len(alphas)
    half = 0.5 * np.diff(alphas)
    mid = 0.5 * (alphas[1:] + alphas[:-1])
    pts = (mid[:, None] + half[:, None] * GAUSS_NODES[None, :]).ravel()
    B = np.asarray(interp_row(alphas, pts, 1))
    wq = (half[:, None] * GAUSS_WEIGHTS[None, :]).ravel()
    seg = np.repeat(np.arange(n - 1), len(GAUSS_NODES))
    Cq = (seg[None, :] < np.arange(n)[:, None]) * wq[None, :]
    return B, Cq


def _system(model, nodes, alphas, D, B, Cq):
    v = D @ nodes
    speed = np.linalg.norm(v, axis=1)
    t = v / speed[:, None]
    g = model.gradient(nodes)
    along = np.einsum("ij,ij->i", g, t)
    perp = g - along[:, None] * t
    vq = B @ nodes
    sq = np.linalg.norm(vq, axis=1)
    cum = Cq @ sq
    gam = cum - alphas * cum[-1]
    return perp, gam, (speed, t, along, vq / sq[:, None])


def _newton_polish(model, path, tol, iters, history):
    """Gauss-Newton on the discrete MEP system.

    Unknowns are the interior nodes; equations are the perpendicular gradient
    at each interior node (spline tangents) and equal spline arc length, the
    latter measured with the same Gauss quadrature as :func:`reparameterize`.
    """
    a = path.alphas
    n, N = path.n, path.dim
    D = np.asarray(diff_matrix(a))
    B, Cq = _quadrature_setup(a)
    inner = slice(1, n - 1)
    m = n - 2
    idx = np.arange(m)
    eye = np.eye(N)

    def merit(perp, gam):
        return float(np.sum(perp[inner] ** 2) + np.sum(gam[inner] ** 2))

    perp, gam, aux = _system(model, path.nodes, a, D, B, Cq)
    cur = merit(perp, gam)
    for _ in range(iters):
        if _sup_perp(perp) <= tol and np.max(np.abs(gam)) <= tol:
            break
        speed, t, along, tq = aux
        H = model.hessian(path.nodes[inner])
        Pp = eye[None] - t[:, :, None] * t[:, None, :]
        # d perp_i / d y_j = delta_ij Pp_i H_i - D_ij [(t.g) Pp + t (Pp g)^T]_i / |v_i|
        K = ((along[:, None, None] * Pp + t[:, :, None] * perp[:, None, :]) / speed[:, None, None])[inner]
        Jp = -(D[inner, inner][:, None, :, None] * K[:, :, None, :])
        Jp[idx, :, idx, :] += np.einsum("kab,kbc->kac", Pp[inner], H)
        Sq = B[:, inner][:, :, None] * tq[:, None, :]
        dcum = np.einsum("kq,qjd->kjd", Cq, Sq)
        Jg = (dcum - a[:, None, None] * dcum[-1][None])[inner]
        J = np.concatenate([Jp.reshape(m * N, m * N), Jg.reshape(m, m * N)], axis=0)
        rhs = -np.concatenate([perp[inner].ravel(), gam[inner]])
        step = lstsq(J, rhs, lapack_driver="gelsy")[0].reshape(m, N)
        s = 1.0
        while s > 1e-8:
            trial = path.nodes.copy()
            trial[inner] += s * step
            try:
                cand = path.with_nodes(trial)
                p2, g2, aux2 = _system(model, cand.nodes, a, D, B, Cq)
                new = merit(p2, g2)
            except DegeneratePathError:
                new = np.inf
            if np.isfinite(new) and new < cur:
                break
            s *= 0.5
        else:
            break
        path, perp, gam, aux, cur = cand, p2, g2, aux2, new
        history.append(_sup_perp(perp))
    return path, perp, gam


def _climb(model, path, tol, opts):
    """Climbing image from the energy-maximal interior node, finished by Newton on the gradient."""
    td = tangent_field(path)
    e = model.energy(path.nodes)
    k = int(np.argmax(e[1:-1])) + 1
    y = path.nodes[k].copy()
    t = td.unit[k]
    radius = td.length / (path.n - 1)
    H = model.hessian(y)
    dt = 0.5 / max(np.max(np.abs(np.linalg.eigvalsh(H))), 1e-12)
    g = model.gradient(y)
    for _ in range(opts.climb_iters):
        if np.linalg.norm(g) <= max(tol, 1e-3 * np.linalg.norm(model.gradient(path.nodes[k]))):
            break
        step = dt * (-g + 2.0 * (g @ t) * t)
        if np.linalg.norm(step) > radius:
            step *= radius / np.linalg.norm(step)
        y = y + step
        g = model.gradient(y)
    for _ in range(opts.newton_iters):
        _, g, H = evaluate(model, y)
        if np.linalg.norm(g) <= tol:
            break
        step = lstsq(H, g, lapack_driver="gelsy")[0]
        if np.linalg.norm(step) > radius:
            step *= radius / np.linalg.norm(step)
        y = y - step
    g = model.gradient(y)
    if np.linalg.norm(g) > 10.0 * tol:
        raise SolverError(f"saddle refinement stalled at |grad E| = {np.linalg.norm(g):.3g}")
    w = np.linalg.eigvalsh(model.hessian(y))
    if np.sum(w < 0) != 1:
        raise WrongCriticalPointError(f"refined critical point has {int(np.sum(w < 0))} negative eigenvalues")
    return k, y


def locate_saddle(model: EnergyModel, path: DiscretePath, tol: float = 1e-10, opts: StringOptions | None = None):
    """Refine the saddle from the path maximum and return ``(sbar, saddle)``."""
    opts = StringOptions() if opts is None else opts
    k, y = _climb(model, path, tol, opts)
    S = path.spline()
    a = path.alphas
    lo, hi = a[max(k - 2, 0)], a[min(k + 2, path.n - 1)]
    res = minimize_scalar(lambda s: float(np.sum((S(s) - y) ** 2)), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12})
    s = float(res.x)
    for _ in range(20):
        d, d1, d2 = S(s) - y, S(s, 1), S(s, 2)
        step = (d @ d1) / (d1 @ d1 + d @ d2)
        s = min(max(s - step, lo), hi)
        if abs(step) < 1e-15:
            break
    return s, y


def _endpoint_rayleigh(model, path, td):
    Ha = model.hessian(path.ya)
    Hb = model.hessian(path.yb)
    ta, tb = td.unit[0], td.unit[-1]
    return float(ta @ Ha @ ta), float(tb @ Hb @ tb)


def solution_from_path(model: EnergyModel, path: DiscretePath, tol: float = 1e-10,
                       history=(), converged: bool = True, strict: bool = True) -> MepSolution:
    """Wrap a path as a solution, refining the saddle from its energy maximum.

    With ``strict=False`` a failed refinement falls back to the energy-maximal
    interior node and the result is marked as not converged.
    """
    td = tangent_field(path)
    try:
        sbar, saddle = locate_saddle(model, path, tol)
    except SolverError:
        if strict:
            raise
        e = model.energy(path.nodes)
        k = int(np.argmax(e[1:-1])) + 1
        sbar, saddle, converged = float(path.alphas[k]), path.nodes[k].copy(), False
    sa, sb = _endpoint_rayleigh(model, path, td)
    gres = float(np.max(np.abs(gamma(path, td).values)))
    return MepSolution(path, sbar, saddle, sa, sb, tuple(history), converged, gres)


def solve_string(model: EnergyModel, yA, yB, n: int = 101, tol: float = 1e-8,
                 init_path: DiscretePath | None = None, opts: StringOptions | None = None) -> MepSolution:
    """String method: projected steepest descent plus equal-arclength resampling.

    Once the explicit iteration has reduced the perpendicular force well below
    its initial size, a Gauss-Newton solve of the discrete MEP system takes over.
    ``residual_history`` records the perpendicular force after every accepted
    iteration.
    """
    opts = StringOptions() if opts is None else opts
    yA, yB = np.asarray(yA, dtype=float), np.asarray(yB, dtype=float)
    if tol <= 0:
        raise InputError("tol must be positive")
    if yA.shape != (model.dim,) or yB.shape != (model.dim,):
        raise InputError("endpoints must match the model dimension")
    if np.array_equal(yA, yB):
        raise InputError("endpoints coincide")
    if init_path is None:
        path = DiscretePath.straight(yA, yB, n)
    else:
        if not (np.array_equal(init_path.ya, yA) and np.array_equal(init_path.yb, yB)):
            raise InputError("initial path endpoints differ from yA, yB")
        path = DiscretePath(np.linspace(0.0, 1.0, init_path.n), init_path.nodes)
    path = reparameterize(path)
    force = _descent_force(model, path)
    r = _sup_perp_inner(force)
    r0 = max(r, tol)
    history = [r]
    best, since = r, 0
    it = 0
    dt_cap = dt = _step_cap(model, path, opts.dt_safety)
    stall = 10 * path.n if opts.stall_iters is None else opts.stall_iters
    while r > max(tol, opts.polish_switch * r0) and it < opts.max_iters and since < stall:
        if it % opts.cap_every == 0:
            dt_cap = _step_cap(model, path, opts.dt_safety)
            dt = min(dt, dt_cap)
        it += 1
        trial = path.nodes.copy()
        trial[1:-1] -= dt * force
        try:
            cand = reparameterize(path.with_nodes(trial))
            f2 = _descent_force(model, cand)
            r2 = _sup_perp_inner(f2)
        except (DegeneratePathError, ModelEvaluationError):
            r2 = np.inf
        if not np.isfinite(r2) or r2 > opts.blowup * r:
            dt *= 0.5
            if dt < 1e-12 * dt_cap:
                break
            continue
        path, force, r = cand, f2, r2
        history.append(r)
        dt = min(dt * opts.dt_grow, dt_cap)
        if r < best * (1.0 - 1e-3):
            best, since = r, 0
        else:
            since += 1
    log.debug("explicit string phase: %d iterations, residual %.3e", it, r)
    path, perp, gam = _newton_polish(model, path, tol, opts.polish_iters, history)
    r = _sup_perp(perp)
    if r > tol or np.max(np.abs(gam)) > tol:
        raise SolverError(f"string method stalled at residual {r:.3e} (arc length {np.max(np.abs(gam)):.3e})")
    sol = solution_from_path(model, path, tol=min(tol, 1e-10), history=history)
    return sol


# --------------------------------------------------------------------------- residuals


def mep_system_residual(model: EnergyModel, path: DiscretePath):
    """``(max |perpendicular gradient|, max |Gamma|)`` over the nodes."""
    force, _, td = _perp_forces(model, path)
    perp = float(np.max(np.linalg.norm(force, axis=1)))
    return perp, float(np.max(np.abs(gamma(path, td).values)))


@dataclass(frozen=True, eq=False)
class _FParts:
    td: TangentData
    grad: np.ndarray
    grad_s: np.ndarray
    tau: np.ndarray
    gam: np.ndarray
    rho: np.ndarray
    w: np.ndarray
    f: np.ndarray


def _F_parts(model, sol, path) -> _FParts:
    td = tangent_field(path)
    a = path.alphas
    w = saddle_weight(a, sol.sbar)
    grad = model.gradient(path.nodes)
    grad_s = model.gradient(path(sol.sbar))
    tau = grad - w[:, None] * grad_s[None, :]
    gam = gamma(path, td).values
    rho = gam - w * (interp_row(a, sol.sbar) @ gam)
    t = td.unit
    ratio = td.speed / td.length
    f = grad - (ratio * np.einsum("ij,ij->i", t, tau))[:, None] * t + sol.sigma * rho[:, None] * t
    return _FParts(td, grad, grad_s, tau, gam, rho, w, f)


def jacobian_F(model: EnergyModel, sol: MepSolution, path: DiscretePath, parts: _FParts | None = None) -> np.ndarray:
    """Exact derivative of the discrete residual with respect to all node values.

    Returns an array of shape ``(n, N, n, N)``; ``J[i, :, j, :]`` is the
    sensitivity of the residual at node i to the position of node j.
    """
    P_ = _F_parts(model, sol, path) if parts is None else parts
    td = P_.td
    a = path.alphas
    n, N = path.n, path.dim
    L = td.length
    t = td.unit
    c = td.speed / L
    D = np.asarray(diff_matrix(a))
    W = trapezoid_weights(a)
    C = _cumtrapz_matrix(a)
    r = interp_row(a, sol.sbar)
    sigma = sol.sigma
    I = np.eye(N)
    Pt = t[:, :, None] * t[:, None, :]
    Pp = I[None] - Pt
    H = model.hessian(path.nodes)
    Hs = model.hessian(path(sol.sbar))
    tau = P_.tau
    t_tau = np.einsum("ij,ij->i", t, tau)
    perp_tau = tau - t_tau[:, None] * t
    par_tau = t_tau[:, None] * t

    J = np.zeros((n, N, n, N))
    idx = np.arange(n)
    J[idx, :, idx, :] = H - c[:, None, None] * np.einsum("kab,kbc->kac", Pt, H)
    # saddle coupling through tau
    J += (c * P_.w)[:, None, None, None] * np.einsum("kab,bc->kac", Pt, Hs)[:, :, None, :] * r[None, None, :, None]
    # terms linear in psi'_i
    K = -(t_tau[:, None, None] * Pp + t[:, :, None] * perp_tau[:, None, :]) / L
    K -= par_tau[:, :, None] * t[:, None, :] / L
    K += (sigma * P_.rho / td.speed)[:, None, None] * Pp
    J += D[:, None, :, None] * K[:, :, None, :]
    # global terms through u_k = t_k . psi'_k
    S = D[:, :, None] * t[:, None, :]  # (k, j, b)
    WS = np.einsum("k,kjb->jb", W, S)
    J += (c / L)[:, None, None, None] * par_tau[:, :, None, None] * WS[None, None]
    dGam = np.einsum("kl,ljb->kjb", C - np.outer(a, W), S)
    dRho = dGam - P_.w[:, None, None] * np.einsum("k,kjb->jb", r, dGam)[None]
    J += sigma * t[:, :, None, None] * dRho[:, None, :, :]
    return J


def residual_F(model: EnergyModel, sol: MepSolution, path: DiscretePath) -> NodeField:
    """The reformulated MEP residual, vanishing at 0 and 1 for paths joining critical points."""
    if path.dim != sol.path.dim or path.n < 4:
        raise InputError("path does not match the solution")
    if not (np.allclose(path.ya, sol.path.ya, atol=1e-12) and np.allclose(path.yb, sol.path.yb, atol=1e-12)):
        raise InputError("path endpoints differ from the solution endpoints")
    return NodeField(path.alphas, _F_parts(model, sol, path).f, "residual")
