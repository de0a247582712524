"""Linearization of the MEP residual at a converged path and its inversion.

The inverse splits a variation into a tangential scalar and a perpendicular
part expressed in a transported orthonormal frame.  Both parts satisfy linear
ODEs whose leading coefficient, the tangential multiplier lambda, vanishes at
the two endpoints and at the saddle.  They are solved by global least-squares
collocation on the spline grid, with the regular values at the saddle imposed
as extra rows.
"""

from __future__ import annotations

import warnings
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lstsq, null_space

from .errors import (
    AssumptionASuspect,
    DegenerateSaddleError,
    FrameError,
    InputError,
    SolverError,
)
from .geometry import (
    DiscretePath,
    NodeField,
    TangentData,
    diff_matrix,
    interp_row,
    random_field,
    spline,
    tangent_field,
    trapezoid_weights,
    x_norm,
    y_norm,
    _cumtrapz,
)
from .landscape import EnergyModel
from .mep import MepSolution, _cumtrapz_matrix, jacobian_F, saddle_weight

__all__ = [
    "LambdaProfile",
    "FrameField",
    "PerpSystem",
    "CollocationResult",
    "GammaEstimate",
    "lambda_bar",
    "transport_frames",
    "assemble_perp_system",
    "solve_perp",
    "solve_tangential",
    "apply_dF",
    "solve_dF",
    "estimate_gamma",
]

ENDPOINT_TOL = 1e-10


# --------------------------------------------------------------------------- lambda


@dataclass(frozen=True, eq=False)
class LambdaProfile:
    alphas: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    dprime0: float
    dprime_sbar: float
    dprime1: float
    c_lower: float
    c_upper: float
    sign_changes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "dprime0": self.dprime0,
            "dprime_sbar": self.dprime_sbar,
            "dprime1": self.dprime1,
            "cbar": self.c_upper,
            "cunderbar": self.c_lower,
        }


def _lambda_profile(alphas, grad, velocity, length, sbar, warn=True) -> LambdaProfile:
    lam = np.einsum("ij,ij->i", grad, velocity) / length**2
    S = spline(alphas, lam)
    dlam = S(alphas, 1)
    d0, ds, d1 = (float(v) for v in S(np.array([0.0, sbar, 1.0]), 1))
    h = np.max(np.diff(alphas))
    keep = (alphas > 0.5 * h) & (alphas < 1.0 - 0.5 * h) & (np.abs(alphas - sbar) > 0.5 * h)
    a = alphas[keep]
    ratio = np.abs(lam[keep] / (a * (a - sbar) * (a - 1.0)))
    expected = np.where(alphas < sbar, 1.0, -1.0)
    interior = (alphas > 0.0) & (alphas < 1.0) & (np.abs(alphas - sbar) > 0.5 * h)
    wrong = np.flatnonzero(interior & (np.sign(lam) != expected))
    crossings = tuple(float(alphas[i]) for i in wrong)
    if warn and wrong.size:
        warnings.warn(
            f"tangential multiplier has the wrong sign at {wrong.size} interior nodes "
            f"(first at alpha={crossings[0]:.4g})",
            AssumptionASuspect,
            stacklevel=3,
        )
    return LambdaProfile(alphas, lam, dlam, d0, ds, d1, float(ratio.min()), float(ratio.max()), crossings)


# --------------------------------------------------------------------------- frames


@dataclass(frozen=True, eq=False)
class FrameField:
    """Orthonormal bases of the tangent-perpendicular spaces, shape ``(n, N, N-1)``."""

    alphas: np.ndarray
    frames: np.ndarray
    frame_derivative: np.ndarray


def _transport(unit: np.ndarray) -> np.ndarray:
    n, N = unit.shape
    Q = np.empty((n, N, N - 1))
    Q[0] = null_space(unit[0][None, :])
    for i in range(n - 1):
        t = unit[i + 1]
        M = Q[i] - np.outer(t, t @ Q[i])
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
        if s[-1] < 1e-8:
            raise FrameError(f"frame transport lost rank between nodes {i} and {i + 1}")
        # closest orthonormal matrix to the projected frame: the transfer matrix is SPD
        Q[i + 1] = U @ Vt
    return Q


def transport_frames(sol_or_path) -> FrameField:
    path = sol_or_path.path if isinstance(sol_or_path, MepSolution) else sol_or_path
    if path.dim < 2:
        raise InputError("frames need dimension at least 2")
    td = tangent_field(path)
    Q = _transport(td.unit)
    n, N, m = Q.shape
    dQ = spline(path.alphas, Q.reshape(n, N * m))(path.alphas, 1).reshape(n, N, m)
    return FrameField(path.alphas, Q, dQ)


# --------------------------------------------------------------------------- cached node data


@dataclass(eq=False)
class _Linearization:
    """Node data of a converged solution shared by every linear operation on it."""

    model: EnergyModel
    sol: MepSolution
    td: TangentData
    lam: LambdaProfile
    H: np.ndarray
    Hs: np.ndarray
    ts: np.ndarray
    D: np.ndarray
    rs: np.ndarray
    drs: np.ndarray
    W: np.ndarray
    w: np.ndarray
    frames: FrameField | None = None
    extra: dict = field(default_factory=dict)

    @property
    def alphas(self):
        return self.sol.path.alphas


_CACHE: "weakref.WeakKeyDictionary[MepSolution, dict]" = weakref.WeakKeyDictionary()


def _linearization(model: EnergyModel, sol: MepSolution, warn: bool = True) -> _Linearization:
    per_sol = _CACHE.setdefault(sol, {})
    key = id(model)
    hit = per_sol.get(key)
    if hit is not None and hit.model is model:
        return hit
    path = sol.path
    a = path.alphas
    td = tangent_field(path)
    grad = model.gradient(path.nodes)
    lam = _lambda_profile(a, grad, td.velocity, td.length, sol.sbar, warn=warn)
    ts = path(sol.sbar, 1)
    lin = _Linearization(
        model=model,
        sol=sol,
        td=td,
        lam=lam,
        H=model.hessian(path.nodes),
        Hs=model.hessian(path(sol.sbar)),
        ts=ts / np.linalg.norm(ts),
        D=np.asarray(diff_matrix(a)),
        rs=np.asarray(interp_row(a, sol.sbar)),
        drs=np.asarray(interp_row(a, sol.sbar, 1)),
        W=trapezoid_weights(a),
        w=saddle_weight(a, sol.sbar),
    )
    per_sol[key] = lin
    return lin


def lambda_bar(model: EnergyModel, sol: MepSolution) -> LambdaProfile:
    """Tangential multiplier (grad E, phi') / L^2 along the solution, with derivative data."""
    return _linearization(model, sol).lam


def _frames(lin: _Linearization) -> FrameField:
    if lin.frames is None:
        lin.frames = transport_frames(lin.sol.path)
    return lin.frames


# --------------------------------------------------------------------------- perpendicular system


@dataclass(frozen=True, eq=False)
class PerpSystem:
    alphas: np.ndarray
    A: np.ndarray
    g: np.ndarray
    B: np.ndarray
    lam: LambdaProfile
    frames: FrameField
    sbar: float

    def at_sbar(self):
        """Spline values of A, A', g, g' at the saddle parameter."""
        n, m = self.g.shape
        SA = spline(self.alphas, self.A.reshape(n, m * m))
        Sg = spline(self.alphas, self.g)
        s = self.sbar
        return (SA(s).reshape(m, m), SA(s, 1).reshape(m, m), Sg(s), Sg(s, 1))


def _vector_field(f, n, N, name="f") -> np.ndarray:
    v = f.values if isinstance(f, NodeField) else np.asarray(f, dtype=float)
    if v.shape != (n, N):
        raise InputError(f"{name} must have shape ({n}, {N}), got {v.shape}")
    return v


def assemble_perp_system(model: EnergyModel, sol: MepSolution, frames: FrameField | None, f) -> PerpSystem:
    lin = _linearization(model, sol)
    frames = _frames(lin) if frames is None else frames
    n, N = sol.path.n, sol.path.dim
    fv = _vector_field(f, n, N)
    if max(np.linalg.norm(fv[0]), np.linalg.norm(fv[-1])) > ENDPOINT_TOL:
        raise InputError("source field must vanish at both endpoints")
    t, dt = lin.td.unit, lin.td.unit_derivative
    Q, dQ = frames.frames, frames.frame_derivative
    Pp = np.eye(N)[None] - t[:, :, None] * t[:, None, :]
    B = Pp @ lin.H @ Pp
    # D y = -(y, t') t - (y, t) t'
    DQ = -(t[:, :, None] * np.einsum("ij,ijk->ik", dt, Q)[:, None, :]
           + dt[:, :, None] * np.einsum("ij,ijk->ik", t, Q)[:, None, :])
    QT = np.transpose(Q, (0, 2, 1))
    lam = lin.lam.values[:, None, None]
    A = QT @ B @ Q + lam * (QT @ DQ - QT @ dQ)
    g = -np.einsum("ikj,ik->ij", Q, np.einsum("ijk,ik->ij", Pp, fv))
    return PerpSystem(sol.path.alphas, A, g, B, lin.lam, frames, sol.sbar)


@dataclass(frozen=True, eq=False)
class CollocationResult:
    values: np.ndarray
    residual: float
    pin: np.ndarray
    saddle_slope_defect: float = 0.0


def _collocate(alphas, op, g, pin, deriv_lhs, deriv_rhs, rs, drs, tol=1e-4):
    """Least-squares collocation of ``op @ b = g`` at interior nodes plus boundary and saddle rows.

    ``b`` holds m components per node (node-major).  Extra rows impose
    b(0) = b(1) = 0, the regular value ``pin`` at the saddle and the saddle
    derivative relation ``deriv_lhs @ b'(sbar) = deriv_rhs``.
    """
    n, m = g.shape
    I = np.eye(m)
    inner = np.arange(m, (n - 1) * m)
    E0 = np.zeros((m, n * m))
    E0[:, :m] = I
    E1 = np.zeros((m, n * m))
    E1[:, -m:] = I
    M = np.vstack([op[inner], E0, E1, np.kron(rs[None, :], I)])
    b = np.concatenate([g[1:-1].ravel(), np.zeros(2 * m), pin])
    x = lstsq(M, b, lapack_driver="gelsy")[0]
    res = float(np.linalg.norm(M @ x - b) / max(np.linalg.norm(b), 1.0))
    if not np.isfinite(res) or res > tol:
        raise SolverError(f"collocation residual {res:.3e} exceeds {tol:.1e}")
    values = x.reshape(n, m)
    slope = drs @ values
    defect = float(np.linalg.norm(deriv_lhs @ slope - deriv_rhs) / max(np.linalg.norm(deriv_rhs), 1.0))
    return CollocationResult(values, res, pin, defect)


def solve_perp(sys: PerpSystem, sbar: float | None = None, tol: float = 1e-4) -> CollocationResult:
    """Regular solution of the perpendicular singular ODE in frame coordinates."""
    s = sys.sbar if sbar is None else sbar
    if s != sys.sbar:
        sys = PerpSystem(sys.alphas, sys.A, sys.g, sys.B, sys.lam, sys.frames, s)
    As, dAs, gs, dgs = sys.at_sbar()
    m = As.shape[0]
    sv = np.linalg.svd(As, compute_uv=False)
    if sv[-1] <= 1e-10 * max(sv[0], 1.0):
        raise DegenerateSaddleError("the frozen perpendicular operator at the saddle is singular")
    pin = -np.linalg.solve(As, gs)
    # differentiating lam b' = A b + g at the saddle: (lam'(s) I - A(s)) b'(s) = A'(s) b(s) + g'(s)
    lhs = sys.lam.dprime_sbar * np.eye(m) - As
    rs = np.asarray(interp_row(sys.alphas, s))
    drs = np.asarray(interp_row(sys.alphas, s, 1))
    n = len(sys.alphas)
    # lam_i (D b)_i - A_i b_i
    op = np.kron(np.asarray(diff_matrix(sys.alphas)), np.eye(m)) * np.repeat(sys.lam.values, m)[:, None]
    for i in range(n):
        op[i * m:(i + 1) * m, i * m:(i + 1) * m] -= sys.A[i]
    return _collocate(sys.alphas, op, sys.g, pin, lhs, dAs @ pin + dgs, rs, drs, tol=tol)


def solve_tangential(model: EnergyModel, sol: MepSolution, frames: FrameField | None, psi_perp, f,
                     tol: float = 1e-4) -> CollocationResult:
    """Tangential coefficient of the inverse, given the perpendicular part.

    The equation lam b0' = sigma (b0 - w b0(sbar)) + ... is assembled from the
    same discrete derivative, quadrature and interpolation operators as the
    forward operator, so the arc-length variation of b0 t enters as the
    trapezoid integral of its spline derivative rather than as b0 itself.
    """
    lin = _linearization(model, sol)
    n, N = sol.path.n, sol.path.dim
    a = sol.path.alphas
    fv = _vector_field(f, n, N)
    pp = _vector_field(psi_perp, n, N, "psi_perp")
    t = lin.td.unit
    lam = lin.lam
    sigma = sol.sigma
    w, rs, W = lin.w, lin.rs, lin.W
    Gop = _gamma_operator(lin)
    # tangential slope of a tangential field: u_i = sum_j D_ij (t_i . t_j) b0_j
    U0 = lin.D * (t @ t.T)
    HsT = t @ lin.Hs @ t.T
    op = (w[:, None] * HsT * rs[None, :]
          + sigma * (Gop - w[:, None] * (rs @ Gop)[None, :]) @ U0
          - lam.values[:, None] * (U0 - (W @ U0)[None, :]))
    pp_s = rs @ pp
    u_perp = np.einsum("ij,ij->i", lin.D @ pp, t)
    Ghat = Gop @ u_perp
    dGhat = u_perp - W @ u_perp
    G = sigma * (Ghat - w * (rs @ Ghat)) - lam.values * dGhat
    ft = np.einsum("ij,ij->i", fv, t)
    hs_t = t @ (lin.Hs @ pp_s)
    rhs = ft - w * hs_t - G
    ls = lam.dprime_sbar
    pin = (rs @ ft - rs @ G - lin.ts @ lin.Hs @ pp_s) / ls
    # differentiated equation at the saddle
    c = w * (t @ lin.ts)
    dw_s = float(saddle_weight(sol.sbar, sol.sbar, 1))
    coef = -sigma * dw_s + ls * float(lin.drs @ c)
    drhs = float(lin.drs @ (w * hs_t - ft + G))
    res = _collocate(a, op, rhs[:, None], np.array([pin]), np.array([[ls - sigma]]),
                     np.array([coef * pin + drhs]), rs, lin.drs, tol=tol)
    return CollocationResult(res.values[:, 0], res.residual, res.pin, res.saddle_slope_defect)


def _gamma_operator(lin: _Linearization) -> np.ndarray:
    """Matrix taking node values u to cumtrapz(u) - alpha * trapz(u)."""
    if "gamma_op" not in lin.extra:
        a = lin.alphas
        lin.extra["gamma_op"] = _cumtrapz_matrix(a) - np.outer(a, lin.W)
    return lin.extra["gamma_op"]


# --------------------------------------------------------------------------- linearized operator


def _check_variation(psi, n, N):
    v = _vector_field(psi, n, N, "psi")
    if max(np.linalg.norm(v[0]), np.linalg.norm(v[-1])) > ENDPOINT_TOL:
        raise InputError("variation must vanish at both endpoints")
    return v


def apply_dF(model: EnergyModel, sol: MepSolution, psi, at_mep: bool = True,
             path: DiscretePath | None = None) -> NodeField:
    """Apply the linearized residual to a variation vanishing at the endpoints.

    ``at_mep=True`` uses the form simplified by the MEP identities on
    ``sol.path``.  ``at_mep=False`` differentiates the discrete residual
    exactly, at ``path`` (default ``sol.path``).
    """
    base = sol.path if path is None else path
    n, N = base.n, base.dim
    v = _check_variation(psi, n, N)
    if not at_mep:
        J = jacobian_F(model, sol, base)
        return NodeField(base.alphas, np.einsum("iajb,jb->ia", J, v), "dF")
    if path is not None and path is not sol.path:
        raise InputError("the simplified form is only available at the solution path")
    lin = _linearization(model, sol)
    a = base.alphas
    t = lin.td.unit
    lam = lin.lam.values
    dv = lin.D @ v
    Pp = np.eye(N)[None] - t[:, :, None] * t[:, None, :]
    perp = np.einsum("ijk,ik->ij", Pp, np.einsum("ijk,ik->ij", lin.H, v) - lam[:, None] * dv)
    coupling = lin.w * (t @ (lin.Hs @ (lin.rs @ v)))
    u = np.einsum("ij,ij->i", dv, t)
    total = lin.W @ u
    dgam = _cumtrapz(u, a) - a * total
    dgam_prime = u - total
    along = sol.sigma * (dgam - lin.w * (lin.rs @ dgam)) - lam * dgam_prime
    out = perp + (coupling + along)[:, None] * t
    # every endpoint term carries lambda(0) or lambda(1), zero up to the minimizer tolerance
    out[[0, -1]] = 0.0
    return NodeField(a, out, "dF")


@dataclass(frozen=True, eq=False)
class DFSolution:
    psi: NodeField
    beta_perp: CollocationResult
    beta0: CollocationResult

    @property
    def residual(self) -> float:
        return max(self.beta_perp.residual, self.beta0.residual)


def solve_dF(model: EnergyModel, sol: MepSolution, f, tol: float = 1e-4, details: bool = False):
    """Invert the linearized residual: perpendicular solve, tangential solve, recombination."""
    lin = _linearization(model, sol)
    frames = _frames(lin)
    sys = assemble_perp_system(model, sol, frames, f)
    bp = solve_perp(sys, tol=tol)
    psi_perp = np.einsum("ijk,ik->ij", frames.frames, bp.values)
    b0 = solve_tangential(model, sol, frames, psi_perp, f, tol=tol)
    psi = NodeField(sol.path.alphas, b0.values[:, None] * lin.td.unit + psi_perp, "variation")
    return DFSolution(psi, bp, b0) if details else psi


@dataclass(frozen=True, eq=False)
class GammaEstimate:
    gamma_hat: float
    ratios: np.ndarray
    residuals: np.ndarray

    def trials(self) -> list:
        return [{"trial": i, "ratio": float(r), "residual": float(s)}
                for i, (r, s) in enumerate(zip(self.ratios, self.residuals))]


def estimate_gamma(model: EnergyModel, sol: MepSolution, trials: int = 50, seed: int = 0,
                   scale: float = 1.0, knots: int = 8) -> GammaEstimate:
    """Largest observed ratio of X-norm of the inverse image to Y-norm of the data."""
    if trials < 1:
        raise InputError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    a = sol.path.alphas
    ratios, residuals = [], []
    for _ in range(trials):
        f = random_field(a, sol.path.dim, rng, knots=knots)
        f = scale * f / y_norm(f, sol.sbar)
        out = solve_dF(model, sol, f, details=True)
        ratios.append(x_norm(out.psi) / y_norm(f, sol.sbar))
        residuals.append(out.residual)
    ratios = np.array(ratios)
    return GammaEstimate(float(ratios.max()), ratios, np.array(residuals))
