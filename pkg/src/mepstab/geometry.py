"""Discrete curves on a parameter grid in [0, 1].

All derivatives along the parameter come from not-a-knot cubic splines
through the node values; all integrals along the parameter use the trapezoid
rule.  Grids are uniform for paths produced by the solvers, but every helper
here accepts any strictly increasing grid with endpoints 0 and 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from .errors import DegeneratePathError, InputError, NotInYError

__all__ = [
    "DiscretePath",
    "TangentData",
    "NodeField",
    "uniform_alphas",
    "spline",
    "node_derivative",
    "diff_matrix",
    "interp_row",
    "trapezoid_weights",
    "tangent_field",
    "gamma",
    "reparameterize",
    "x_norm",
    "y_norm",
    "random_field",
]

BC = "not-a-knot"
Y_MEMBERSHIP_TOL = 1e-10


def uniform_alphas(n: int) -> np.ndarray:
    if n < 4:
        raise InputError(f"need at least 4 nodes, got {n}")
    return np.linspace(0.0, 1.0, n)


def _check_alphas(alphas):
    a = np.asarray(alphas, dtype=float)
    if a.ndim != 1 or len(a) < 4:
        raise InputError("parameter grid must be 1-D with at least 4 nodes")
    if a[0] != 0.0 or a[-1] != 1.0 or np.any(np.diff(a) <= 0.0):
        raise InputError("parameter grid must increase strictly from 0 to 1")
    return a


def spline(alphas, values) -> CubicSpline:
    return CubicSpline(alphas, values, axis=0, bc_type=BC)


def node_derivative(alphas, values, order: int = 1) -> np.ndarray:
    """Spline derivative of ``values`` evaluated back at the nodes."""
    return spline(alphas, values)(alphas, order)


@lru_cache(maxsize=64)
def _diff_matrix_cached(key: bytes, order: int) -> np.ndarray:
    alphas = np.frombuffer(key, dtype=float)
    n = len(alphas)
    M = CubicSpline(alphas, np.eye(n), axis=0, bc_type=BC)(alphas, order)
    M.setflags(write=False)
    return M


def diff_matrix(alphas, order: int = 1) -> np.ndarray:
    """Matrix D with ``D @ v`` equal to the spline derivative of v at the nodes."""
    a = np.ascontiguousarray(alphas, dtype=float)
    return _diff_matrix_cached(a.tobytes(), order)


def interp_row(alphas, s: float, order: int = 0) -> np.ndarray:
    """Row r with ``r @ v`` equal to the spline (or its derivative) of v at s."""
    a = np.ascontiguousarray(alphas, dtype=float)
    n = len(a)
    return CubicSpline(a, np.eye(n), axis=0, bc_type=BC)(s, order)


def trapezoid_weights(alphas) -> np.ndarray:
    h = np.diff(alphas)
    w = np.zeros(len(alphas))
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def _cumtrapz(values, alphas):
    return cumulative_trapezoid(values, alphas, axis=0, initial=0.0)


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """A curve sampled at parameters ``alphas`` with pinned endpoints.

    ``nodes[0]`` and ``nodes[-1]`` are the endpoint configurations.  Paths
    built with :meth:`uniform` have ``alphas = linspace(0, 1, n)``.
    """

    alphas: np.ndarray
    nodes: np.ndarray

    def __post_init__(self):
        a = _check_alphas(self.alphas)
        y = np.array(self.nodes, dtype=float)
        if y.ndim != 2 or y.shape[0] != len(a):
            raise InputError(f"nodes must have shape ({len(a)}, N), got {y.shape}")
        if not np.all(np.isfinite(y)):
            raise InputError("path nodes must be finite")
        steps = np.linalg.norm(np.diff(y, axis=0), axis=1)
        if np.any(steps == 0.0):
            i = int(np.flatnonzero(steps == 0.0)[0])
            raise DegeneratePathError(f"nodes {i} and {i + 1} coincide")
        a = a.copy()
        a.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "nodes", y)

    @classmethod
    def uniform(cls, nodes) -> "DiscretePath":
        nodes = np.asarray(nodes, dtype=float)
        return cls(uniform_alphas(len(nodes)), nodes)

    @classmethod
    def from_function(cls, func, n: int | None = None, alphas=None) -> "DiscretePath":
        a = uniform_alphas(n) if alphas is None else np.asarray(alphas, dtype=float)
        return cls(a, np.array([func(s) for s in a], dtype=float))

    @classmethod
    def straight(cls, ya, yb, n: int) -> "DiscretePath":
        ya, yb = np.asarray(ya, dtype=float), np.asarray(yb, dtype=float)
        a = uniform_alphas(n)
        return cls(a, ya[None, :] + a[:, None] * (yb - ya)[None, :])

    @property
    def n(self) -> int:
        return len(self.alphas)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def ya(self) -> np.ndarray:
        return self.nodes[0]

    @property
    def yb(self) -> np.ndarray:
        return self.nodes[-1]

    @property
    def is_uniform(self) -> bool:
        return bool(np.max(np.abs(self.alphas - np.linspace(0.0, 1.0, self.n))) <= 1e-14)

    def spline(self) -> CubicSpline:
        return spline(self.alphas, self.nodes)

    def __call__(self, s, order: int = 0):
        return self.spline()(s, order)

    def with_nodes(self, nodes) -> "DiscretePath":
        return DiscretePath(self.alphas, nodes)


@dataclass(frozen=True, eq=False)
class NodeField:
    """One scalar or vector per grid node; ``role`` is a free-form tag."""

    alphas: np.ndarray
    values: np.ndarray
    role: str = "field"

    def __post_init__(self):
        a = _check_alphas(self.alphas)
        v = np.asarray(self.values, dtype=float)
        if v.shape[0] != len(a):
            raise InputError(f"field has {v.shape[0]} values for {len(a)} nodes")
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "values", v)

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 2

    def derivative(self) -> np.ndarray:
        return node_derivative(self.alphas, self.values)

    def at(self, s: float, order: int = 0):
        return spline(self.alphas, self.values)(s, order)

    def _with(self, values, role=None):
        return NodeField(self.alphas, values, self.role if role is None else role)

    def __add__(self, other):
        return self._with(self.values + _values(other))

    def __sub__(self, other):
        return self._with(self.values - _values(other))

    def __mul__(self, c):
        return self._with(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self._with(-self.values)


def _values(x):
    return x.values if isinstance(x, NodeField) else np.asarray(x, dtype=float)


def _as_field(field, alphas=None) -> NodeField:
    if isinstance(field, NodeField):
        return field
    v = np.asarray(field, dtype=float)
    return NodeField(uniform_alphas(len(v)) if alphas is None else alphas, v)


def _pointwise_norm(v, vector: bool):
    v = np.asarray(v)
    return np.linalg.norm(v, axis=-1) if vector else np.abs(v)


@dataclass(frozen=True, eq=False)
class TangentData:
    velocity: np.ndarray
    speed: np.ndarray
    unit: np.ndarray
    unit_derivative: np.ndarray
    acceleration: np.ndarray
    length: float


def tangent_field(path: DiscretePath) -> TangentData:
    """Spline velocity, unit tangent and its derivative at every node."""
    S = path.spline()
    v = S(path.alphas, 1)
    acc = S(path.alphas, 2)
    speed = np.linalg.norm(v, axis=1)
    scale = max(np.max(speed), 1e-300)
    if np.any(speed <= 1e-12 * scale) or not np.all(np.isfinite(speed)):
        i = int(np.argmin(speed))
        raise DegeneratePathError(f"zero speed at node {i} (alpha={path.alphas[i]:.6g})")
    t = v / speed[:, None]
    along = np.einsum("ij,ij->i", acc, t)
    dt = (acc - along[:, None] * t) / speed[:, None]
    length = float(trapezoid_weights(path.alphas) @ speed)
    return TangentData(v, speed, t, dt, acc, length)


def gamma_values(alphas, speed) -> np.ndarray:
    cum = _cumtrapz(speed, alphas)
    g = cum - alphas * cum[-1]
    g[0] = 0.0
    g[-1] = 0.0
    return g


def gamma(path: DiscretePath, tangents: TangentData | None = None) -> NodeField:
    """Arc-length defect: cumulative length minus alpha times total length."""
    if tangents is None:
        # only the speed is needed, so a vanishing speed at an endpoint is allowed
        speed = np.linalg.norm(path.spline()(path.alphas, 1), axis=1)
    else:
        speed = tangents.speed
    return NodeField(path.alphas, gamma_values(path.alphas, speed), "gamma")


GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _arc_length_to(S, left, right):
    """Integral of |S'| from ``left`` to ``right`` (vectorized, 8-point Gauss)."""
    left, right = np.atleast_1d(left), np.atleast_1d(right)
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    pts = mid[:, None] + half[:, None] * GAUSS_NODES[None, :]
    sp = np.linalg.norm(S(pts.ravel(), 1), axis=1).reshape(pts.shape)
    return half * (sp @ GAUSS_WEIGHTS)


def arc_length_table(path: DiscretePath):
    """Cumulative spline arc length at the nodes (accurate quadrature)."""
    S = path.spline()
    seg = _arc_length_to(S, path.alphas[:-1], path.alphas[1:])
    return S, np.concatenate([[0.0], np.cumsum(seg)])


def reparameterize(path: DiscretePath) -> DiscretePath:
    """Resample the spline curve at equal arc length on the same grid."""
    S, cum = arc_length_table(path)
    L = cum[-1]
    a = path.alphas
    targets = a[1:-1] * L
    k = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(a) - 2)
    seg = cum[k + 1] - cum[k]
    left, right = a[k], a[k + 1]
    s = left + (targets - cum[k]) / seg * (right - left)
    for _ in range(30):
        resid = cum[k] + _arc_length_to(S, left, s) - targets
        sp = np.linalg.norm(S(s, 1), axis=1)
        step = resid / sp
        s = np.clip(s - step, left, right)
        if np.max(np.abs(step)) < 1e-15:
            break
    nodes = np.empty_like(path.nodes)
    nodes[0], nodes[-1] = path.nodes[0], path.nodes[-1]
    nodes[1:-1] = S(s)
    return DiscretePath(a, nodes)


def x_norm(field) -> float:
    """Sup of |f| plus sup of |f'| over the nodes."""
    f = _as_field(field)
    vec = f.is_vector
    return float(np.max(_pointwise_norm(f.values, vec))
                 + np.max(_pointwise_norm(f.derivative(), vec)))


def y_norm(field, sbar: float, *, tol: float = Y_MEMBERSHIP_TOL) -> float:
    """Weighted sup norm with singular weights at 0, 1 and ``sbar``.

    Singular quotients are replaced by their limits, the spline derivatives
    at 0, 1 and ``sbar``.  The node nearest ``sbar`` is represented by the
    derivative as well.
    """
    f = _as_field(field)
    a, v, vec = f.alphas, f.values, f.is_vector
    if not 0.0 < sbar < 1.0:
        raise InputError(f"sbar must lie in (0, 1), got {sbar}")
    if np.max(_pointwise_norm(v[[0, -1]], vec)) > tol:
        raise NotInYError("field does not vanish at the endpoints")
    S = spline(a, v)
    ends = _pointwise_norm(S(np.array([0.0, 1.0]), 1), vec)
    inner = _pointwise_norm(v[1:-1], vec) / np.abs(a[1:-1] * (a[1:-1] - 1.0))
    first = max(np.max(inner), np.max(ends))
    fs = S(sbar)
    ds = float(_pointwise_norm(S(np.array([sbar]), 1), vec)[0])
    nearest = int(np.argmin(np.abs(a - sbar)))
    mask = np.ones(len(a), dtype=bool)
    mask[nearest] = False
    quot = _pointwise_norm(v[mask] - fs, vec) / np.abs(a[mask] - sbar)
    second = max(np.max(quot), ds)
    return float(first + second)


def random_field(alphas, dim: int | None, rng: np.random.Generator, knots: int = 8,
                 scale: float = 1.0) -> np.ndarray:
    """Random C^2 field vanishing at 0 and 1, sampled on ``alphas``.

    Values at ``knots`` interior knots are standard normal; the field is the
    not-a-knot spline through them and the zero endpoint values.
    """
    k = np.linspace(0.0, 1.0, knots + 2)
    shape = (knots,) if dim is None else (knots, dim)
    vals = np.zeros((knots + 2,) + shape[1:])
    vals[1:-1] = scale * rng.standard_normal(shape)
    out = CubicSpline(k, vals, axis=0, bc_type=BC)(alphas)
    out[0] = 0.0
    out[-1] = 0.0
    return out
