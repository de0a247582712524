"""Energy landscapes on R^N with analytic gradients and Hessians.

Every model evaluates batches: ``model.gradient(Y)`` accepts a single point of
shape ``(N,)`` or a stack of points of shape ``(k, N)`` and returns arrays with
the matching leading shape.  Models are immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import ConfigurationError, InputError, ModelEvaluationError

__all__ = [
    "EnergyModel",
    "DoubleWell",
    "MuellerBrown",
    "Quadratic",
    "GaussianMixture",
    "SinusoidalBump",
    "PerturbedModel",
    "ScaledModel",
    "FdReport",
    "evaluate",
    "fd_consistency",
    "make_builtin",
    "model_from_config",
    "BUILTINS",
]


class EnergyModel:
    """Base class: subclasses implement the batched ``_energy``, ``_gradient``, ``_hessian``."""

    dim: int
    label: str = "model"

    @property
    def params(self) -> Mapping[str, object]:
        return MappingProxyType({})

    def _as_batch(self, y):
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        Y = y[None, :] if single else y
        if Y.ndim != 2 or Y.shape[1] != self.dim:
            raise InputError(f"{self.label}: expected points of length {self.dim}, got shape {y.shape}")
        return Y, single

    def energy(self, y):
        Y, single = self._as_batch(y)
        out = self._energy(Y)
        return out[0] if single else out

    def gradient(self, y):
        Y, single = self._as_batch(y)
        out = self._gradient(Y)
        return out[0] if single else out

    def hessian(self, y):
        Y, single = self._as_batch(y)
        out = self._hessian(Y)
        return out[0] if single else out

    def _energy(self, Y):  # pragma: no cover - abstract
        raise NotImplementedError

    def _gradient(self, Y):  # pragma: no cover - abstract
        raise NotImplementedError

    def _hessian(self, Y):  # pragma: no cover - abstract
        raise NotImplementedError

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


class DoubleWell(EnergyModel):
    """E(x, y) = (x^2 - 1)^2 + (kappa/2) y^2 on R^2.

    Minimizers (+-1, 0) with Hessian diag(8, kappa); saddle (0, 0) with
    Hessian diag(-4, kappa).  The straight segment between the minimizers is
    the minimum energy path for every kappa > 0.
    """

    label = "dw"

    def __init__(self, kappa: float = 10.0):
        kappa = float(kappa)
        if not np.isfinite(kappa) or kappa <= 0.0:
            raise ConfigurationError(f"dw: kappa must be positive, got {kappa}")
        self.kappa = kappa
        self.dim = 2

    @property
    def params(self):
        return MappingProxyType({"kappa": self.kappa})

    def _energy(self, Y):
        x, y = Y[:, 0], Y[:, 1]
        return (x**2 - 1.0) ** 2 + 0.5 * self.kappa * y**2

    def _gradient(self, Y):
        x, y = Y[:, 0], Y[:, 1]
        return np.stack([4.0 * x * (x**2 - 1.0), self.kappa * y], axis=1)

    def _hessian(self, Y):
        H = np.zeros((len(Y), 2, 2))
        H[:, 0, 0] = 12.0 * Y[:, 0] ** 2 - 4.0
        H[:, 1, 1] = self.kappa
        return H


def _load_mueller_brown_constants():
    text = resources.files("mepstab.data").joinpath("mueller_brown.json").read_text()
    raw = json.loads(text)
    return {k: np.asarray(v, dtype=float) for k, v in raw.items()}


class MuellerBrown(EnergyModel):
    """The four-Gaussian Mueller-Brown surface with the standard constants."""

    label = "mueller_brown"

    def __init__(self, scale: float = 1.0):
        self.scale = float(scale)
        if not np.isfinite(self.scale) or self.scale <= 0.0:
            raise ConfigurationError("mueller_brown: scale must be positive")
        self.dim = 2
        c = _load_mueller_brown_constants()
        self._A, self._a, self._b, self._c = c["A"], c["a"], c["b"], c["c"]
        self._x0, self._y0 = c["x0"], c["y0"]

    @property
    def params(self):
        return MappingProxyType({"scale": self.scale})

    def _terms(self, Y):
        dx = Y[:, 0:1] - self._x0
        dy = Y[:, 1:2] - self._y0
        ex = self._A * np.exp(self._a * dx * dx + self._b * dx * dy + self._c * dy * dy)
        px = 2.0 * self._a * dx + self._b * dy
        py = self._b * dx + 2.0 * self._c * dy
        return ex, px, py

    def _energy(self, Y):
        ex, _, _ = self._terms(Y)
        return self.scale * ex.sum(axis=1)

    def _gradient(self, Y):
        ex, px, py = self._terms(Y)
        return self.scale * np.stack([(ex * px).sum(axis=1), (ex * py).sum(axis=1)], axis=1)

    def _hessian(self, Y):
        ex, px, py = self._terms(Y)
        H = np.empty((len(Y), 2, 2))
        H[:, 0, 0] = (ex * (px * px + 2.0 * self._a)).sum(axis=1)
        H[:, 0, 1] = (ex * (px * py + self._b)).sum(axis=1)
        H[:, 1, 0] = H[:, 0, 1]
        H[:, 1, 1] = (ex * (py * py + 2.0 * self._c)).sum(axis=1)
        return self.scale * H


class Quadratic(EnergyModel):
    """E(y) = 1/2 y^T M y for a symmetric positive definite M."""

    label = "quadratic"

    def __init__(self, matrix):
        M = np.atleast_2d(np.asarray(matrix, dtype=float))
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ConfigurationError("quadratic: matrix must be square")
        if not np.allclose(M, M.T, rtol=1e-12, atol=1e-14):
            raise ConfigurationError("quadratic: matrix must be symmetric")
        if np.linalg.eigvalsh(M).min() <= 0.0:
            raise ConfigurationError("quadratic: matrix must be positive definite")
        self.matrix = M
        self.matrix.setflags(write=False)
        self.dim = M.shape[0]

    @property
    def params(self):
        return MappingProxyType({"matrix": self.matrix.tolist()})

    def _energy(self, Y):
        return 0.5 * np.einsum("ki,ij,kj->k", Y, self.matrix, Y)

    def _gradient(self, Y):
        return Y @ self.matrix

    def _hessian(self, Y):
        return np.broadcast_to(self.matrix, (len(Y),) + self.matrix.shape).copy()


class GaussianMixture(EnergyModel):
    """Isotropic Gaussian wells at seeded random centres plus a weak confinement."""

    label = "gaussian_mixture"

    def __init__(self, dim: int = 2, wells: int = 3, seed: int = 0, depth: float = 1.0,
                 width: float = 0.5, spread: float = 1.5, confinement: float = 0.05):
        dim, wells = int(dim), int(wells)
        if dim < 1 or wells < 1:
            raise ConfigurationError("gaussian_mixture: dim and wells must be positive")
        if width <= 0.0 or depth <= 0.0 or confinement < 0.0:
            raise ConfigurationError("gaussian_mixture: width, depth must be positive, confinement >= 0")
        rng = np.random.default_rng(int(seed))
        self.dim = dim
        self.centres = rng.uniform(-spread, spread, size=(wells, dim))
        self.depths = depth * rng.uniform(0.5, 1.5, size=wells)
        self.width = float(width)
        self.confinement = float(confinement)
        self._params = {"dim": dim, "wells": wells, "seed": int(seed), "depth": float(depth),
                        "width": float(width), "spread": float(spread),
                        "confinement": float(confinement)}

    @property
    def params(self):
        return MappingProxyType(self._params)

    def _parts(self, Y):
        d = Y[:, None, :] - self.centres[None, :, :]
        w2 = self.width**2
        g = self.depths * np.exp(-0.5 * (d**2).sum(axis=2) / w2)
        return d, g, w2

    def _energy(self, Y):
        _, g, _ = self._parts(Y)
        return -g.sum(axis=1) + 0.5 * self.confinement * (Y**2).sum(axis=1)

    def _gradient(self, Y):
        d, g, w2 = self._parts(Y)
        return np.einsum("kw,kwi->ki", g, d) / w2 + self.confinement * Y

    def _hessian(self, Y):
        d, g, w2 = self._parts(Y)
        eye = np.eye(self.dim)
        H = g.sum(axis=1)[:, None, None] * eye / w2
        H -= np.einsum("kw,kwi,kwj->kij", g, d, d) / w2**2
        return H + self.confinement * eye


class SinusoidalBump(EnergyModel):
    """W(x, y) = amplitude * sin(kx x) cos(ky y) on R^2, the default perturbation."""

    label = "sin_bump"

    def __init__(self, kx: float = 3.0, ky: float = 2.0, amplitude: float = 1.0):
        self.kx, self.ky, self.amplitude = float(kx), float(ky), float(amplitude)
        self.dim = 2

    @property
    def params(self):
        return MappingProxyType({"kx": self.kx, "ky": self.ky, "amplitude": self.amplitude})

    def _energy(self, Y):
        return self.amplitude * np.sin(self.kx * Y[:, 0]) * np.cos(self.ky * Y[:, 1])

    def _gradient(self, Y):
        sx, cx = np.sin(self.kx * Y[:, 0]), np.cos(self.kx * Y[:, 0])
        sy, cy = np.sin(self.ky * Y[:, 1]), np.cos(self.ky * Y[:, 1])
        return self.amplitude * np.stack([self.kx * cx * cy, -self.ky * sx * sy], axis=1)

    def _hessian(self, Y):
        sx, cx = np.sin(self.kx * Y[:, 0]), np.cos(self.kx * Y[:, 0])
        sy, cy = np.sin(self.ky * Y[:, 1]), np.cos(self.ky * Y[:, 1])
        H = np.empty((len(Y), 2, 2))
        H[:, 0, 0] = -self.kx**2 * sx * cy
        H[:, 0, 1] = -self.kx * self.ky * cx * sy
        H[:, 1, 0] = H[:, 0, 1]
        H[:, 1, 1] = -self.ky**2 * sx * cy
        return self.amplitude * H


class ScaledModel(EnergyModel):
    """c * E for a constant c (used to flip the sign of a perturbation)."""

    def __init__(self, model: EnergyModel, factor: float):
        self.model, self.factor = model, float(factor)
        self.dim = model.dim
        self.label = f"{factor:g}*{model.label}"

    @property
    def params(self):
        return MappingProxyType({"factor": self.factor, "model": self.model.label})

    def _energy(self, Y):
        return self.factor * self.model._energy(Y)

    def _gradient(self, Y):
        return self.factor * self.model._gradient(Y)

    def _hessian(self, Y):
        return self.factor * self.model._hessian(Y)


@dataclass(frozen=True, eq=False)
class PerturbedModel(EnergyModel):
    """E_delta = E + delta * W, optionally restricted to a coordinate subspace.

    ``mask`` is a boolean vector selecting the retained coordinates.  When
    present, every evaluation first projects the point onto that subspace and
    the gradient and Hessian are the chain-rule restrictions.
    """

    base: EnergyModel
    bump: EnergyModel
    delta: float
    mask: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.base.dim != self.bump.dim:
            raise InputError("perturbation must act on the same dimension as the base model")
        if not np.isfinite(self.delta) or self.delta < 0.0:
            raise InputError(f"delta must be a non-negative amplitude, got {self.delta}")
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != (self.base.dim,):
                raise InputError("mask must be a boolean vector of length dim")
            m.setflags(write=False)
            object.__setattr__(self, "mask", m)

    @property
    def dim(self):
        return self.base.dim

    @property
    def label(self):
        return f"{self.base.label}+{self.delta:g}*{self.bump.label}"

    @property
    def params(self):
        return MappingProxyType({"delta": self.delta, "base": self.base.label, "bump": self.bump.label})

    def project(self, Y):
        if self.mask is None:
            return Y
        return np.where(self.mask, Y, 0.0)

    def _energy(self, Y):
        P = self.project(Y)
        return self.base._energy(P) + self.delta * self.bump._energy(P)

    def _gradient(self, Y):
        P = self.project(Y)
        g = self.base._gradient(P) + self.delta * self.bump._gradient(P)
        return self.project(g)

    def _hessian(self, Y):
        P = self.project(Y)
        H = self.base._hessian(P) + self.delta * self.bump._hessian(P)
        if self.mask is not None:
            m = self.mask.astype(float)
            H = H * m[None, :, None] * m[None, None, :]
        return H


def evaluate(model: EnergyModel, y):
    """Return ``(energy, gradient, hessian)`` at a single point, Hessian symmetrized."""
    y = np.asarray(y, dtype=float)
    if y.shape != (model.dim,):
        raise InputError(f"{model.label}: expected a point of length {model.dim}, got shape {y.shape}")
    e = float(model.energy(y))
    g = np.asarray(model.gradient(y), dtype=float)
    H = np.asarray(model.hessian(y), dtype=float)
    H = 0.5 * (H + H.T)
    if not (np.isfinite(e) and np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
        raise ModelEvaluationError(f"{model.label}: non-finite evaluation at {y}")
    return e, g, H


@dataclass(frozen=True)
class FdReport:
    grad_error: float
    hess_error: float
    h: float


def fd_consistency(model: EnergyModel, y, h: float = 1e-5) -> FdReport:
    """Compare analytic derivatives with centred differences.

    Errors are relative to ``max(1, |reference|)`` so that vanishing
    derivatives do not blow up the quotient.
    """
    if h <= 0:
        raise InputError("finite-difference step must be positive")
    _, g, H = evaluate(model, y)
    y = np.asarray(y, dtype=float)
    n = model.dim
    steps = h * np.eye(n)
    plus, minus = y + steps, y - steps
    g_fd = (model.energy(plus) - model.energy(minus)) / (2 * h)
    H_fd = ((model.gradient(plus) - model.gradient(minus)) / (2 * h)).T
    H_fd = 0.5 * (H_fd + H_fd.T)
    grad_err = np.max(np.abs(g - g_fd)) / max(1.0, np.max(np.abs(g)))
    hess_err = np.max(np.abs(H - H_fd)) / max(1.0, np.max(np.abs(H)))
    return FdReport(float(grad_err), float(hess_err), h)


def _dw(params):
    return DoubleWell(kappa=params.get("kappa", 10.0))


def _mb(params):
    return MuellerBrown(scale=params.get("scale", 1.0))


def _quadratic(params):
    if "matrix" in params:
        M = params["matrix"]
    elif "diag" in params:
        M = np.diag(np.asarray(params["diag"], dtype=float))
    else:
        M = np.eye(int(params.get("dim", 2)))
    return Quadratic(M)


def _gm(params):
    return GaussianMixture(**params)


def _bump(params):
    return SinusoidalBump(**params)


BUILTINS = {
    "dw": (_dw, {"kappa"}),
    "mueller_brown": (_mb, {"scale"}),
    "quadratic": (_quadratic, {"matrix", "diag", "dim"}),
    "gaussian_mixture": (_gm, {"dim", "wells", "seed", "depth", "width", "spread", "confinement"}),
    "sin_bump": (_bump, {"kx", "ky", "amplitude"}),
}


def make_builtin(name: str, params: Mapping[str, object] | None = None) -> EnergyModel:
    """Construct a built-in landscape by name.

    >>> make_builtin("dw", {"kappa": 10.0}).hessian([0.0, 0.0]).tolist()
    [[-4.0, 0.0], [0.0, 10.0]]
    """
    params = dict(params or {})
    if name not in BUILTINS:
        raise ConfigurationError(f"unknown model {name!r}; choose from {sorted(BUILTINS)}")
    factory, allowed = BUILTINS[name]
    unknown = set(params) - allowed
    if unknown:
        raise ConfigurationError(f"{name}: unknown parameters {sorted(unknown)}")
    try:
        return factory(params)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"{name}: invalid parameters ({exc})") from exc


def model_from_config(block: Mapping[str, object]) -> EnergyModel:
    """Build a model from ``{"name": ..., "params": {...}}``."""
    if "name" not in block:
        raise ConfigurationError("model block needs a 'name'")
    extra = set(block) - {"name", "params"}
    if extra:
        raise ConfigurationError(f"model block: unknown keys {sorted(extra)}")
    return make_builtin(str(block["name"]), block.get("params") or {})

