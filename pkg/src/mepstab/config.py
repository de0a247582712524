"""Experiment configuration: one JSON document, validated into frozen dataclasses.

Unknown keys are rejected at every level.  Leaf values can be overridden with
dotted paths, e.g. ``solver.tol=1e-9``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields
from typing import Any

from .errors import ConfigurationError
from .landscape import EnergyModel, model_from_config

__all__ = [
    "ModelConfig",
    "SolverConfig",
    "StabilityConfig",
    "PerturbationConfig",
    "CounterexampleConfig",
    "OutputConfig",
    "ExperimentConfig",
    "apply_overrides",
    "load_config",
    "DEFAULT_ENDPOINTS",
]

# seeds for the minimizers of the built-in landscapes with a canonical pair
DEFAULT_ENDPOINTS = {
    "dw": ([-1.0, 0.0], [1.0, 0.0]),
    "mueller_brown": ([-0.558, 1.442], [0.623, 0.028]),
}


def _from_dict(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigurationError(f"{where}: {exc}") from None


def _positive(where, **values):
    for k, v in values.items():
        if v is None:
            continue
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            raise ConfigurationError(f"{where}.{k} must be a positive number, got {v!r}")


def _point_pair(value, where):
    if value is None:
        return None
    try:
        a, b = value
        return [float(x) for x in a], [float(x) for x in b]
    except (TypeError, ValueError):
        raise ConfigurationError(f"{where} must be a pair of points") from None


@dataclass(frozen=True)
class ModelConfig:
    name: str = "dw"
    params: dict = field(default_factory=dict)

    def build(self) -> EnergyModel:
        return model_from_config({"name": self.name, "params": self.params})


@dataclass(frozen=True)
class SolverConfig:
    n: int = 101
    tol: float = 1e-8
    max_iters: int = 20000
    dt_safety: float = 0.5
    endpoints: Any = None
    init_path: str | None = None

    def __post_init__(self):
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 11:
            raise ConfigurationError(f"solver.n must be an integer >= 11, got {self.n!r}")
        _positive("solver", tol=self.tol, max_iters=self.max_iters, dt_safety=self.dt_safety)
        object.__setattr__(self, "endpoints", _point_pair(self.endpoints, "solver.endpoints"))


@dataclass(frozen=True)
class StabilityConfig:
    trials: int = 50
    seed: int = 0
    knots: int = 8
    collocation_tol: float = 1e-4

    def __post_init__(self):
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigurationError("stability.trials must be a positive integer")
        if not isinstance(self.seed, int):
            raise ConfigurationError("stability.seed must be an integer")
        if not isinstance(self.knots, int) or self.knots < 1:
            raise ConfigurationError("stability.knots must be a positive integer")
        _positive("stability", collocation_tol=self.collocation_tol)


@dataclass(frozen=True)
class PerturbationConfig:
    deltas: tuple = (0.0, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2)
    epsilon: float | None = None
    bump: dict = field(default_factory=lambda: {"name": "sin_bump", "params": {"kx": 3.0, "ky": 2.0}})
    probes: int = 20
    seed: int = 0
    mask: list | None = None

    def __post_init__(self):
        try:
            deltas = tuple(float(d) for d in self.deltas)
        except (TypeError, ValueError):
            raise ConfigurationError("perturbation.deltas must be a list of numbers") from None
        if not deltas:
            raise ConfigurationError("perturbation.deltas must not be empty")
        if any(not d >= 0 for d in deltas):
            raise ConfigurationError("perturbation.deltas must be non-negative")
        object.__setattr__(self, "deltas", deltas)
        _positive("perturbation", epsilon=self.epsilon, probes=self.probes)
        if not isinstance(self.bump, dict):
            raise ConfigurationError("perturbation.bump must be a model block")

    def build_bump(self) -> EnergyModel:
        return model_from_config(self.bump)


@dataclass(frozen=True)
class CounterexampleConfig:
    ns: tuple = (2, 4, 8, 16, 32)
    eta0: float = 0.02
    grid: int = 201

    def __post_init__(self):
        object.__setattr__(self, "ns", tuple(int(n) for n in self.ns))
        _positive("counterexample", eta0=self.eta0, grid=self.grid)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = ("csv", "json", "svg")

    def __post_init__(self):
        fm = tuple(self.formats)
        bad = set(fm) - {"csv", "json", "svg"}
        if bad:
            raise ConfigurationError(f"output.formats: unknown formats {sorted(bad)}")
        object.__setattr__(self, "formats", fm)


_SECTIONS = {
    "model": ModelConfig,
    "solver": SolverConfig,
    "stability": StabilityConfig,
    "perturbation": PerturbationConfig,
    "counterexample": CounterexampleConfig,
    "output": OutputConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    stability: StabilityConfig = field(default_factory=StabilityConfig)
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    counterexample: CounterexampleConfig = field(default_factory=CounterexampleConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("configuration must be a JSON object")
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigurationError(f"unknown sections {sorted(unknown)}")
        cfg = cls(**{k: _from_dict(c, data.get(k), k) for k, c in _SECTIONS.items()})
        cfg.model.build()  # validates name and parameters
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def endpoints(self):
        if self.solver.endpoints is not None:
            return self.solver.endpoints
        if self.model.name in DEFAULT_ENDPOINTS:
            return DEFAULT_ENDPOINTS[self.model.name]
        raise ConfigurationError(f"solver.endpoints is required for model {self.model.name!r}")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides) -> dict:
    """Return a copy of ``data`` with ``key.path=value`` overrides applied.

    >>> apply_overrides({"solver": {"tol": 1e-8}}, ["solver.tol=1e-9", "model.name=dw"])
    {'solver': {'tol': 1e-09}, 'model': {'name': 'dw'}}
    """
    out = copy.deepcopy(data)
    for item in overrides:
        item = item[2:] if item.startswith("--") else item
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} must look like key.path=value")
        key, value = item.split("=", 1)
        parts = key.split(".")
        if not all(parts):
            raise ConfigurationError(f"bad override key {key!r}")
        node = out
        for p in parts[:-1]:
            nxt = node.setdefault(p, {})
            if not isinstance(nxt, dict):
                raise ConfigurationError(f"override {key!r} descends into a non-object")
            node = nxt
        node[parts[-1]] = _parse_value(value)
    return out


def load_config(path=None, overrides=()) -> ExperimentConfig:
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read configuration {path}: {exc}") from None
    return ExperimentConfig.from_dict(apply_overrides(data, overrides))
