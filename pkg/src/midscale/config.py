"""
Run configuration: TOML round-trip, validation, hashing and dispatch.

A config looks like::

    experiment = "value_rate"
    seed = 1
    reps = 30
    n_grid = [50, 100, 200, 400, 800]
    eps = 0.1
    out = "out/value_rate"

    [x]
    kind = "uniform-ball"
    d = 4

    [y]
    kind = "finite-support"
    d = 4
    K = 5

    [oracle]
    m = 5000

Only keys relevant to the experiment need to be present.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib
import tomli_w

from .experiments import (
    MIN_REPS,
    ORACLE_RATIO,
    ORACLE_TOL,
    bias_experiment,
    density_error_experiment,
    eps_scan_experiment,
    map_error_experiment,
    oracle_self_consistency,
    population_oracle,
    potential_error_experiment,
    rgg_gap_experiment,
    value_rate_experiment,
    w1_eps_ratio_experiment,
    w1_schedule_experiment,
)
from .measures import CostSpec, GeneratorSpec, generate
from .rgg import QGResult, qg_diagnostic
from .sinkhorn import solve

_ORACLE_FUNCS = {
    "value_rate": value_rate_experiment,
    "bias": bias_experiment,
    "map_error": map_error_experiment,
    "potential_error": potential_error_experiment,
    "density_error": density_error_experiment,
}
ORACLE_EXPERIMENTS = tuple(_ORACLE_FUNCS)
EXPERIMENTS = tuple(ORACLE_EXPERIMENTS) + ("eps_scan", "w1_schedule", "w1_eps_ratio", "rgg_gap", "qg")
COST_FAMILIES = ("sqeuclidean", "euclidean")


class ConfigError(ValueError):
    """A config that parses but is not valid."""


class ConfigParseError(ValueError):
    """A config file that cannot be read or parsed."""


class PreconditionError(RuntimeError):
    """An acceptance precondition (e.g. oracle self-consistency) failed.

    ``result`` holds whatever was computed before the check, for diagnostics;
    it is never written as a run output.
    """

    def __init__(self, message, result=None, **details):
        super().__init__(message)
        self.details = details
        self.result = result


@dataclass
class OracleConfig:
    m: int = 5000
    tol: float = ORACLE_TOL
    sampler: str = "qmc"
    check: Optional[bool] = None  # default: on for value_rate and bias


@dataclass
class RggConfig:
    delta: float = 0.3
    d_nu: int = 1
    c_rgg: float = 1.0
    n_alpha: int = 50


@dataclass
class QGConfig:
    directions: int = 20
    t_grid: list = field(default_factory=lambda: [1e-3, 2e-3, 4e-3])


@dataclass
class RunConfig:
    experiment: str
    x: dict
    y: Optional[dict] = None
    cost: str = "sqeuclidean"
    eps: Optional[float] = None
    eps_grid: Optional[list] = None
    n_grid: Optional[list] = None
    n: Optional[int] = None
    reps: int = 30
    tol: float = 1e-9
    seed: int = 0
    threads: int = 1
    out: str = "out"
    oracle: OracleConfig = field(default_factory=OracleConfig)
    rgg: RggConfig = field(default_factory=RggConfig)
    qg: QGConfig = field(default_factory=QGConfig)

    # -- serialization -----------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in data or "x" not in data:
            raise ConfigError("config needs at least 'experiment' and an [x] generator table")
        for key, sub in (("oracle", OracleConfig), ("rgg", RggConfig), ("qg", QGConfig)):
            raw = data.get(key, {})
            if not isinstance(raw, dict):
                raise ConfigError(f"[{key}] must be a table")
            bad = set(raw) - {f.name for f in fields(sub)}
            if bad:
                raise ConfigError(f"unknown keys in [{key}]: {sorted(bad)}")
            data[key] = sub(**raw)
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, dict):
                v = {kk: vv for kk, vv in v.items() if vv is not None}
            if v is not None:
                out[k] = v
        return out

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigParseError(str(exc)) from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, "rb") as fh:
                text = fh.read().decode("utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigParseError(f"cannot read {path}: {exc}") from exc
        return cls.loads(text)

    def hash(self) -> str:
        """sha256 of the canonical TOML dump."""
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()

    def replace(self, **changes) -> "RunConfig":
        data = self.to_dict()
        data.update({k: v for k, v in changes.items() if v is not None})
        return RunConfig.from_dict(data)

    # -- validation --------------------------------------------------------

    @property
    def spec_x(self) -> GeneratorSpec:
        return GeneratorSpec.from_dict(self.x)

    @property
    def spec_y(self) -> GeneratorSpec:
        return GeneratorSpec.from_dict(self.y if self.y is not None else self.x)

    @property
    def oracle_check(self) -> bool:
        if self.oracle.check is None:
            return self.experiment in ("value_rate", "bias")
        return bool(self.oracle.check)

    def _need(self, *names):
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"experiment '{self.experiment}' needs '{name}'")

    def validate(self):
        e = self.experiment
        if e not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment '{e}'; expected one of {list(EXPERIMENTS)}")
        if self.cost not in COST_FAMILIES:
            raise ConfigError(f"cost must be one of {list(COST_FAMILIES)}")
        try:
            sx, sy = self.spec_x, self.spec_y
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad generator spec: {exc}") from exc
        if sx.d != sy.d:
            raise ConfigError("both generators must share the ambient dimension")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not (isinstance(self.threads, int) and self.threads >= 1):
            raise ConfigError("threads must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if not isinstance(self.reps, int) or self.reps < 1:
            raise ConfigError("reps must be a positive integer")
        if self.eps is not None and not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.eps_grid is not None:
            if len(self.eps_grid) == 0 or any(not v > 0 for v in self.eps_grid):
                raise ConfigError("eps_grid must be a nonempty list of positive values")
        if self.n_grid is not None:
            if len(self.n_grid) == 0 or any(not isinstance(v, int) or v < 2 for v in self.n_grid):
                raise ConfigError("n_grid must list integers >= 2")
            if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
                raise ConfigError("n_grid must be strictly ascending")
        if self.n is not None and (not isinstance(self.n, int) or self.n < 2):
            raise ConfigError("n must be an integer >= 2")

        if e in ORACLE_EXPERIMENTS:
            self._need("eps", "n_grid")
            if self.oracle.m < ORACLE_RATIO * max(self.n_grid):
                raise ConfigError(f"oracle m={self.oracle.m} is below {ORACLE_RATIO} x largest n")
            if not self.oracle.tol > 0:
                raise ConfigError("oracle tol must be positive")
            if self.oracle.sampler not in ("qmc", "iid"):
                raise ConfigError("oracle sampler must be 'qmc' or 'iid'")
        elif e == "eps_scan":
            self._need("eps_grid", "n")
        elif e == "w1_schedule":
            self._need("n_grid")
            if self.cost != "euclidean":
                raise ConfigError("w1 experiments use the euclidean cost")
        elif e == "w1_eps_ratio":
            self._need("eps_grid", "n")
            if self.cost != "euclidean":
                raise ConfigError("w1 experiments use the euclidean cost")
            if any(v >= 1 for v in self.eps_grid):
                raise ConfigError("eps_grid must lie in (0, 1) for w1_eps_ratio")
        elif e == "rgg_gap":
            self._need("n_grid")
            if not self.rgg.delta > 0:
                raise ConfigError("rgg delta must be positive")
            if self.rgg.d_nu < 1 or self.rgg.n_alpha < 1 or not self.rgg.c_rgg > 0:
                raise ConfigError("rgg d_nu, n_alpha and c_rgg must be positive")
        elif e == "qg":
            self._need("eps", "n")
            if self.qg.directions < 1 or any(t < 0 for t in self.qg.t_grid):
                raise ConfigError("qg needs a positive direction count and t >= 0")
        return self

    @property
    def warnings(self) -> list:
        out = []
        if self.reps < MIN_REPS and self.experiment in ORACLE_EXPERIMENTS + ("w1_schedule",):
            out.append(f"reps={self.reps} is below the recommended minimum of {MIN_REPS}; the table is flagged")
        return out


@dataclass
class RunResult:
    tables: list
    extra: dict


def run_experiment(cfg: RunConfig) -> RunResult:
    """Execute ``cfg``. Raises ConvergenceError or PreconditionError on failure."""
    e = cfg.experiment
    sx, sy = cfg.spec_x, cfg.spec_y
    extra = {}
    if e in _ORACLE_FUNCS:
        cost = CostSpec.for_supports(cfg.cost, sx, sy)
        oracle = population_oracle(sx, sy, cfg.oracle.m, cfg.eps, cost, seed=cfg.seed,
                                   tol=cfg.oracle.tol, sampler=cfg.oracle.sampler)
        out = _ORACLE_FUNCS[e](oracle, cfg.n_grid, cfg.reps, seed=cfg.seed, tol=cfg.tol, threads=cfg.threads)
        tables = list(out) if isinstance(out, tuple) else [out]
        extra["oracle"] = {"m": cfg.oracle.m, "value": oracle.value, "sampler": cfg.oracle.sampler}
        if cfg.oracle_check:
            diff = oracle_self_consistency(oracle, sampler=cfg.oracle.sampler)
            bar = float(np.nanmin(np.concatenate([t.standard_errors() for t in tables])))
            extra["oracle"].update(doubling_difference=diff, smallest_error_bar=bar, check_passed=diff < bar)
            if not diff < bar:
                raise PreconditionError(
                    "oracle self-consistency failed: doubling m moved the reference value by more "
                    "than the smallest replicate error bar",
                    result=RunResult(tables, extra), doubling_difference=diff, smallest_error_bar=bar,
                )
    elif e == "eps_scan":
        cost = CostSpec.for_supports(cfg.cost, sx, sy)
        tables = list(eps_scan_experiment(sx, sy, cfg.n, cfg.eps_grid, seed=cfg.seed, cost=cost, tol=cfg.tol).values())
    elif e == "w1_schedule":
        tables = [w1_schedule_experiment(sx, sy, cfg.n_grid, cfg.reps, seed=cfg.seed, tol=cfg.tol, threads=cfg.threads)]
    elif e == "w1_eps_ratio":
        tables = [w1_eps_ratio_experiment(sx, sy, cfg.n, cfg.eps_grid, cfg.reps, seed=cfg.seed, tol=cfg.tol)]
    elif e == "rgg_gap":
        tables = [rgg_gap_experiment(sy, cfg.n_grid, cfg.rgg.delta, cfg.rgg.d_nu, seed=cfg.seed,
                                     n_alpha=cfg.rgg.n_alpha, c_rgg=cfg.rgg.c_rgg)]
    else:
        raise ConfigError(f"experiment '{e}' is not run through 'run'; use the matching subcommand")
    return RunResult(tables, extra)


def run_qg(cfg: RunConfig) -> QGResult:
    """Quadratic-growth diagnostic on one solved ``n x n`` instance drawn from ``cfg``."""
    if cfg.experiment != "qg":
        raise ConfigError('quadratic-growth runs need experiment = "qg"')
    sx, sy = cfg.spec_x, cfg.spec_y
    ss = np.random.SeedSequence([cfg.seed, cfg.n])
    rx, ry, rd = (np.random.default_rng(s) for s in ss.spawn(3))
    X, Y = generate(sx, cfg.n, rx), generate(sy, cfg.n, ry)
    cost = CostSpec.for_supports(cfg.cost, sx, sy)
    w = np.full(cfg.n, 1.0 / cfg.n)
    sol = solve(w, w, cost(X, Y), cfg.eps, tol=cfg.tol)
    return qg_diagnostic(sol, cfg.qg.directions, cfg.qg.t_grid, seed=int(rd.integers(2**31)))
