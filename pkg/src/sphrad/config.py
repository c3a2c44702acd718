"""Flat key-value experiment configuration.

Grammar (one assignment per line):

    key = value          # '#' starts a comment, blank lines are ignored

Keys are lowercase dot-separated words, values are typed per key: integers,
floats, booleans (``true``/``false``), bare strings, comma-separated float
vectors, or semicolon-separated lists of comma vectors (matrices / point
lists). Parsing is strict: unknown keys, duplicate keys, malformed values,
and dimension mismatches are all hard errors, so a silently misread
configuration can never corrupt scientific output.

The full key reference lives in the README.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .builtin import beta_gaussian_model, half_space_constraint, norm_ball_constraint
from .errors import ConfigError
from .estimators import SamplePlan
from .model import Constraint, FiniteMixture, GaussianParams, ParameterModel, \
    mixture_as_parameter_model
from .oracle import QuadratureSpec

__all__ = ["ExperimentConfig", "load_config", "parse_flat", "build_experiment"]

_KEY_RE = re.compile(r"^[a-z][a-z0-9_]*(\.[a-z0-9_]+)*$")

# key -> value type; 'mean'/'chol' families are indexed per mixture component
_SCHEMA: dict[str, str] = {
    "model.kind": "str",
    "model.delta": "float",
    "model.eta0": "float",
    "model.components": "int",
    "model.weights": "floats",
    "constraint.kind": "str",
    "constraint.dimension": "int",
    "constraint.offset": "float",
    "constraint.normal": "floats",
    "constraint.direction": "floats",
    "constraint.level": "float",
    "grid.start": "float",
    "grid.stop": "float",
    "grid.step": "float",
    "grid.points": "matrix",
    "plan.samples": "int",
    "plan.seed": "int",
    "plan.sampler": "str",
    "plan.burnin": "int",
    "plan.thinning": "int",
    "plan.proposal_scale": "float",
    "run.crn": "bool",
    "run.workers": "int",
    "oracle.enable": "bool",
    "oracle.nodes": "int",
    "oracle.tol": "float",
    "naive.enable": "bool",
    "naive.samples": "int",
    "slater.gamma0": "float",
    "slater.samples": "int",
    "convergence.ladder": "ints",
    "convergence.replications": "int",
}
_INDEXED_RE = re.compile(r"^model\.(mean|chol)\.([1-9][0-9]*)$")


def _parse_value(key: str, kind: str, raw: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw not in ("true", "false"):
                raise ValueError
            return raw == "true"
        if kind == "str":
            return raw
        if kind == "floats":
            return [float(tok) for tok in raw.split(",")]
        if kind == "ints":
            return [int(tok) for tok in raw.split(",")]
        if kind == "matrix":
            return [[float(tok) for tok in row.split(",")]
                    for row in raw.split(";")]
    except ValueError:
        raise ConfigError(f"key '{key}': cannot parse {raw!r} as {kind}") from None
    raise AssertionError(f"unhandled kind {kind}")  # pragma: no cover


def parse_flat(text: str) -> dict:
    """Parse the flat key-value format into a typed dict, strictly."""
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if not _KEY_RE.match(key):
            raise ConfigError(f"line {lineno}: malformed key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        if key in _SCHEMA:
            out[key] = _parse_value(key, _SCHEMA[key], raw)
        elif _INDEXED_RE.match(key):
            kind = "floats" if ".mean." in key else "matrix"
            out[key] = _parse_value(key, kind, raw)
        else:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment: model, constraint, grid, plan, and options."""

    model: ParameterModel
    constraint: Constraint
    grid: tuple
    plan: SamplePlan
    crn: bool
    workers: int
    oracle_enabled: bool
    oracle_spec: QuadratureSpec
    naive_enabled: bool
    naive_samples: int
    slater_gamma0: float
    slater_samples: int
    convergence_ladder: tuple
    convergence_replications: int
    model_kind: str
    delta: float | None


def _build_model(cfg: dict) -> tuple[ParameterModel, str, float | None]:
    kind = cfg.get("model.kind")
    if kind is None:
        raise ConfigError("model.kind is required (beta-example | finite-mixture)")
    if kind == "beta-example":
        for bad in ("model.components", "model.weights"):
            if bad in cfg:
                raise ConfigError(f"{bad} is only valid for finite-mixture models")
        if "model.delta" not in cfg:
            raise ConfigError("beta-example requires model.delta")
        delta = cfg["model.delta"]
        if delta <= 0:
            raise ConfigError("model.delta must be positive")
        return beta_gaussian_model(delta, eta0=cfg.get("model.eta0", 2.5)), kind, delta
    if kind == "finite-mixture":
        if "model.delta" in cfg:
            raise ConfigError("model.delta is only valid for the beta-example model")
        k = cfg.get("model.components")
        weights = cfg.get("model.weights")
        if k is None or weights is None:
            raise ConfigError("finite-mixture requires model.components and model.weights")
        if len(weights) != k:
            raise ConfigError(f"model.weights has {len(weights)} entries, expected {k}")
        comps = []
        for i in range(1, k + 1):
            mean = cfg.get(f"model.mean.{i}")
            chol = cfg.get(f"model.chol.{i}")
            if mean is None or chol is None:
                raise ConfigError(f"finite-mixture component {i} needs model.mean.{i} "
                                  f"and model.chol.{i}")
            try:
                comps.append(GaussianParams(mean=np.array(mean),
                                            cholesky=np.array(chol)))
            except Exception as exc:
                raise ConfigError(f"component {i}: {exc}") from exc
        extra = [key for key in cfg
                 if _INDEXED_RE.match(key) and int(key.rsplit(".", 1)[1]) > k]
        if extra:
            raise ConfigError(f"component keys beyond model.components: {extra}")
        try:
            mix = FiniteMixture(weights=np.array(weights), components=tuple(comps))
            return mixture_as_parameter_model(mix), kind, None
        except Exception as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown model.kind {kind!r}")


def _build_constraint(cfg: dict, m: int) -> Constraint:
    kind = cfg.get("constraint.kind")
    if kind is None:
        raise ConfigError("constraint.kind is required (norm-ball | half-space)")
    n = cfg.get("constraint.dimension")
    if n is None or n < 1:
        raise ConfigError("constraint.dimension (a positive integer) is required")
    if kind == "norm-ball":
        for bad in ("constraint.normal", "constraint.direction", "constraint.level"):
            if bad in cfg:
                raise ConfigError(f"{bad} is only valid for half-space constraints")
        if m != 2:
            raise ConfigError("the norm-ball constraint is defined on R^2 state space")
        return norm_ball_constraint(n, offset=cfg.get("constraint.offset", 2.0))
    if kind == "half-space":
        if "constraint.offset" in cfg:
            raise ConfigError("constraint.offset is only valid for norm-ball")
        normal = cfg.get("constraint.normal")
        direction = cfg.get("constraint.direction")
        level = cfg.get("constraint.level")
        if normal is None or direction is None or level is None:
            raise ConfigError("half-space requires constraint.normal, "
                              "constraint.direction and constraint.level")
        if len(normal) != m:
            raise ConfigError(f"constraint.normal has {len(normal)} entries but the "
                              f"model state dimension is {m}")
        if len(direction) != n:
            raise ConfigError(f"constraint.direction has {len(direction)} entries but "
                              f"constraint.dimension is {n}")
        return half_space_constraint(normal, direction, level)
    raise ConfigError(f"unknown constraint.kind {kind!r}")


def _build_grid(cfg: dict, n: int, default_range: tuple | None) -> tuple:
    has_range = any(f"grid.{part}" in cfg for part in ("start", "stop", "step"))
    if "grid.points" in cfg:
        if has_range:
            raise ConfigError("give either grid.points or grid.start/stop/step, not both")
        points = [np.asarray(row, dtype=float) for row in cfg["grid.points"]]
        for row in points:
            if row.shape != (n,):
                raise ConfigError(f"grid point {row.tolist()} does not match "
                                  f"constraint.dimension = {n}")
        return tuple(points)
    if has_range or default_range is not None:
        if n != 1:
            raise ConfigError("grid.start/stop/step describe a 1-D grid; use "
                              "grid.points for constraint.dimension > 1")
        default_range = default_range or (None, None, None)
        try:
            start = cfg.get("grid.start", default_range[0])
            stop = cfg.get("grid.stop", default_range[1])
            step = cfg.get("grid.step", default_range[2])
            if start is None or stop is None or step is None:
                raise ConfigError("grid.start, grid.stop and grid.step are all required")
        except TypeError:  # pragma: no cover
            raise ConfigError("incomplete grid range") from None
        if step <= 0 or stop < start:
            raise ConfigError("grid range must have positive step and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(np.array([start + i * step]) for i in range(count))
    raise ConfigError("a grid is required: grid.points or grid.start/stop/step")


def build_experiment(cfg: dict, *, seed_override: int | None = None,
                     workers_override: int | None = None,
                     default_samples: int | None = None,
                     default_grid: tuple | None = None,
                     default_sampler: str = "iid") -> ExperimentConfig:
    """Assemble and cross-validate an experiment from a parsed config dict."""
    model, model_kind, delta = _build_model(cfg)
    constraint = _build_constraint(cfg, model.dimension)
    grid = _build_grid(cfg, constraint.decision_dim, default_grid)

    samples = cfg.get("plan.samples", default_samples)
    if samples is None:
        raise ConfigError("plan.samples is required")
    seed = seed_override if seed_override is not None else cfg.get("plan.seed")
    if seed is None:
        raise ConfigError("plan.seed is required (or pass --seed)")
    sampler = cfg.get("plan.sampler", default_sampler)
    if sampler not in ("iid", "mcmc", "symmetrized"):
        raise ConfigError(f"plan.sampler must be iid, mcmc or symmetrized, "
                          f"got {sampler!r}")
    if sampler == "mcmc" and model.density is None:
        raise ConfigError("plan.sampler = mcmc needs a model with a prior density")
    try:
        plan = SamplePlan(count=samples, seed=seed, sampler=sampler,
                          burn_in=cfg.get("plan.burnin", 1000),
                          thinning=cfg.get("plan.thinning", 1),
                          proposal_scale=cfg.get("plan.proposal_scale"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    workers = workers_override if workers_override is not None \
        else cfg.get("run.workers", 1)
    if workers < 1:
        raise ConfigError("run.workers must be >= 1")

    oracle_enabled = cfg.get("oracle.enable", False)
    if oracle_enabled and model_kind != "beta-example" and model.dimension != 2:
        raise ConfigError("oracle columns need the beta-example model or an "
                          "m = 2 model with a reference quadrature")
    try:
        oracle_spec = QuadratureSpec(initial_nodes=cfg.get("oracle.nodes", 64),
                                     tol=cfg.get("oracle.tol", 1e-10))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    naive_samples = cfg.get("naive.samples", samples)
    if naive_samples < 1:
        raise ConfigError("naive.samples must be >= 1")
    gamma0 = cfg.get("slater.gamma0", 0.5)
    if gamma0 <= 0:
        raise ConfigError("slater.gamma0 must be positive")
    ladder = tuple(cfg.get("convergence.ladder", [100, 1000, 10000]))
    if any(v < 2 for v in ladder) or len(ladder) < 2:
        raise ConfigError("convergence.ladder needs at least two entries >= 2")
    reps = cfg.get("convergence.replications", 50)
    if not 2 <= reps <= 1024:
        raise ConfigError("convergence.replications must lie in [2, 1024]")

    return ExperimentConfig(
        model=model, constraint=constraint, grid=grid, plan=plan,
        crn=cfg.get("run.crn", True), workers=workers,
        oracle_enabled=oracle_enabled, oracle_spec=oracle_spec,
        naive_enabled=cfg.get("naive.enable", False),
        naive_samples=naive_samples, slater_gamma0=gamma0,
        slater_samples=cfg.get("slater.samples", 1000),
        convergence_ladder=ladder, convergence_replications=reps,
        model_kind=model_kind, delta=delta,
    )


def load_config(path: str, **kwargs) -> ExperimentConfig:
    """Read, parse, and validate a config file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return build_experiment(parse_flat(text), **kwargs)
