"""Uncertainty model and constraint contracts.

A ``ParameterModel`` carries the prior over the parameter space together with
the map from a parameter vector c to the Gaussian component it selects,
represented by its mean and lower-triangular Cholesky factor. Callers never
form the covariance itself: the radial machinery only ever needs L(c) v.

A ``Constraint`` wraps g(x, z) and its two partial gradients as vectorized
callables. The batch axis is mandatory on z and optional on x: every callable
must accept z of shape (N, m) with x of shape (n,), and should broadcast when
x has shape (N, n) (all builtin constraints do; this is what lets tests sweep
random decision vectors in one call). Regularity (convexity in z, growth
constants) is declared by the caller, with randomized diagnostics available,
but never proven by the library.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ModelSpecificationError
from .rng import RngStream

__all__ = [
    "GaussianParams",
    "ParameterModel",
    "FiniteMixture",
    "Constraint",
    "SlaterReport",
    "gaussian_params",
    "sample_parameter",
    "mixture_as_parameter_model",
    "verify_slater",
    "constraint_self_check",
]

_ETA0_SLACK = 1e-9


@dataclass(frozen=True)
class GaussianParams:
    """Mean and lower-triangular Cholesky factor of one Gaussian component."""

    mean: np.ndarray
    cholesky: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        chol = np.asarray(self.cholesky, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cholesky", chol)
        m = mean.shape[0]
        if mean.ndim != 1 or chol.shape != (m, m):
            raise ModelSpecificationError(
                f"mean must be (m,) and cholesky (m, m); got {mean.shape} and {chol.shape}")
        if np.any(np.triu(chol, 1) != 0.0):
            raise ModelSpecificationError("cholesky factor must be lower-triangular")
        if np.any(np.diag(chol) <= 0.0):
            raise ModelSpecificationError(
                "cholesky factor needs a strictly positive diagonal "
                "(degenerate covariances are not supported)")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def norm_budget(self) -> float:
        """||mean|| + ||L||_F, the quantity bounded by the model's eta0."""
        return float(np.linalg.norm(self.mean) + np.linalg.norm(self.cholesky))


@dataclass(frozen=True)
class ParameterModel:
    """Prior over the parameter space plus the parameter-to-Gaussian map.

    ``sampler(gen, n)`` returns an (n, p) array of prior draws. ``mapping``
    turns one parameter vector into ``GaussianParams``; ``batch_mapping`` is
    an optional vectorized version returning ``(means (n, m), chols (n, m, m))``
    and defaults to a row loop over ``mapping``. ``density`` (unnormalized,
    zero outside the support) is only required for MCMC sampling.
    ``quantile`` maps uniform (n, p) levels through the coordinatewise inverse
    CDF and enables stratified sampling plans. ``atoms``, when set, lists the
    finitely many parameter values of a discrete prior so Slater verification
    can be exhaustive.
    """

    dimension: int
    parameter_dimension: int
    eta0: float
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    mapping: Callable[[np.ndarray], GaussianParams]
    batch_mapping: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None
    density: Callable[[np.ndarray], np.ndarray] | None = None
    quantile: Callable[[np.ndarray], np.ndarray] | None = None
    atoms: tuple | None = None
    atom_weights: tuple | None = None
    support: tuple[float, float] | None = None
    diameter_hint: float | None = None
    name: str = "model"

    def __post_init__(self) -> None:
        if self.dimension < 1 or self.parameter_dimension < 1:
            raise ModelSpecificationError("dimensions must be positive")
        if self.eta0 <= 0.0:
            raise ModelSpecificationError(f"eta0 must be positive, got {self.eta0}")

    def params_batch(self, parameters: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Means (n, m) and Cholesky factors (n, m, m) for parameter rows,
        validated against the declared eta0 bound."""
        parameters = np.atleast_2d(np.asarray(parameters, dtype=float))
        if self.batch_mapping is not None:
            means, chols = self.batch_mapping(parameters)
            means = np.asarray(means, dtype=float)
            chols = np.asarray(chols, dtype=float)
        else:
            rows = [gaussian_params(self, c) for c in parameters]
            means = np.stack([r.mean for r in rows])
            chols = np.stack([r.cholesky for r in rows])
            return means, chols  # already validated row by row
        budget = (np.linalg.norm(means, axis=1)
                  + np.linalg.norm(chols.reshape(len(chols), -1), axis=1))
        bad = budget > self.eta0 * (1.0 + _ETA0_SLACK) + 1e-12
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ModelSpecificationError(
                f"model '{self.name}': parameter {parameters[i]} yields "
                f"||mean|| + ||L|| = {budget[i]:.6g} > eta0 = {self.eta0:.6g}")
        return means, chols


def gaussian_params(model: ParameterModel, c) -> GaussianParams:
    """Gaussian component selected by parameter c, with the eta0 bound enforced."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    params = model.mapping(c)
    budget = params.norm_budget()
    if budget > model.eta0 * (1.0 + _ETA0_SLACK) + 1e-12:
        raise ModelSpecificationError(
            f"model '{model.name}': parameter {c} yields ||mean|| + ||L|| = "
            f"{budget:.6g} > eta0 = {model.eta0:.6g}")
    return params


def sample_parameter(model: ParameterModel, rng: RngStream | np.random.Generator,
                     size: int | None = None):
    """Draw parameter vector(s) from the prior: (p,) or (size, p)."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    n = 1 if size is None else int(size)
    out = np.asarray(model.sampler(gen, n), dtype=float).reshape(n, model.parameter_dimension)
    return out[0] if size is None else out


@dataclass(frozen=True)
class FiniteMixture:
    """Finite Gaussian mixture: positive weights summing to one."""

    weights: np.ndarray
    components: tuple[GaussianParams, ...]

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) == 0 or w.shape != (len(self.components),):
            raise ModelSpecificationError("need one weight per component")
        if np.any(w <= 0.0):
            raise ModelSpecificationError("mixture weights must be strictly positive")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ModelSpecificationError(
                f"mixture weights must sum to 1 within 1e-12, got {w.sum()!r}")
        dims = {comp.dim for comp in self.components}
        if len(dims) != 1:
            raise ModelSpecificationError("all components must share one dimension")


def mixture_as_parameter_model(mix: FiniteMixture) -> ParameterModel:
    """View a finite mixture as a model with discrete parameter space {0..k-1}.

    The sampler is categorical in the weights; the quantile map inverts the
    categorical CDF, so stratified plans allocate samples proportionally.
    """
    cumw = np.cumsum(mix.weights)
    cumw[-1] = 1.0
    means = np.stack([c.mean for c in mix.components])
    chols = np.stack([c.cholesky for c in mix.components])
    k = len(mix.components)

    def sampler(gen: np.random.Generator, n: int) -> np.ndarray:
        return np.searchsorted(cumw, gen.random(n)).astype(float)[:, None]

    def mapping(c: np.ndarray) -> GaussianParams:
        i = int(round(float(c[0])))
        if not 0 <= i < k:
            raise ModelSpecificationError(f"component index {c[0]} outside 0..{k - 1}")
        return mix.components[i]

    def batch_mapping(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        idx = np.rint(c[:, 0]).astype(int)
        if np.any((idx < 0) | (idx >= k)):
            raise ModelSpecificationError("component index outside the mixture")
        return means[idx], chols[idx]

    def quantile(u: np.ndarray) -> np.ndarray:
        return np.searchsorted(cumw, np.clip(u[:, 0], 0.0, 1.0 - 1e-16)).astype(float)[:, None]

    eta0 = max(comp.norm_budget() for comp in mix.components)
    return ParameterModel(
        dimension=mix.components[0].dim,
        parameter_dimension=1,
        eta0=eta0 * (1.0 + _ETA0_SLACK),
        sampler=sampler,
        mapping=mapping,
        batch_mapping=batch_mapping,
        quantile=quantile,
        atoms=tuple(float(i) for i in range(k)),
        atom_weights=tuple(float(w) for w in mix.weights),
        diameter_hint=float(k),
        name="finite-mixture",
    )


@dataclass(frozen=True)
class Constraint:
    """g(x, z) with its partial gradients and declared regularity.

    ``value(x, Z)`` maps z rows (N, m) to (N,); ``grad_x`` to (N, n) and
    ``grad_z`` to (N, m). ``growth`` optionally records (eps, a, b) of the
    exponential growth bound ||grad_x g|| <= a exp(b ||z||) near the point of
    interest; it is informational and never checked globally.
    """

    decision_dim: int
    state_dim: int
    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_z: Callable[[np.ndarray, np.ndarray], np.ndarray]
    convex_in_z: bool = True
    growth: tuple[float, float, float] | None = None
    name: str = "constraint"

    def value_at(self, x, z) -> float:
        """Scalar convenience wrapper around the batched ``value``."""
        z = np.asarray(z, dtype=float)
        return float(self.value(np.asarray(x, dtype=float), z[None, :])[0])


@dataclass(frozen=True)
class SlaterReport:
    """Outcome of checking g(x, mean(c)) < -gamma0 over sampled (or all) c."""

    gamma0: float
    checked: int
    worst_margin: float
    passed: bool
    exhaustive: bool = False


def verify_slater(model: ParameterModel, cons: Constraint, x,
                  gamma0: float, n_check: int = 1000,
                  rng: RngStream | np.random.Generator | None = None) -> SlaterReport:
    """Sample (or enumerate, for discrete priors) component means and report
    the worst observed constraint value at x. Failure is reported, not raised:
    estimators still run at unverified points but carry the flag.
    """
    if gamma0 <= 0.0:
        raise ValueError(f"gamma0 must be positive, got {gamma0}")
    if n_check < 1:
        raise ValueError(f"n_check must be >= 1, got {n_check}")
    x = np.asarray(x, dtype=float)
    if model.atoms is not None:
        params = np.asarray(model.atoms, dtype=float).reshape(len(model.atoms), -1)
        exhaustive = True
    else:
        if rng is None:
            rng = RngStream(0)
        params = sample_parameter(model, rng, size=n_check)
        exhaustive = False
    means, _ = model.params_batch(params)
    values = np.asarray(cons.value(x, means), dtype=float)
    worst = float(values.max())
    return SlaterReport(gamma0=float(gamma0), checked=len(params), worst_margin=worst,
                        passed=bool(worst < -gamma0), exhaustive=exhaustive)


def constraint_self_check(cons: Constraint, rng: RngStream | np.random.Generator,
                          n_points: int = 20, box: float = 2.0,
                          rel_tol: float = 1e-5) -> None:
    """Randomized diagnostics: central-difference check of both gradients and,
    when convexity in z is declared, a midpoint-convexity spot check.

    Raises ModelSpecificationError on mismatch. Intended for user-supplied
    constraints; builtins are exact by construction.
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    n, m = cons.decision_dim, cons.state_dim
    h = 1e-6
    for _ in range(n_points):
        x = gen.uniform(-box, box, n)
        z = gen.uniform(-box, box, m)
        gx = np.asarray(cons.grad_x(x, z[None, :]), dtype=float)[0]
        gz = np.asarray(cons.grad_z(x, z[None, :]), dtype=float)[0]
        fd_x = np.empty(n)
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            fd_x[j] = (cons.value_at(x + e, z) - cons.value_at(x - e, z)) / (2 * h)
        fd_z = np.empty(m)
        for j in range(m):
            e = np.zeros(m)
            e[j] = h
            fd_z[j] = (cons.value_at(x, z + e) - cons.value_at(x, z - e)) / (2 * h)
        scale = 1.0 + np.linalg.norm(gx) + np.linalg.norm(gz)
        if np.linalg.norm(fd_x - gx) > rel_tol * scale:
            raise ModelSpecificationError(
                f"constraint '{cons.name}': grad_x disagrees with finite differences "
                f"at x={x}, z={z}")
        if np.linalg.norm(fd_z - gz) > rel_tol * scale:
            raise ModelSpecificationError(
                f"constraint '{cons.name}': grad_z disagrees with finite differences "
                f"at x={x}, z={z}")
        if cons.convex_in_z:
            z2 = gen.uniform(-box, box, m)
            mid = cons.value_at(x, 0.5 * (z + z2))
            avg = 0.5 * (cons.value_at(x, z) + cons.value_at(x, z2))
            if mid > avg + 1e-9 * (1.0 + abs(avg)):
                raise ModelSpecificationError(
                    f"constraint '{cons.name}' is declared convex in z but fails "
                    f"midpoint convexity at x={x}")
