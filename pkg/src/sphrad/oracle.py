"""Deterministic ground truth via quadrature.

Two independent oracle routes exist for the Beta-parameterized planar
example:

* ``true_probability_example`` / ``true_gradient_example`` integrate the
  closed-form parameter integrals

      Phi(x)      = E_c[ F_{k=2, lam=c^2}(||x||^2 + 2) ]
      grad Phi(x) = 2 E_c[ f_{k=2, lam=c^2}(||x||^2 + 2) ] x

  over the (1 - c^2)^(delta - 1) prior with Gauss rules (noncentral
  chi-square CDF/PDF in the integrand).
* ``reference_probability_2d`` never touches those closed forms: it tensors
  a parameter rule with a periodic midpoint rule over the circle of
  directions and evaluates the radial kernel through the ray solver. The two
  routes agreeing is a strong end-to-end check of the whole machinery.

Every oracle refines by node doubling until successive values differ by at
most the requested tolerance and raises ``QuadratureError`` otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .distributions import noncentral_chisq_cdf_grid, noncentral_chisq_pdf_grid
from .errors import QuadratureError
from .model import Constraint, ParameterModel
from .radial import PreparedSamples, SolverOptions, batch_probability, batch_radii

__all__ = [
    "QuadratureSpec",
    "beta_prior_rule",
    "true_probability_example",
    "true_gradient_example",
    "reference_probability_2d",
    "reference_second_moment_2d",
    "finite_difference_gradient",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre backbone with node doubling.

    ``initial_nodes`` is the coarsest parameter rule; refinement doubles node
    counts until two successive evaluations agree to ``tol`` (absolute), up
    to ``max_nodes``. Endpoint-singular priors (delta < 1) switch to a
    Gauss-Jacobi weighting of the same order.
    """

    initial_nodes: int = 64
    tol: float = 1e-10
    max_nodes: int = 8192
    theta_nodes: int = 256

    def __post_init__(self) -> None:
        if self.initial_nodes < 8:
            raise ValueError("need at least 8 initial nodes")
        if self.tol <= 0.0 or self.max_nodes < 2 * self.initial_nodes:
            raise ValueError("inconsistent quadrature spec")


_DEFAULT_SPEC = QuadratureSpec()


@lru_cache(maxsize=128)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights


@lru_cache(maxsize=128)
def _gauss_jacobi_symmetric(delta: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Golub-Welsch nodes/weights for the weight (1 - c^2)^(delta - 1) on
    (-1, 1), with weights normalized to sum to one (probability weights)."""
    # Monic three-term recurrence of the symmetric Jacobi polynomials:
    # all a_k = 0; b_1 = 1/(2 delta + 1); for k >= 2
    # b_k = k (k + 2 delta - 2) / ((2k + 2 delta - 1)(2k + 2 delta - 3)).
    k = np.arange(1, n, dtype=float)
    b = np.empty(n - 1)
    b[0] = 1.0 / (2.0 * delta + 1.0)
    if n > 2:
        kk = k[1:]
        b[1:] = kk * (kk + 2.0 * delta - 2.0) / (
            (2.0 * kk + 2.0 * delta - 1.0) * (2.0 * kk + 2.0 * delta - 3.0))
    jacobi = np.zeros((n, n))
    off = np.sqrt(b)
    jacobi[np.arange(n - 1), np.arange(1, n)] = off
    jacobi[np.arange(1, n), np.arange(n - 1)] = off
    nodes, vectors = np.linalg.eigh(jacobi)
    weights = vectors[0, :] ** 2
    return nodes, weights / weights.sum()


def beta_prior_rule(delta: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and probability weights integrating against the Beta(delta,
    delta) prior of c on (-1, 1); weights sum to 1 by construction for the
    Jacobi branch and up to quadrature error for the Legendre branch."""
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    if delta < 1.0:
        return _gauss_jacobi_symmetric(float(delta), int(n))
    nodes, weights = _gauss_legendre(int(n))
    norm = math.exp(math.lgamma(2.0 * delta) - (2.0 * delta - 1.0) * math.log(2.0)
                    - 2.0 * math.lgamma(delta))
    return nodes, weights * norm * (1.0 - nodes ** 2) ** (delta - 1.0)


def _doubling(evaluate, spec: QuadratureSpec, what: str) -> float:
    n = spec.initial_nodes
    previous = evaluate(n)
    while 2 * n <= spec.max_nodes:
        n *= 2
        current = evaluate(n)
        if abs(current - previous) <= spec.tol:
            return current
        previous = current
    raise QuadratureError(
        f"{what}: node doubling did not converge to {spec.tol:g} by "
        f"{spec.max_nodes} nodes (last delta {abs(current - previous):.3g})")


def _norm_sq(x) -> float:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    return float(arr @ arr)


def true_probability_example(x, delta: float,
                             spec: QuadratureSpec = _DEFAULT_SPEC) -> float:
    """Exact probability for the Beta-parameterized planar example at x."""
    t = _norm_sq(x) + 2.0

    def evaluate(n: int) -> float:
        nodes, weights = beta_prior_rule(delta, n)
        return float(weights @ noncentral_chisq_cdf_grid(2, nodes ** 2, t))

    return _doubling(evaluate, spec, "true_probability_example")


def true_gradient_example(x, delta: float,
                          spec: QuadratureSpec = _DEFAULT_SPEC) -> np.ndarray:
    """Exact gradient for the example: a scalar coefficient times x."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    t = _norm_sq(xa) + 2.0

    def evaluate(n: int) -> float:
        nodes, weights = beta_prior_rule(delta, n)
        return 2.0 * float(weights @ noncentral_chisq_pdf_grid(2, nodes ** 2, t))

    return _doubling(evaluate, spec, "true_gradient_example") * xa


def _parameter_rule(model: ParameterModel, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (as parameter rows) and probability weights for a scalar prior."""
    if model.atoms is not None:
        if model.atom_weights is None:
            raise QuadratureError("discrete prior lacks atom weights")
        nodes = np.asarray(model.atoms, dtype=float).reshape(len(model.atoms), 1)
        return nodes, np.asarray(model.atom_weights, dtype=float)
    if model.support is None or model.density is None:
        raise QuadratureError(
            "reference quadrature needs a discrete prior or a scalar density "
            "with declared support")
    lo, hi = model.support
    base, gl_weights = _gauss_legendre(n)
    nodes = 0.5 * (hi - lo) * (base + 1.0) + lo
    dens = np.asarray(model.density(nodes[:, None]), dtype=float)
    mass = float(gl_weights @ dens)
    if mass <= 0.0:
        raise QuadratureError("prior density integrates to zero on its support")
    return nodes[:, None], gl_weights * dens / mass


def _reference_moment(cons: Constraint, model: ParameterModel, x,
                      spec: QuadratureSpec, power: int) -> float:
    if model.dimension != 2:
        raise QuadratureError("the reference oracle is restricted to m = 2")
    if model.parameter_dimension != 1:
        raise QuadratureError("the reference oracle needs a scalar parameter")
    x = np.asarray(x, dtype=float)
    solver = SolverOptions()

    def evaluate(n: int) -> float:
        c_nodes, c_weights = _parameter_rule(model, n)
        n_c = len(c_nodes)
        n_theta = spec.theta_nodes * max(1, n // spec.initial_nodes)
        theta = (np.arange(n_theta) + 0.5) * (2.0 * math.pi / n_theta)
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        means, chols = model.params_batch(c_nodes)
        origins = np.repeat(means, n_theta, axis=0)
        rays = np.einsum("nij,tj->nti", chols, dirs).reshape(n_c * n_theta, 2)
        params = np.repeat(c_nodes, n_theta, axis=0)
        prepared = PreparedSamples(origins, rays, params)
        radii = batch_radii(cons, prepared, x, solver)
        kernel = batch_probability(radii, 2) ** power
        theta_mean = kernel.reshape(n_c, n_theta).mean(axis=1)
        return float(c_weights @ theta_mean)

    name = "reference_probability_2d" if power == 1 else "reference_second_moment_2d"
    return _doubling(evaluate, spec, name)


def reference_probability_2d(cons: Constraint, model: ParameterModel, x,
                             spec: QuadratureSpec = _DEFAULT_SPEC) -> float:
    """Probability by tensor quadrature over (direction angle, parameter),
    with the kernel evaluated through the ray solver. Independent of the
    closed-form example oracles."""
    return _reference_moment(cons, model, x, spec, power=1)


def reference_second_moment_2d(cons: Constraint, model: ParameterModel, x,
                               spec: QuadratureSpec = _DEFAULT_SPEC) -> float:
    """Second moment of the kernel, int e^2 d(zeta x prior); the exact
    asymptotic variance of the spherical estimator is this minus Phi^2."""
    return _reference_moment(cons, model, x, spec, power=2)


def finite_difference_gradient(f, x, h: float) -> np.ndarray:
    """Central finite differences of a scalar field, coordinate by coordinate."""
    if h <= 0.0:
        raise ValueError(f"step must be positive, got {h}")
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xa.shape)
    for j in range(xa.size):
        step = np.zeros(xa.shape)
        step[j] = h
        out[j] = (f(xa + step) - f(xa - step)) / (2.0 * h)
    return out
