"""Built-in models and constraints.

Ships the two families every experiment in this package leans on:

* ``beta_gaussian_model``: a planar Gaussian whose mean is (0, C) with
  C = 2 D - 1 and D ~ Beta(delta, delta), unit covariance. Together with the
  ``norm_ball_constraint`` it has closed forms for the ray radius, the radial
  kernel and its gradient, which makes it the canonical test bed.
* ``half_space_constraint``: g(x, z) = a.z - b.x - level. Linear in both
  arguments, so the conditional feasibility probability has a closed Gaussian
  form that doubles as an independent oracle for mixture models.
"""

from __future__ import annotations

import numpy as np

from .distributions import beta_symmetric_quantile, sample_beta_symmetric
from .model import Constraint, FiniteMixture, GaussianParams, ParameterModel, \
    mixture_as_parameter_model

__all__ = [
    "beta_gaussian_model",
    "norm_ball_constraint",
    "half_space_constraint",
    "two_component_mixture",
]


def beta_gaussian_model(delta: float, eta0: float = 2.5) -> ParameterModel:
    """Beta-parameterized planar Gaussian: mean (0, c), identity covariance.

    The parameter c lives on (-1, 1) with density proportional to
    (1 - c^2)^(delta - 1). The worst-case norm budget is 1 + sqrt(2) < 2.5.
    """
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    eye = np.eye(2)

    def sampler(gen: np.random.Generator, n: int) -> np.ndarray:
        return (2.0 * sample_beta_symmetric(delta, gen, size=n) - 1.0)[:, None]

    def mapping(c: np.ndarray) -> GaussianParams:
        return GaussianParams(mean=np.array([0.0, float(c[0])]), cholesky=eye)

    def batch_mapping(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = len(c)
        means = np.zeros((n, 2))
        means[:, 1] = c[:, 0]
        return means, np.broadcast_to(eye, (n, 2, 2))

    def density(c: np.ndarray) -> np.ndarray:
        cc = c[:, 0]
        inside = np.abs(cc) < 1.0
        out = np.zeros(len(cc))
        out[inside] = (1.0 - cc[inside] ** 2) ** (delta - 1.0)
        return out

    def quantile(u: np.ndarray) -> np.ndarray:
        return (2.0 * beta_symmetric_quantile(delta, u[:, 0]) - 1.0)[:, None]

    return ParameterModel(
        dimension=2,
        parameter_dimension=1,
        eta0=eta0,
        sampler=sampler,
        mapping=mapping,
        batch_mapping=batch_mapping,
        density=density,
        quantile=quantile,
        support=(-1.0, 1.0),
        diameter_hint=2.0,
        name="beta-example",
    )


def norm_ball_constraint(decision_dim: int, offset: float = 2.0) -> Constraint:
    """g(x, z) = ||z||^2 - ||x||^2 - offset on R^n x R^2.

    Convex (quadratic) in z; the growth constants follow the bound
    ||grad_x g|| = 2||x|| <= 2 exp(||z||) near any bounded x.
    """

    def value(x: np.ndarray, z: np.ndarray) -> np.ndarray:
        xsq = np.sum(np.square(np.asarray(x, dtype=float)), axis=-1)
        return np.einsum("ij,ij->i", z, z) - xsq - offset

    def grad_x(x: np.ndarray, z: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(-2.0 * x, (len(z),) + x.shape[-1:]) if x.ndim == 1 \
            else -2.0 * x

    def grad_z(x: np.ndarray, z: np.ndarray) -> np.ndarray:
        return 2.0 * z

    return Constraint(
        decision_dim=decision_dim,
        state_dim=2,
        value=value,
        grad_x=grad_x,
        grad_z=grad_z,
        convex_in_z=True,
        growth=(1.0, 2.0, 1.0),
        name="norm-ball",
    )


def half_space_constraint(normal, direction, level: float) -> Constraint:
    """g(x, z) = normal.z - direction.x - level (linear, hence convex in z)."""
    a = np.asarray(normal, dtype=float)
    b = np.asarray(direction, dtype=float)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("normal and direction must be vectors")

    def value(x: np.ndarray, z: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return z @ a - np.sum(x * b, axis=-1) - level

    def grad_x(x: np.ndarray, z: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return np.broadcast_to(-b, (len(z), len(b)))
        return np.broadcast_to(-b, x.shape)

    def grad_z(x: np.ndarray, z: np.ndarray) -> np.ndarray:
        return np.broadcast_to(a, z.shape)

    return Constraint(
        decision_dim=len(b),
        state_dim=len(a),
        value=value,
        grad_x=grad_x,
        grad_z=grad_z,
        convex_in_z=True,
        growth=(1.0, float(np.linalg.norm(b)) + 1e-12, 1e-12),
        name="half-space",
    )


def two_component_mixture() -> ParameterModel:
    """Small asymmetric two-component mixture used by tests and docs."""
    comp_a = GaussianParams(mean=np.array([0.3, -0.2]),
                            cholesky=np.array([[0.8, 0.0], [0.1, 0.6]]))
    comp_b = GaussianParams(mean=np.array([-0.4, 0.5]),
                            cholesky=np.array([[0.5, 0.0], [-0.2, 0.9]]))
    mix = FiniteMixture(weights=np.array([0.4, 0.6]), components=(comp_a, comp_b))
    return mixture_as_parameter_model(mix)
