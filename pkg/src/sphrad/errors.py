"""Semantic exception hierarchy.

Public functions raise these instead of bare ValueError whenever the failure
reflects a model assumption or a numerical contract rather than a plain
argument-type mistake. The CLI maps them onto exit codes: configuration
problems exit with 2, assumption/numerical failures with 3.
"""

from __future__ import annotations


class SphradError(Exception):
    """Base class for all library errors."""


class ConfigError(SphradError):
    """Experiment configuration is malformed or inconsistent (exit code 2)."""


class AssumptionError(SphradError):
    """A model assumption or numerical contract was violated (exit code 3)."""


class ModelSpecificationError(AssumptionError):
    """A declared model bound (positive-definiteness, eta0, weights) fails."""


class SlaterViolationError(AssumptionError):
    """g(x, mean(c)) >= 0 at a ray origin: the uniform Slater condition fails.

    Raised rather than silently returning 0 because the interval structure of
    the feasible ray set (and hence every estimator) is conditioned on the
    ray origin being strictly feasible.
    """


class ConvexityViolationError(AssumptionError):
    """Observed ray behaviour is incompatible with the declared convexity."""


class DegenerateBoundaryError(AssumptionError):
    """The directional derivative at a ray boundary is not safely positive."""


class QuadratureError(AssumptionError):
    """Node doubling failed to converge to the requested tolerance."""
