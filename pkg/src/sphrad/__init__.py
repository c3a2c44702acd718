"""Spherical-radial probability and gradient estimation for Gaussian mixtures."""

from .distributions import (
    ChiLaw,
    NoncentralChiSquareLaw,
    chi_cdf,
    chi_pdf,
    chi_quantile,
    noncentral_chisq_cdf,
    noncentral_chisq_pdf,
    sample_beta_symmetric,
    sample_sphere,
)
from .errors import (
    AssumptionError,
    ConfigError,
    ConvexityViolationError,
    DegenerateBoundaryError,
    ModelSpecificationError,
    QuadratureError,
    SlaterViolationError,
    SphradError,
)
from .rng import RngStream

__version__ = "0.1.0"
