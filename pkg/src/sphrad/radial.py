"""Ray geometry: boundary radius, radial kernel, and its gradient.

For a parameter c selecting the Gaussian component (mean z0, factor L) and a
unit direction v, the ray z(r) = z0 + r L v starts strictly feasible
(g(x, z0) < 0 is required) and, by the declared convexity of g in z, the
feasible radius set is an interval [0, rho]. The solver brackets the sign
change by doubling from r = 1 and bisects; rays still feasible at the
truncation radius R_max = chi_quantile(m, 1 - tail_mass) are classified
infinite, which contributes at most tail_mass of absolute error to the
kernel value.

The kernel and its gradient follow from the radius: e = chi_cdf(m, rho) on
finite rays (1 on infinite ones), and grad_x e = chi_pdf(m, rho) * grad_x rho
with grad_x rho = -grad_x g(x, z*) / <grad_z g(x, z*), L v> at the boundary
point z*. The denominator is validated against its theoretical lower bound
-g(x, z0) / rho before any gradient is accepted.

Everything here is a pure function of immutable inputs. Large batches are cut
into fixed-size chunks (never dependent on the worker count), so parallel and
serial evaluation produce bit-identical results.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Literal, Sequence

import numpy as np

from .distributions import ChiLaw, chi_cdf, chi_pdf, chi_quantile
from .errors import ConvexityViolationError, DegenerateBoundaryError, SlaterViolationError
from .model import Constraint, GaussianParams, ParameterModel

__all__ = [
    "SolverOptions",
    "RadialSample",
    "RadiusResult",
    "PreparedSamples",
    "BatchRadii",
    "BatchEvaluation",
    "prepare_samples",
    "batch_radii",
    "batch_probability",
    "batch_gradient",
    "evaluate_batch",
    "radius",
    "radial_probability",
    "grad_rho",
    "radial_gradient",
]

_CHUNK = 65536  # fixed, so results never depend on the worker count
_DENOM_SLACK = 1e-8


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances of the ray solver.

    ``tail_mass`` sets the infinite-direction truncation radius; ``rel_tol``
    is the bisection interval tolerance relative to 1 + rho;
    ``boundary_rtol`` scales the acceptable residual |g| at a reported
    boundary point; ``validate_interval`` additionally samples interior radii
    of every finite ray and fails loudly when the declared convexity is
    contradicted.
    """

    tail_mass: float = 1e-12
    rel_tol: float = 1e-12
    boundary_rtol: float = 1e-10
    max_iter: int = 200
    validate_interval: bool = False


_DEFAULT_OPTIONS = SolverOptions()


@lru_cache(maxsize=64)
def _truncation_radius(m: int, tail_mass: float) -> float:
    return chi_quantile(ChiLaw(m), 1.0 - tail_mass)


@dataclass(frozen=True)
class RadialSample:
    """One Monte Carlo draw: unit direction v paired with a parameter c."""

    direction: np.ndarray
    parameter: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.direction, dtype=float)
        c = np.atleast_1d(np.asarray(self.parameter, dtype=float))
        object.__setattr__(self, "direction", v)
        object.__setattr__(self, "parameter", c)
        if abs(float(np.linalg.norm(v)) - 1.0) > 1e-12:
            raise ValueError(f"direction must be a unit vector, got norm "
                             f"{np.linalg.norm(v)!r}")


@dataclass(frozen=True)
class RadiusResult:
    """Ray search outcome: a finite boundary radius or an infinite direction."""

    kind: Literal["finite", "infinite"]
    truncation_radius: float
    rho: float | None = None
    boundary_point: np.ndarray | None = None

    @property
    def finite(self) -> bool:
        return self.kind == "finite"


class PreparedSamples:
    """Struct-of-arrays view of a sample set, ready for ray evaluation.

    ``origins[i] = mean(c_i)`` and ``rays[i] = L(c_i) v_i``; the per-sample
    parameter rows are retained only for error reporting. ``index_base``
    keeps sample indices global when the batch is cut into chunks.
    """

    __slots__ = ("origins", "rays", "parameters", "dimension", "index_base")

    def __init__(self, origins: np.ndarray, rays: np.ndarray, parameters: np.ndarray,
                 index_base: int = 0):
        self.origins = origins
        self.rays = rays
        self.parameters = parameters
        self.dimension = origins.shape[1]
        self.index_base = index_base

    def __len__(self) -> int:
        return len(self.origins)

    def label(self, i: int) -> str:
        return (f"sample {self.index_base + i} "
                f"(parameter {self.parameters[i]})")

    def slice(self, lo: int, hi: int) -> "PreparedSamples":
        return PreparedSamples(self.origins[lo:hi], self.rays[lo:hi],
                               self.parameters[lo:hi], self.index_base + lo)


def prepare_samples(model: ParameterModel, samples) -> PreparedSamples:
    """Map a sample set onto ray origins and scaled directions.

    Accepts anything exposing ``directions``/``parameters`` arrays (the
    estimator sample batches do) or an iterable of ``RadialSample``. Direction
    norms and the model's eta0 bound are validated here, once per batch.
    """
    if hasattr(samples, "directions") and hasattr(samples, "parameters"):
        directions = np.asarray(samples.directions, dtype=float)
        parameters = np.asarray(samples.parameters, dtype=float)
    else:
        items: Sequence[RadialSample] = list(samples)
        directions = np.stack([s.direction for s in items])
        parameters = np.stack([s.parameter for s in items])
    norms = np.linalg.norm(directions, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        i = int(np.argmax(np.abs(norms - 1.0)))
        raise ValueError(f"sample {i}: direction norm {norms[i]!r} is not 1")
    means, chols = model.params_batch(parameters)
    rays = np.einsum("nij,nj->ni", chols, directions)
    return PreparedSamples(means, rays, parameters)


@dataclass(frozen=True)
class BatchRadii:
    """Radii and classification for a batch of rays sharing one decision x."""

    rho: np.ndarray          # (N,), equals r_max on infinite rows
    finite: np.ndarray       # (N,) bool
    g_origin: np.ndarray     # (N,), the strictly negative ray-origin values
    r_max: float


def _ray_points(prepared: PreparedSamples, r: np.ndarray,
                out: np.ndarray | None = None) -> np.ndarray:
    if out is None:
        return prepared.origins + r[:, None] * prepared.rays
    np.multiply(prepared.rays, r[:, None], out=out)
    out += prepared.origins
    return out


def batch_radii(cons: Constraint, prepared: PreparedSamples, x,
                options: SolverOptions = _DEFAULT_OPTIONS) -> BatchRadii:
    """Boundary radii for every sample of the batch at decision vector x.

    x is normally a single (n,) vector shared by the batch; an (N, n) array
    of per-row decisions is also accepted when the constraint callables
    broadcast (all builtins do).
    """
    x = np.asarray(x, dtype=float)
    n_rows = len(prepared)
    g0 = np.asarray(cons.value(x, prepared.origins), dtype=float)
    if np.any(g0 >= 0.0):
        i = int(np.argmax(g0))
        raise SlaterViolationError(
            f"g(x, mean(c)) = {g0[i]:.6g} >= 0 at {prepared.label(i)}; "
            f"the ray origin must be strictly feasible")
    r_max = _truncation_radius(prepared.dimension, options.tail_mass)

    # Bracket by doubling from r = 1, with the truncation radius as the final
    # probe. Rows whose first positive value appears at probe k get the
    # bracket [probe_{k-1}, probe_k].
    probes = [min(1.0, r_max)]
    while probes[-1] < r_max:
        probes.append(min(2.0 * probes[-1], r_max))
    lo = np.zeros(n_rows)
    hi = np.full(n_rows, r_max)
    bracketed = np.zeros(n_rows, dtype=bool)
    g_last = g0
    probe_r = np.empty(n_rows)
    probe_pts = np.empty_like(prepared.origins)
    for p in probes:
        probe_r.fill(p)
        g_p = np.asarray(cons.value(x, _ray_points(prepared, probe_r, probe_pts)),
                         dtype=float)
        went_negative = bracketed & (g_p < 0.0)
        if np.any(went_negative):
            i = int(np.argmax(went_negative))
            raise ConvexityViolationError(
                f"{prepared.label(i)}: g returned negative at r = {p:.6g} after "
                f"a positive bracket; the feasible ray set is not an interval, "
                f"contradicting the declared convexity")
        newly = (~bracketed) & (g_p > 0.0)
        hi[newly] = p
        still_low = (~bracketed) & ~newly
        lo[still_low] = p
        bracketed |= newly
        g_last = g_p
    finite = bracketed | (g_last == 0.0)
    exact_boundary = (~bracketed) & (g_last == 0.0)
    infinite = ~finite
    lo[infinite] = r_max
    hi[infinite] = r_max
    lo[exact_boundary] = r_max
    hi[exact_boundary] = r_max

    active = (hi - lo) > options.rel_tol * (1.0 + lo)
    mid = np.empty(n_rows)
    points = np.empty_like(prepared.origins)
    for _ in range(options.max_iter):
        if not np.any(active):
            break
        np.add(lo, hi, out=mid)
        mid *= 0.5
        g_mid = np.asarray(cons.value(x, _ray_points(prepared, mid, points)),
                           dtype=float)
        take_lo = active & (g_mid <= 0.0)
        take_hi = active & ~take_lo
        np.copyto(lo, mid, where=take_lo)
        np.copyto(hi, mid, where=take_hi)
        active = (hi - lo) > options.rel_tol * (1.0 + lo)
    rho = 0.5 * (lo + hi)
    rho[infinite] = r_max
    rho[exact_boundary] = r_max

    if options.validate_interval:
        _validate_intervals(cons, prepared, x, rho, finite)
    return BatchRadii(rho=rho, finite=finite, g_origin=g0, r_max=r_max)


def _validate_intervals(cons, prepared, x, rho, finite) -> None:
    if not np.any(finite):
        return
    for u in (0.25, 0.5, 0.75, 0.95):
        g_u = np.asarray(cons.value(x, _ray_points(prepared, u * rho)), dtype=float)
        bad = finite & (g_u > 0.0)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ConvexityViolationError(
                f"{prepared.label(i)}: g > 0 at interior radius {u:.2f} * rho, so "
                f"the feasible ray set is not [0, rho]; convexity declaration is wrong")


def batch_probability(radii: BatchRadii, dimension: int) -> np.ndarray:
    """Kernel values: chi_cdf(m, rho) on finite rays, exactly 1 on infinite.

    The truncation error of the infinite branch is bounded by the solver's
    tail mass, far below Monte Carlo noise.
    """
    law = ChiLaw(dimension)
    return np.where(radii.finite, chi_cdf(law, radii.rho), 1.0)


def batch_gradient(cons: Constraint, prepared: PreparedSamples, x,
                   radii: BatchRadii) -> np.ndarray:
    """Per-sample kernel gradients (N, n); zero rows on infinite directions.

    The boundary directional derivative <grad_z g, L v> must clear both a
    positive floor and its theoretical lower bound -g(x, z0)/rho (within
    1e-8); anything else indicates a Slater/convexity violation or a solver
    failure and raises instead of producing a silently wrong gradient.
    """
    x = np.asarray(x, dtype=float)
    n = cons.decision_dim
    out = np.zeros((len(prepared), n))
    fin = np.flatnonzero(radii.finite)
    if fin.size == 0:
        return out
    boundary = prepared.origins[fin] + radii.rho[fin, None] * prepared.rays[fin]
    x_rows = x[fin] if x.ndim == 2 else x
    gx = np.asarray(cons.grad_x(x_rows, boundary), dtype=float)
    gz = np.asarray(cons.grad_z(x_rows, boundary), dtype=float)
    denom = np.einsum("ij,ij->i", gz, prepared.rays[fin])
    bound = -radii.g_origin[fin] / radii.rho[fin]
    bad = (denom <= 0.0) | (denom < bound - _DENOM_SLACK)
    if np.any(bad):
        k = int(np.argmax(bad))
        i = int(fin[k])
        raise DegenerateBoundaryError(
            f"{prepared.label(i)}: boundary directional derivative "
            f"{denom[k]:.6g} violates its lower bound {bound[k]:.6g}; "
            f"gradient is not trustworthy here")
    law = ChiLaw(prepared.dimension)
    scale = chi_pdf(law, radii.rho[fin]) / denom
    out[fin] = -gx * scale[:, None]
    return out


@dataclass(frozen=True)
class BatchEvaluation:
    """Kernel values (and optionally gradients) for a full sample batch."""

    e_values: np.ndarray              # (N,)
    gradients: np.ndarray | None      # (N, n) when requested
    rho: np.ndarray                   # (N,)
    finite: np.ndarray                # (N,) bool


def evaluate_batch(cons: Constraint, prepared: PreparedSamples, x, *,
                   want_gradient: bool = False,
                   options: SolverOptions = _DEFAULT_OPTIONS,
                   workers: int = 1) -> BatchEvaluation:
    """Evaluate the kernel over a batch, in fixed 65536-sample chunks.

    Chunk boundaries are a constant of the implementation, never derived from
    ``workers``; worker threads only pick up whole chunks. Together with the
    centrally drawn samples this makes the per-sample outputs bit-identical
    for any worker count.
    """
    x = np.asarray(x, dtype=float)
    total = len(prepared)
    e_out = np.empty(total)
    rho_out = np.empty(total)
    fin_out = np.empty(total, dtype=bool)
    grad_out = np.empty((total, cons.decision_dim)) if want_gradient else None
    spans = [(lo, min(lo + _CHUNK, total)) for lo in range(0, total, _CHUNK)]

    def run(span: tuple[int, int]) -> None:
        lo, hi = span
        part = prepared.slice(lo, hi)
        x_part = x[lo:hi] if x.ndim == 2 else x
        radii = batch_radii(cons, part, x_part, options)
        e_out[lo:hi] = batch_probability(radii, part.dimension)
        rho_out[lo:hi] = radii.rho
        fin_out[lo:hi] = radii.finite
        if want_gradient:
            grad_out[lo:hi] = batch_gradient(cons, part, x_part, radii)

    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, spans))
    else:
        for span in spans:
            run(span)
    return BatchEvaluation(e_values=e_out, gradients=grad_out, rho=rho_out,
                           finite=fin_out)


# ---------------------------------------------------------------------------
# Single-sample operations (thin wrappers over the batch kernel)
# ---------------------------------------------------------------------------

def _prepared_from_params(params: GaussianParams, v: np.ndarray) -> PreparedSamples:
    v = np.asarray(v, dtype=float)
    if abs(float(np.linalg.norm(v)) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    ray = params.cholesky @ v
    return PreparedSamples(params.mean[None, :], ray[None, :],
                           np.zeros((1, 1)))


def radius(cons: Constraint, params: GaussianParams, x, v,
           options: SolverOptions = _DEFAULT_OPTIONS) -> RadiusResult:
    """Boundary radius of one ray; Finite(rho, boundary point) or Infinite."""
    prepared = _prepared_from_params(params, v)
    radii = batch_radii(cons, prepared, x, options)
    if not bool(radii.finite[0]):
        return RadiusResult(kind="infinite", truncation_radius=radii.r_max)
    rho_val = float(radii.rho[0])
    boundary = prepared.origins[0] + rho_val * prepared.rays[0]
    if np.asarray(x).ndim == 1:
        residual = cons.value_at(x, boundary)
        gz = np.asarray(cons.grad_z(np.asarray(x, dtype=float), boundary[None, :]),
                        dtype=float)[0]
        slope = abs(float(gz @ prepared.rays[0]))
        # |g| at the reported boundary is bounded by the directional slope
        # times the final bisection interval, plus the scaled base tolerance.
        budget = (options.boundary_rtol * (1.0 + abs(float(radii.g_origin[0])))
                  + (slope + 1.0) * options.rel_tol * (1.0 + rho_val))
        if abs(residual) > budget:
            raise ConvexityViolationError(
                f"boundary residual g = {residual:.3g} exceeds its budget "
                f"{budget:.3g}; the constraint is discontinuous along the ray")
    return RadiusResult(kind="finite", truncation_radius=radii.r_max,
                        rho=rho_val, boundary_point=boundary)


def radial_probability(cons: Constraint, model: ParameterModel,
                       sample: RadialSample, x,
                       options: SolverOptions = _DEFAULT_OPTIONS) -> float:
    """Kernel value e_c(x, v) for one sample."""
    prepared = prepare_samples(model, [sample])
    ev = evaluate_batch(cons, prepared, x, options=options)
    return float(ev.e_values[0])


def grad_rho(cons: Constraint, params: GaussianParams, x, v,
             result: RadiusResult) -> np.ndarray:
    """Implicit-function gradient of the radius at a finite ray boundary."""
    if not result.finite:
        raise ValueError("grad_rho requires a finite RadiusResult")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    boundary = result.boundary_point[None, :]
    gx = np.asarray(cons.grad_x(x, boundary), dtype=float)[0]
    gz = np.asarray(cons.grad_z(x, boundary), dtype=float)[0]
    ray = params.cholesky @ v
    denom = float(gz @ ray)
    g0 = cons.value_at(x, params.mean)
    bound = -g0 / result.rho
    if denom <= 0.0 or denom < bound - _DENOM_SLACK:
        raise DegenerateBoundaryError(
            f"boundary directional derivative {denom:.6g} violates its lower "
            f"bound {bound:.6g}")
    return -gx / denom


def radial_gradient(cons: Constraint, model: ParameterModel,
                    sample: RadialSample, x,
                    options: SolverOptions = _DEFAULT_OPTIONS) -> np.ndarray:
    """Gradient of the kernel in x for one sample; zero on infinite rays."""
    prepared = prepare_samples(model, [sample])
    ev = evaluate_batch(cons, prepared, x, want_gradient=True, options=options)
    return ev.gradients[0]
