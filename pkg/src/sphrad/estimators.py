"""Monte Carlo machinery for the probability function and its gradient.

The empirical spherical estimators average the radial kernel (and its
gradient) over draws (v_i, c_i) from the product of the uniform sphere
measure and the parameter prior:

    Phi_N(x)      = (1/N) sum_i e_{c_i}(x, v_i)
    grad Phi_N(x) = (1/N) sum_i grad_x e_{c_i}(x, v_i)

Three sampling plans produce such draws:

* ``iid``        - N independent pairs, as the convergence theory assumes.
* ``mcmc``       - fresh-uniform directions paired with a random-walk
                   Metropolis chain targeting the (unnormalized) prior
                   density; a surrogate for priors that cannot be sampled
                   directly.
* ``symmetrized``- a classical variance-reduction design for spherical-radial
                   integration: each base draw is a random orthonormal frame
                   expanded into its 2m signed axes, paired with stratified
                   (inverse-CDF) parameter draws when the model provides a
                   quantile map. Every sample is still marginally distributed
                   as sphere x prior, so the estimators remain unbiased; the
                   leading direction-parameter interaction terms cancel
                   within each frame. This is what makes small-sample figure
                   replication match the published accuracy.

Sampling is always performed centrally; workers only evaluate already-drawn
samples in fixed-size chunks, and per-sample arrays are reduced with numpy's
pairwise summation after full assembly, so results are bit-identical across
worker counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

import numpy as np

from .distributions import sample_sphere
from .errors import ConfigError
from .model import Constraint, ParameterModel, SlaterReport, sample_parameter
from .radial import (
    RadialSample,
    SolverOptions,
    evaluate_batch,
    prepare_samples,
)
from .rng import RngStream

__all__ = [
    "SamplePlan",
    "SampleBatch",
    "ProbabilityEstimate",
    "GradientEstimate",
    "VarianceComparison",
    "SweepPoint",
    "draw_samples",
    "mcmc_samples",
    "symmetrized_samples",
    "samples_for_plan",
    "estimate_probability",
    "estimate_gradient",
    "naive_estimate",
    "dominance_check",
    "variance_comparison",
    "sweep",
]

# Stream allocation under one seed. Spherical and naive draws are disjoint so
# estimator comparisons at a shared seed are independent.
_STREAM_SAMPLES = 0
_STREAM_NAIVE = 1
_STREAM_MCMC_CHAIN = 2
_STREAM_MCMC_DIRECTIONS = 3
_STREAM_FRESH_BASE = 16

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class SamplePlan:
    """How many samples to draw, from which seed, and with which sampler."""

    count: int
    seed: int
    sampler: Literal["iid", "mcmc", "symmetrized"] = "iid"
    burn_in: int = 1000
    thinning: int = 1
    proposal_scale: float | None = None

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError(f"sample count must be >= 1, got {self.count}")
        if self.sampler not in ("iid", "mcmc", "symmetrized"):
            raise ValueError(f"unknown sampler kind {self.sampler!r}")
        if self.burn_in < 0 or self.thinning < 1:
            raise ValueError("burn_in must be >= 0 and thinning >= 1")
        if self.proposal_scale is not None and self.proposal_scale <= 0.0:
            raise ValueError("proposal_scale must be positive")


class SampleBatch(Sequence):
    """Immutable struct-of-arrays sample list; indexing yields RadialSample."""

    def __init__(self, directions: np.ndarray, parameters: np.ndarray,
                 acceptance_rate: float | None = None):
        self.directions = np.asarray(directions, dtype=float)
        self.parameters = np.asarray(parameters, dtype=float)
        if len(self.directions) != len(self.parameters):
            raise ValueError("directions and parameters must have equal length")
        self.acceptance_rate = acceptance_rate

    def __len__(self) -> int:
        return len(self.directions)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return SampleBatch(self.directions[i], self.parameters[i],
                               self.acceptance_rate)
        return RadialSample(self.directions[i], self.parameters[i])

    def __iter__(self) -> Iterator[RadialSample]:
        for i in range(len(self)):
            yield self[i]


def draw_samples(model: ParameterModel, plan: SamplePlan,
                 rng: RngStream | None = None) -> SampleBatch:
    """N independent pairs (v_i, c_i): uniform directions, prior parameters.

    Deterministic given (plan.seed, i): directions are drawn first, then
    parameters, from a single counter-based stream.
    """
    if plan.sampler != "iid":
        raise ValueError("draw_samples services the iid plan; use samples_for_plan")
    gen = (rng or RngStream(plan.seed, _STREAM_SAMPLES)).generator()
    directions = sample_sphere(model.dimension, gen, size=plan.count)
    parameters = sample_parameter(model, gen, size=plan.count)
    return SampleBatch(directions, parameters)


def symmetrized_samples(model: ParameterModel, plan: SamplePlan,
                        rng: RngStream | None = None) -> SampleBatch:
    """Frame-symmetrized directions with stratified parameters.

    Draws ceil(N / 2m) Haar-random orthonormal frames and expands each into
    its 2m signed axes; each frame shares one parameter draw. Parameters come
    from the model's inverse-CDF map on shuffled stratified uniform levels
    when available, otherwise i.i.d. from the prior. Counts that are not a
    multiple of 2m are truncated (marginals stay exact; the cancellation
    within the last frame is partial).
    """
    gen = (rng or RngStream(plan.seed, _STREAM_SAMPLES)).generator()
    m = model.dimension
    group = 2 * m
    base = (plan.count + group - 1) // group

    raw = gen.standard_normal((base, m, m))
    q, r = np.linalg.qr(raw)
    signs = np.sign(np.einsum("bii->bi", r))
    signs[signs == 0.0] = 1.0
    q = q * signs[:, None, :]
    # frame-major layout: +q1, -q1, +q2, -q2, ... per frame
    dirs = np.empty((base, group, m))
    dirs[:, 0::2, :] = np.transpose(q, (0, 2, 1))
    dirs[:, 1::2, :] = -np.transpose(q, (0, 2, 1))
    dirs = dirs.reshape(base * group, m)

    p = model.parameter_dimension
    if model.quantile is not None:
        levels = np.empty((base, p))
        for j in range(p):
            levels[:, j] = (gen.permutation(base) + gen.random(base)) / base
        params = np.asarray(model.quantile(levels), dtype=float).reshape(base, p)
    else:
        params = sample_parameter(model, gen, size=base)
    params = np.repeat(params, group, axis=0)
    return SampleBatch(dirs[:plan.count], params[:plan.count])


def mcmc_samples(model: ParameterModel, plan: SamplePlan,
                 rng: RngStream | None = None) -> SampleBatch:
    """Random-walk Metropolis over the parameter space, fresh-uniform directions.

    The chain targets the model's unnormalized density with a Gaussian
    proposal (scale defaults to half the declared parameter-space diameter);
    ``burn_in`` states are discarded and every ``thinning``-th state kept.
    Directions are exactly uniform each step since the sphere factor of the
    target is directly samplable. The acceptance rate is reported on the
    returned batch, never raised on: a mistuned proposal is a diagnostic.
    """
    if model.density is None:
        raise ConfigError("MCMC sampling requires the model to provide an "
                          "(unnormalized) prior density")
    base = rng or RngStream(plan.seed, _STREAM_MCMC_CHAIN)
    chain_gen = base.generator()
    dir_gen = (rng.spawn(1) if rng else RngStream(plan.seed, _STREAM_MCMC_DIRECTIONS)).generator()
    scale = plan.proposal_scale
    if scale is None:
        scale = 0.5 * (model.diameter_hint or 2.0)
    p = model.parameter_dimension
    steps = plan.burn_in + plan.count * plan.thinning

    state = sample_parameter(model, chain_gen)
    dens = float(model.density(state[None, :])[0])
    proposals = chain_gen.standard_normal((steps, p)) * scale
    accept_levels = chain_gen.random(steps)
    kept = np.empty((plan.count, p))
    accepted = 0
    n_kept = 0
    for i in range(steps):
        candidate = state + proposals[i]
        cand_dens = float(model.density(candidate[None, :])[0])
        if cand_dens > 0.0 and (dens <= 0.0 or accept_levels[i] * dens <= cand_dens):
            state = candidate
            dens = cand_dens
            accepted += 1
        j = i - plan.burn_in
        if j >= 0 and (j + 1) % plan.thinning == 0 and n_kept < plan.count:
            kept[n_kept] = state
            n_kept += 1
    if n_kept != plan.count:  # pragma: no cover - arithmetic guarantees fill
        raise RuntimeError("MCMC bookkeeping failed to fill the sample batch")
    directions = sample_sphere(model.dimension, dir_gen, size=plan.count)
    return SampleBatch(directions, kept, acceptance_rate=accepted / steps)


def samples_for_plan(model: ParameterModel, plan: SamplePlan,
                     rng: RngStream | None = None) -> SampleBatch:
    """Dispatch on the plan's sampler kind."""
    if plan.sampler == "iid":
        return draw_samples(model, plan, rng)
    if plan.sampler == "symmetrized":
        return symmetrized_samples(model, plan, rng)
    return mcmc_samples(model, plan, rng)


# ---------------------------------------------------------------------------
# Estimates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbabilityEstimate:
    """Phi_N(x) with its plug-in variance and a clipped 95% interval."""

    value: float
    variance: float
    stderr: float
    ci95: tuple[float, float]
    n: int
    verified_slater: bool = False
    degenerate_n: bool = False


@dataclass(frozen=True)
class GradientEstimate:
    """grad Phi_N(x) with its plug-in covariance and per-coordinate stderr."""

    value: np.ndarray
    covariance: np.ndarray
    stderr: np.ndarray
    n: int


def _probability_from_values(e_values: np.ndarray,
                             slater: SlaterReport | None) -> ProbabilityEstimate:
    n = len(e_values)
    value = float(np.sum(e_values) / n)
    degenerate = n < 2
    if degenerate:
        var = 0.0
    else:
        centered = e_values - value
        var = float(np.sum(centered * centered) / (n - 1))
    stderr = math.sqrt(var / n)
    ci = (max(0.0, value - _Z95 * stderr), min(1.0, value + _Z95 * stderr))
    return ProbabilityEstimate(value=value, variance=var, stderr=stderr, ci95=ci,
                               n=n, verified_slater=bool(slater and slater.passed),
                               degenerate_n=degenerate)


def _gradient_from_values(gradients: np.ndarray) -> GradientEstimate:
    n, dim = gradients.shape
    value = np.sum(gradients, axis=0) / n
    if n < 2:
        cov = np.zeros((dim, dim))
    else:
        centered = gradients - value
        cov = centered.T @ centered / (n - 1)
        cov = 0.5 * (cov + cov.T)
    stderr = np.sqrt(np.diag(cov) / n)
    return GradientEstimate(value=value, covariance=cov, stderr=stderr, n=n)


def estimate_probability(cons: Constraint, model: ParameterModel, x,
                         samples: SampleBatch | Sequence[RadialSample], *,
                         options: SolverOptions | None = None, workers: int = 1,
                         slater: SlaterReport | None = None) -> ProbabilityEstimate:
    """Average the radial kernel over the samples at decision vector x."""
    prepared = prepare_samples(model, samples)
    if len(prepared) == 0:
        raise ValueError("estimate_probability needs at least one sample")
    ev = evaluate_batch(cons, prepared, np.asarray(x, dtype=float),
                        options=options or SolverOptions(), workers=workers)
    return _probability_from_values(ev.e_values, slater)


def estimate_gradient(cons: Constraint, model: ParameterModel, x,
                      samples: SampleBatch | Sequence[RadialSample], *,
                      options: SolverOptions | None = None, workers: int = 1
                      ) -> GradientEstimate:
    """Average the per-sample kernel gradients at decision vector x."""
    prepared = prepare_samples(model, samples)
    if len(prepared) == 0:
        raise ValueError("estimate_gradient needs at least one sample")
    ev = evaluate_batch(cons, prepared, np.asarray(x, dtype=float),
                        want_gradient=True, options=options or SolverOptions(),
                        workers=workers)
    return _gradient_from_values(ev.gradients)


def naive_estimate(cons: Constraint, model: ParameterModel, x, count: int,
                   seed: int, rng: RngStream | None = None) -> ProbabilityEstimate:
    """Indicator average over raw draws of the random vector.

    Draws c ~ prior, then xi = mean(c) + L(c) w with standard normal w, and
    averages 1{g(x, xi) <= 0}. The plug-in variance is p(1 - p), the
    population asymptotic variance of this estimator. The default stream is
    disjoint from the spherical sampling stream of the same seed.
    """
    if count < 1:
        raise ValueError(f"sample count must be >= 1, got {count}")
    x = np.asarray(x, dtype=float)
    gen = (rng or RngStream(seed, _STREAM_NAIVE)).generator()
    hits = 0
    chunk = 1 << 18
    for lo in range(0, count, chunk):
        n = min(chunk, count - lo)
        params = sample_parameter(model, gen, size=n)
        means, chols = model.params_batch(params)
        noise = gen.standard_normal((n, model.dimension))
        points = means + np.einsum("nij,nj->ni", chols, noise)
        hits += int(np.count_nonzero(
            np.asarray(cons.value(x, points), dtype=float) <= 0.0))
    p_hat = hits / count
    var = p_hat * (1.0 - p_hat)
    stderr = math.sqrt(var / count)
    ci = (max(0.0, p_hat - _Z95 * stderr), min(1.0, p_hat + _Z95 * stderr))
    return ProbabilityEstimate(value=p_hat, variance=var, stderr=stderr, ci95=ci,
                               n=count, degenerate_n=count < 2)


@dataclass(frozen=True)
class VarianceComparison:
    """Plug-in variances of the two estimators on independent sample sets."""

    sigma2_spherical: float
    sigma2_naive: float
    stderr_spherical: float
    stderr_naive: float
    dominance: bool
    n: int
    seed: int


def dominance_check(e_values: np.ndarray, naive: ProbabilityEstimate
                    ) -> tuple[float, float, float, bool]:
    """Plug-in variance of the kernel values, its standard error, the naive
    stderr, and the dominance flag with three combined standard errors of
    slack ("spherical is not measurably worse", never a strict inequality on
    noisy plug-ins)."""
    count = len(e_values)
    mean_e = float(np.sum(e_values) / count)
    centered = e_values - mean_e
    s2 = float(np.sum(centered ** 2) / (count - 1))
    m4 = float(np.sum(centered ** 4) / count)
    se_s2 = math.sqrt(max(m4 - s2 * s2, 0.0) / count)
    p = naive.value
    se_naive = abs(1.0 - 2.0 * p) * math.sqrt(p * (1.0 - p) / naive.n)
    dominance = s2 <= naive.variance + 3.0 * math.hypot(se_s2, se_naive)
    return s2, se_s2, se_naive, dominance


def variance_comparison(cons: Constraint, model: ParameterModel, x, count: int,
                        seed: int, *, workers: int = 1) -> VarianceComparison:
    """Compare plug-in estimator variances at x on two independent sample sets."""
    if count < 2:
        raise ValueError("variance comparison needs at least 2 samples")
    x = np.asarray(x, dtype=float)
    plan = SamplePlan(count=count, seed=seed)
    batch = draw_samples(model, plan)
    prepared = prepare_samples(model, batch)
    ev = evaluate_batch(cons, prepared, x, workers=workers)
    naive = naive_estimate(cons, model, x, count, seed)
    s2, se_s2, se_naive, dominance = dominance_check(ev.e_values, naive)
    return VarianceComparison(sigma2_spherical=s2, sigma2_naive=naive.variance,
                              stderr_spherical=se_s2, stderr_naive=se_naive,
                              dominance=dominance, n=count, seed=seed)


@dataclass(frozen=True)
class SweepPoint:
    x: np.ndarray
    probability: ProbabilityEstimate
    gradient: GradientEstimate | None


def sweep(cons: Constraint, model: ParameterModel, x_grid, plan: SamplePlan, *,
          crn: bool = True, want_gradient: bool = True,
          options: SolverOptions | None = None, workers: int = 1,
          slater: SlaterReport | None = None) -> list[SweepPoint]:
    """Estimate value (and gradient) over a grid of decision vectors.

    With ``crn`` (the default) one sample set is drawn and reused at every
    grid point; the resulting map x -> Phi_N(x) is then a fixed average of
    kernels, hence continuous in x, which is what makes estimated curves
    smooth and differentiable. Without it, each grid point gets its own
    independent sample set (stream 16 + i under the plan seed).
    """
    grid = [np.atleast_1d(np.asarray(x, dtype=float)) for x in x_grid]
    if not grid:
        raise ValueError("sweep needs a nonempty grid")
    opts = options or SolverOptions()
    rows: list[SweepPoint] = []
    prepared = None
    if crn:
        prepared = prepare_samples(model, samples_for_plan(model, plan))
    for i, x in enumerate(grid):
        if crn:
            part = prepared
        else:
            batch = samples_for_plan(model, plan,
                                     rng=RngStream(plan.seed, _STREAM_FRESH_BASE + i))
            part = prepare_samples(model, batch)
        ev = evaluate_batch(cons, part, x, want_gradient=want_gradient,
                            options=opts, workers=workers)
        rows.append(SweepPoint(
            x=x,
            probability=_probability_from_values(ev.e_values, slater),
            gradient=_gradient_from_values(ev.gradients) if want_gradient else None))
    return rows
