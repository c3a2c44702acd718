"""Probability primitives: chi radial law, noncentral chi-square, samplers.

The chi law with ``m`` degrees of freedom is the radial component of a
standard Gaussian vector in R^m written as R * Theta with Theta uniform on
the unit sphere. Its density here is probability-normalized,

    chi_m(r) = 2^(1-m/2) / Gamma(m/2) * r^(m-1) * exp(-r^2 / 2),

so that integrating it over a radius interval yields a probability; the CDF
is the regularized lower incomplete gamma P(m/2, r^2/2).

The noncentral chi-square CDF/PDF are evaluated as Poisson mixtures of
central chi-square terms, truncated once the unaccounted Poisson mass drops
below 1e-14. Incomplete gamma and beta functions are implemented directly
(series + Lentz continued fractions) so that the package has no runtime
dependency beyond numpy; tests cross-check them against independent oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import RngStream

__all__ = [
    "ChiLaw",
    "NoncentralChiSquareLaw",
    "chi_pdf",
    "chi_cdf",
    "chi_quantile",
    "noncentral_chisq_cdf",
    "noncentral_chisq_pdf",
    "noncentral_chisq_cdf_grid",
    "noncentral_chisq_pdf_grid",
    "sample_sphere",
    "sample_beta_symmetric",
    "beta_symmetric_cdf",
    "beta_symmetric_quantile",
]

_TINY = 1e-300
_MAX_ITER = 600
_POISSON_TAIL = 1e-14


# ---------------------------------------------------------------------------
# Regularized incomplete gamma, vectorized over x for fixed a.
# Series below the standard x = a + 1 switch point, Lentz continued fraction
# above it.
# ---------------------------------------------------------------------------

def _gamma_series(a: float, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0.0
    if not np.any(pos):
        return out
    xs = x[pos]
    term = np.full_like(xs, 1.0 / a)
    total = term.copy()
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term = term * (xs / ap)
        total += term
        if np.all(term <= np.abs(total) * 1e-17):
            break
    out[pos] = total * np.exp(a * np.log(xs) - xs - math.lgamma(a))
    return out


def _gamma_cf(a: float, x: np.ndarray) -> np.ndarray:
    """Upper tail Q(a, x) for x >= a + 1 via modified Lentz."""
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        np.copyto(d, _TINY, where=np.abs(d) < _TINY)
        c = b + an / c
        np.copyto(c, _TINY, where=np.abs(c) < _TINY)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    return h * np.exp(a * np.log(x) - x - math.lgamma(a))


def _reg_lower_gamma(a: float, x: np.ndarray) -> np.ndarray:
    """P(a, x), elementwise over x; a is a fixed positive scalar."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    low = x < a + 1.0
    if np.any(low):
        out[low] = _gamma_series(a, x[low])
    high = ~low
    if np.any(high):
        out[high] = 1.0 - _gamma_cf(a, x[high])
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Regularized incomplete beta, vectorized over x.
# ---------------------------------------------------------------------------

def _beta_cf(a: float, b: float, x: np.ndarray) -> np.ndarray:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    np.copyto(d, _TINY, where=np.abs(d) < _TINY)
    d = 1.0 / d
    h = d.copy()
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        np.copyto(d, _TINY, where=np.abs(d) < _TINY)
        c = 1.0 + aa / c
        np.copyto(c, _TINY, where=np.abs(c) < _TINY)
        d = 1.0 / d
        h = h * d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        np.copyto(d, _TINY, where=np.abs(d) < _TINY)
        c = 1.0 + aa / c
        np.copyto(c, _TINY, where=np.abs(c) < _TINY)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    return h


def _reg_inc_beta(a: float, b: float, x: np.ndarray) -> np.ndarray:
    """I_x(a, b) elementwise; continued fraction on whichever tail converges."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    interior = (x > 0.0) & (x < 1.0)
    out[x <= 0.0] = 0.0
    out[x >= 1.0] = 1.0
    if np.any(interior):
        xi = x[interior]
        front = np.exp(math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                       + a * np.log(xi) + b * np.log1p(-xi))
        res = np.empty_like(xi)
        direct = xi < (a + 1.0) / (a + b + 2.0)
        if np.any(direct):
            res[direct] = front[direct] * _beta_cf(a, b, xi[direct]) / a
        flip = ~direct
        if np.any(flip):
            res[flip] = 1.0 - front[flip] * _beta_cf(b, a, 1.0 - xi[flip]) / b
        out[interior] = res
    return np.clip(out, 0.0, 1.0)


def _as_float_array(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _maybe_scalar(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


# ---------------------------------------------------------------------------
# Chi law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChiLaw:
    """Radial law of a standard Gaussian vector in R^dof."""

    dof: int

    def __post_init__(self) -> None:
        if int(self.dof) < 1:
            raise ValueError(f"chi law needs a positive integer dof, got {self.dof}")


def chi_pdf(law: ChiLaw, r):
    """Density of the chi law at radius r >= 0 (elementwise on arrays)."""
    m = law.dof
    rr, scalar = _as_float_array(r)
    if np.any(rr < 0.0):
        raise ValueError("chi_pdf requires r >= 0")
    log_norm = (1.0 - 0.5 * m) * math.log(2.0) - math.lgamma(0.5 * m)
    with np.errstate(divide="ignore"):
        log_r = np.where(rr > 0.0, np.log(rr), -np.inf)
    out = np.exp(log_norm + (m - 1) * log_r - 0.5 * rr * rr)
    if m == 1:
        # r^0 == 1 even at r == 0
        out = np.where(rr == 0.0, math.sqrt(2.0 / math.pi), out)
    else:
        out = np.where(rr == 0.0, 0.0, out)
    return _maybe_scalar(out, scalar)


def chi_cdf(law: ChiLaw, r):
    """P(R <= r) = regularized lower incomplete gamma P(m/2, r^2/2)."""
    rr, scalar = _as_float_array(r)
    if np.any(rr < 0.0):
        raise ValueError("chi_cdf requires r >= 0")
    out = _reg_lower_gamma(0.5 * law.dof, 0.5 * rr * rr)
    return _maybe_scalar(out, scalar)


def chi_quantile(law: ChiLaw, p: float) -> float:
    """Radius r with chi_cdf(r) = p, by monotone bracketing and bisection.

    Rejects p >= 1 (the quantile diverges); p = 0 maps to 0.
    """
    p = float(p)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"chi_quantile requires 0 <= p < 1, got {p}")
    if p == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while chi_cdf(law, hi) < p:
        lo, hi = hi, hi * 2.0
        if hi > 1e8:  # pragma: no cover - cdf reaches any p < 1 long before
            raise ArithmeticError("chi_quantile bracket failed to close")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi_cdf(law, mid) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * (1.0 + hi):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Noncentral chi-square
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoncentralChiSquareLaw:
    """Law of ||Z + mu||^2 for standard normal Z, with lambda = ||mu||^2."""

    dof: int
    noncentrality: float

    def __post_init__(self) -> None:
        if int(self.dof) < 1:
            raise ValueError(f"dof must be a positive integer, got {self.dof}")
        if self.noncentrality < 0.0:
            raise ValueError(f"noncentrality must be >= 0, got {self.noncentrality}")


def _poisson_window(half_lam: float) -> tuple[int, int]:
    """Index window around floor(half_lam) holding all but ~1e-14 Poisson mass."""
    if half_lam <= 25.0:
        return 0, int(half_lam + 10.0 * math.sqrt(half_lam + 1.0) + 30.0)
    spread = 10.0 * math.sqrt(half_lam) + 30.0
    return max(0, int(half_lam - spread)), int(half_lam + spread)


def _poisson_weights(half_lam: float, jlo: int, jhi: int) -> np.ndarray:
    j = np.arange(jlo, jhi + 1, dtype=float)
    return np.exp(j * math.log(half_lam) - half_lam - np.array(
        [math.lgamma(v + 1.0) for v in j]))


def _central_terms(k: int, t: float, jlo: int, jhi: int, density: bool) -> np.ndarray:
    """Central chi-square cdf (or pdf) with k+2j dof at t, for j in [jlo, jhi]."""
    half_t = 0.5 * t
    js = np.arange(jlo, jhi + 1)
    if density:
        out = np.empty(js.shape, dtype=float)
        for i, j in enumerate(js):
            a = 0.5 * k + j
            out[i] = 0.5 * math.exp((a - 1.0) * math.log(half_t) - half_t
                                    - math.lgamma(a)) if half_t > 0 else 0.0
        return out
    return np.array([float(_reg_lower_gamma(0.5 * k + j, np.asarray(half_t)))
                     for j in js])


def _ncx2_eval(k: int, lam: float, t: float, density: bool) -> float:
    if t < 0.0:
        raise ValueError("noncentral chi-square requires t >= 0")
    if t == 0.0:
        return 0.0 if not density else (math.exp(-0.5 * lam) * 0.5 if k == 2 else 0.0)
    if lam == 0.0:
        terms = _central_terms(k, t, 0, 0, density)
        return float(terms[0])
    half = 0.5 * lam
    jlo, jhi = _poisson_window(half)
    while True:
        w = _poisson_weights(half, jlo, jhi)
        if 1.0 - w.sum() <= _POISSON_TAIL or jhi - jlo > 10_000_000:
            break
        jhi = jhi + max(16, (jhi - jlo) // 2)  # widen until the tail bound holds
    terms = _central_terms(k, t, jlo, jhi, density)
    return float(np.dot(w, terms))


def noncentral_chisq_cdf(law: NoncentralChiSquareLaw, t: float) -> float:
    """CDF at t, via the Poisson mixture of central chi-square CDFs."""
    return min(1.0, _ncx2_eval(law.dof, law.noncentrality, float(t), density=False))


def noncentral_chisq_pdf(law: NoncentralChiSquareLaw, t: float) -> float:
    """Density at t, same Poisson-mixture truncation as the CDF."""
    return _ncx2_eval(law.dof, law.noncentrality, float(t), density=True)


def _ncx2_grid(k: int, lams: np.ndarray, t: float, density: bool) -> np.ndarray:
    lams = np.asarray(lams, dtype=float)
    if np.any(lams < 0.0):
        raise ValueError("noncentralities must be >= 0")
    half = 0.5 * lams
    hmax = float(half.max(initial=0.0))
    _, jhi = _poisson_window(hmax)
    terms = _central_terms(k, t, 0, jhi, density)
    js = np.arange(jhi + 1, dtype=float)
    lgam = np.array([math.lgamma(v + 1.0) for v in js])
    w = np.zeros((half.size, jhi + 1))
    pos = half > 0.0
    if np.any(pos):
        hp = half[pos]
        w[pos] = np.exp(js[None, :] * np.log(hp)[:, None] - hp[:, None] - lgam[None, :])
    w[~pos, 0] = 1.0  # lambda = 0 collapses onto the central term
    deficit = 1.0 - w.sum(axis=1)
    if np.any(deficit > _POISSON_TAIL):  # pragma: no cover - window is generous
        raise ArithmeticError("Poisson window too narrow for requested noncentralities")
    return w @ terms


def noncentral_chisq_cdf_grid(k: int, lams, t: float) -> np.ndarray:
    """Vectorized CDF over an array of noncentralities at a shared t.

    Shares the central chi-square term table across all lambdas, which is what
    makes quadrature oracles over a parameter grid cheap.
    """
    return np.clip(_ncx2_grid(k, lams, float(t), density=False), 0.0, 1.0)


def noncentral_chisq_pdf_grid(k: int, lams, t: float) -> np.ndarray:
    """Vectorized density over an array of noncentralities at a shared t."""
    return _ncx2_grid(k, lams, float(t), density=True)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

def sample_sphere(m: int, rng: RngStream | np.random.Generator, size: int | None = None):
    """Uniform draw(s) on the unit sphere S^{m-1} by normalized Gaussians.

    Returns shape (m,) for size=None, else (size, m). The all-zero Gaussian
    vector (measure zero, but possible in floating point) is redrawn.
    """
    if m < 1:
        raise ValueError(f"dimension must be >= 1, got {m}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    n = 1 if size is None else int(size)
    out = gen.standard_normal((n, m))
    norms = np.linalg.norm(out, axis=1)
    while np.any(norms == 0.0):  # pragma: no cover - probability ~0
        bad = norms == 0.0
        out[bad] = gen.standard_normal((int(bad.sum()), m))
        norms = np.linalg.norm(out, axis=1)
    out /= norms[:, None]
    return out[0] if size is None else out


def sample_beta_symmetric(delta: float, rng: RngStream | np.random.Generator,
                          size: int | None = None):
    """Beta(delta, delta) draw(s) via the two-Gamma-ratio construction."""
    if delta <= 0.0:
        raise ValueError(f"Beta(delta, delta) requires delta > 0, got {delta}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    n = 1 if size is None else int(size)
    x = gen.standard_gamma(delta, n)
    y = gen.standard_gamma(delta, n)
    d = x / (x + y)
    return float(d[0]) if size is None else d


def beta_symmetric_cdf(delta: float, x):
    """CDF of Beta(delta, delta): the regularized incomplete beta I_x(d, d)."""
    if delta <= 0.0:
        raise ValueError(f"delta must be > 0, got {delta}")
    xx, scalar = _as_float_array(x)
    return _maybe_scalar(_reg_inc_beta(delta, delta, xx), scalar)


def beta_symmetric_quantile(delta: float, p):
    """Inverse CDF of Beta(delta, delta), elementwise, by bisection.

    Used for stratified (inverse-CDF) parameter sampling; accuracy ~1e-14.
    """
    if delta <= 0.0:
        raise ValueError(f"delta must be > 0, got {delta}")
    pp, scalar = _as_float_array(p)
    if np.any((pp < 0.0) | (pp > 1.0)):
        raise ValueError("quantile levels must lie in [0, 1]")
    lo = np.zeros_like(pp)
    hi = np.ones_like(pp)
    for _ in range(55):
        mid = 0.5 * (lo + hi)
        below = _reg_inc_beta(delta, delta, mid) < pp
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = np.where(pp == 0.0, 0.0, np.where(pp == 1.0, 1.0, 0.5 * (lo + hi)))
    return _maybe_scalar(out, scalar)
