import math

import numpy as np
import pytest

from sphrad.distributions import (
    ChiLaw,
    NoncentralChiSquareLaw,
    beta_symmetric_cdf,
    beta_symmetric_quantile,
    chi_cdf,
    chi_pdf,
    chi_quantile,
    noncentral_chisq_cdf,
    noncentral_chisq_cdf_grid,
    noncentral_chisq_pdf,
    noncentral_chisq_pdf_grid,
    sample_beta_symmetric,
    sample_sphere,
)
from sphrad.rng import RngStream


class TestChiLaw:
    def test_pdf_m2_matches_rayleigh_form(self):
        # for m = 2 the density is r * exp(-r^2/2)
        assert chi_pdf(ChiLaw(2), 1.0) == pytest.approx(math.exp(-0.5), abs=1e-15)

    def test_pdf_vanishes_at_zero_for_m_gt_1(self):
        assert chi_pdf(ChiLaw(2), 0.0) == 0.0
        assert chi_pdf(ChiLaw(5), 0.0) == 0.0

    def test_pdf_m1_at_zero_is_half_normal(self):
        assert chi_pdf(ChiLaw(1), 0.0) == pytest.approx(math.sqrt(2 / math.pi))

    def test_pdf_m3_normalized_value(self):
        expected = math.sqrt(2 / math.pi) * math.exp(-0.5)  # 0.483941...
        assert chi_pdf(ChiLaw(3), 1.0) == pytest.approx(expected, abs=1e-14)

    @pytest.mark.parametrize("m", [1, 2, 3, 4, 7, 10])
    def test_pdf_integrates_to_one(self, m):
        nodes, weights = np.polynomial.legendre.leggauss(300)
        hi = 20.0
        r = 0.5 * hi * (nodes + 1.0)
        total = 0.5 * hi * float(weights @ chi_pdf(ChiLaw(m), r))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_cdf_m2_closed_form(self):
        law = ChiLaw(2)
        assert chi_cdf(law, math.sqrt(2.0)) == pytest.approx(1 - math.exp(-1), abs=1e-13)
        rng = np.random.default_rng(7)
        for r in rng.uniform(0.0, 10.0, 100):
            assert abs(chi_cdf(law, r) - (1 - math.exp(-r * r / 2))) <= 1e-12

    def test_cdf_at_zero_and_saturation(self):
        for m in (1, 2, 6):
            law = ChiLaw(m)
            assert chi_cdf(law, 0.0) == 0.0
            assert chi_cdf(law, 40.0) == pytest.approx(1.0, abs=1e-14)

    def test_cdf_m3_against_quadrature(self):
        # adaptive-free check: high-order fixed quadrature of the pdf on [0, 1]
        nodes, weights = np.polynomial.legendre.leggauss(200)
        r = 0.5 * (nodes + 1.0)
        by_quad = 0.5 * float(weights @ chi_pdf(ChiLaw(3), r))
        assert chi_cdf(ChiLaw(3), 1.0) == pytest.approx(by_quad, abs=1e-12)
        assert chi_cdf(ChiLaw(3), 1.0) == pytest.approx(0.19874804309879915, abs=1e-12)

    def test_cdf_nondecreasing(self):
        law = ChiLaw(4)
        rs = np.linspace(0.0, 8.0, 200)
        vals = chi_cdf(law, rs)
        assert np.all(np.diff(vals) >= -1e-15)

    def test_quantile_roundtrip_across_dofs(self):
        for m in range(1, 11):
            law = ChiLaw(m)
            for p in np.arange(0.01, 1.0, 0.01):
                assert abs(chi_cdf(law, chi_quantile(law, p)) - p) <= 1e-10

    def test_quantile_closed_form_m2(self):
        assert chi_quantile(ChiLaw(2), 1 - math.exp(-1)) == pytest.approx(
            math.sqrt(2.0), abs=1e-12)
        assert chi_quantile(ChiLaw(2), 0.0) == 0.0

    def test_quantile_rejects_p_ge_one(self):
        with pytest.raises(ValueError):
            chi_quantile(ChiLaw(2), 1.0)

    def test_dof_validation(self):
        with pytest.raises(ValueError):
            ChiLaw(0)


class TestNoncentralChiSquare:
    def test_central_case_is_exponential(self):
        law = NoncentralChiSquareLaw(2, 0.0)
        assert noncentral_chisq_cdf(law, 2.0) == pytest.approx(1 - math.exp(-1),
                                                               abs=1e-13)

    def test_zero_argument(self):
        assert noncentral_chisq_cdf(NoncentralChiSquareLaw(2, 1.0), 0.0) == 0.0

    def test_value_frozen_from_sampling_oracle(self):
        # 10^7-draw Monte Carlo of (Z1+1)^2 + Z2^2 puts P(<= 2) at 0.46987(5);
        # the Poisson-mixture series must land inside that band.
        assert noncentral_chisq_cdf(NoncentralChiSquareLaw(2, 1.0), 2.0) == \
            pytest.approx(0.46986963780290464, abs=1e-12)

    def test_strictly_decreasing_in_noncentrality(self):
        values = [noncentral_chisq_cdf(NoncentralChiSquareLaw(3, lam), 4.0)
                  for lam in (0.0, 0.5, 1.0, 2.0, 5.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_matches_central_gamma_form_at_lambda_zero(self):
        for k in (1, 2, 5):
            for t in (0.5, 2.0, 7.5):
                series = noncentral_chisq_cdf(NoncentralChiSquareLaw(k, 0.0), t)
                gamma_form = chi_cdf(ChiLaw(k), math.sqrt(t))
                assert series == pytest.approx(gamma_form, abs=1e-10)

    def test_grid_agrees_with_scalar(self):
        lams = np.array([0.0, 0.3, 1.0, 4.0])
        grid = noncentral_chisq_cdf_grid(2, lams, 3.0)
        for lam, val in zip(lams, grid):
            assert val == pytest.approx(
                noncentral_chisq_cdf(NoncentralChiSquareLaw(2, lam), 3.0), abs=1e-14)

    def test_pdf_is_derivative_of_cdf(self):
        law = NoncentralChiSquareLaw(2, 0.8)
        h = 1e-6
        for t in (1.0, 3.0, 6.0):
            fd = (noncentral_chisq_cdf(law, t + h)
                  - noncentral_chisq_cdf(law, t - h)) / (2 * h)
            assert noncentral_chisq_pdf(law, t) == pytest.approx(fd, rel=1e-8)

    def test_pdf_grid_matches_scalar(self):
        lams = np.array([0.0, 0.5, 1.0])
        grid = noncentral_chisq_pdf_grid(2, lams, 2.0)
        for lam, val in zip(lams, grid):
            assert val == pytest.approx(
                noncentral_chisq_pdf(NoncentralChiSquareLaw(2, lam), 2.0), abs=1e-14)

    def test_large_noncentrality_window(self):
        # j0-centered window keeps the series accurate for big lambda
        law = NoncentralChiSquareLaw(2, 400.0)
        val = noncentral_chisq_cdf(law, 400.0)
        assert 0.0 < val < 1.0
        # sanity: median of noncentral chi-square is near k + lambda
        assert noncentral_chisq_cdf(law, 402.0) == pytest.approx(0.5, abs=0.05)


class TestSamplers:
    def test_sphere_unit_norm(self):
        v = sample_sphere(5, RngStream(1), size=1000)
        assert np.abs(np.linalg.norm(v, axis=1) - 1.0).max() <= 1e-14

    def test_sphere_m1_is_signs(self):
        v = sample_sphere(1, RngStream(2), size=4000).ravel()
        assert set(np.unique(v)) == {-1.0, 1.0}
        # equal frequency within a CLT band
        assert abs(v.mean()) <= 3.0 / math.sqrt(4000)

    def test_sphere_moments(self):
        n = 200_000
        v = sample_sphere(3, RngStream(3), size=n)
        bound = 4.0 / math.sqrt(n)
        assert np.abs(v.mean(axis=0)).max() <= bound
        second = v.T @ v / n
        assert np.abs(second - np.eye(3) / 3.0).max() <= bound

    def test_sphere_mean_clt_band_m2(self):
        n = 1_000_000
        v = sample_sphere(2, RngStream(4), size=n)
        # per-coordinate variance is 1/2, so a 3-sigma band for the mean
        assert abs(v[:, 0].mean()) <= 3.0 * math.sqrt(0.5 / n)

    def test_beta_uniform_case(self):
        d = sample_beta_symmetric(1.0, RngStream(5), size=100_000)
        assert d.mean() == pytest.approx(0.5, abs=0.005)
        assert d.min() > 0.0 and d.max() < 1.0

    def test_beta_variance(self):
        n = 1_000_000
        d = sample_beta_symmetric(2.5, RngStream(6), size=n)
        target = 1.0 / 24.0  # Beta(d, d) variance = 1 / (4 (2 d + 1))
        assert d.var() == pytest.approx(target, abs=5e-4)

    def test_beta_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            sample_beta_symmetric(0.0, RngStream(1))

    def test_beta_cdf_quantile_roundtrip(self):
        ps = np.linspace(0.01, 0.99, 25)
        qs = beta_symmetric_quantile(2.5, ps)
        back = beta_symmetric_cdf(2.5, qs)
        assert np.abs(back - ps).max() <= 1e-12

    def test_beta_cdf_symmetry(self):
        for x in (0.1, 0.25, 0.4):
            assert beta_symmetric_cdf(1.7, x) == pytest.approx(
                1.0 - beta_symmetric_cdf(1.7, 1.0 - x), abs=1e-14)

    def test_beta_cdf_against_density_quadrature(self):
        delta = 0.6  # exercise the singular-endpoint branch of the cdf too
        nodes, weights = np.polynomial.legendre.leggauss(4000)
        for x in (0.2, 0.5, 0.8):
            # integrate the density on [0, x] (integrable singularity at 0)
            t = 0.5 * x * (nodes + 1.0)
            dens = t ** (delta - 1) * (1 - t) ** (delta - 1)
            norm = math.exp(math.lgamma(2 * delta) - 2 * math.lgamma(delta))
            val = 0.5 * x * norm * float(weights @ dens)
            assert beta_symmetric_cdf(delta, x) == pytest.approx(val, abs=5e-5)


class TestRngStream:
    def test_identical_streams_identical_draws(self):
        a = RngStream(99, 4).generator().standard_normal(16)
        b = RngStream(99, 4).generator().standard_normal(16)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(99, 0).generator().standard_normal(16)
        b = RngStream(99, 1).generator().standard_normal(16)
        assert not np.array_equal(a, b)

    def test_spawn_is_deterministic_and_disjoint(self):
        parent = RngStream(5, 2)
        assert parent.spawn(3) == parent.spawn(3)
        assert parent.spawn(3) != parent.spawn(4)

    def test_seed_validation(self):
        with pytest.raises(ValueError):
            RngStream(-1)
        with pytest.raises(ValueError):
            RngStream(1 << 64)
