import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from mvfbm.fbm import (
    FbmPath,
    SingularityError,
    StepIntegrand,
    circulant_eigenvalues,
    cumulate_to_fbm,
    fbm_cov,
    fbm_integral_second_moment,
    fgn_autocov,
    fractional_kernel,
    generate_fgn,
    generate_fgn_batch,
    increment_covariance,
    kernel_norm_integral,
    lp_kernel_ratio,
    operator_integral_second_moment,
    operator_wiener_integral,
    sample_hilbert_fbm,
    wiener_integral_fbm,
    wiener_integral_fbm_many,
)


class TestCovariance:
    @pytest.mark.parametrize("h", [0.5, 0.6, 0.75, 0.9])
    def test_variance_is_power(self, h):
        assert fbm_cov(2.0, 2.0, h) == pytest.approx(2.0 ** (2 * h))

    @pytest.mark.parametrize("h", [0.55, 0.7, 0.95])
    def test_autocov_from_cov(self, h):
        for k in range(1, 6):
            direct = fbm_cov(k + 1, 1, h) - fbm_cov(k + 1, 0, h) - fbm_cov(k, 1, h) + fbm_cov(k, 0, h)
            assert fgn_autocov(k, h) == pytest.approx(direct, rel=1e-12)

    def test_autocov_white_at_half(self):
        assert fgn_autocov(0, 0.5) == 1.0
        assert np.all(fgn_autocov(np.arange(1, 10), 0.5) == 0.0)

    def test_autocov_scales_with_dt(self):
        assert fgn_autocov(3, 0.7, dt=0.1) == pytest.approx(0.1**1.4 * fgn_autocov(3, 0.7))

    def test_kernel_value_and_singularity(self):
        assert fractional_kernel(2.0, 0.8) == pytest.approx(0.3637719759624955, rel=1e-14)
        with pytest.raises(SingularityError):
            fractional_kernel(0.0, 0.8)

    @pytest.mark.parametrize("h", [0.4, 1.0, 1.2])
    def test_hurst_range(self, h):
        with pytest.raises(ValueError):
            fgn_autocov(1, h)

    @pytest.mark.parametrize("h", [0.55, 0.7, 0.9])
    def test_embedding_nonnegative(self, h):
        lam = circulant_eigenvalues(256, h)
        assert lam.min() > -1e-10 * lam.max()


class TestSampling:
    def test_deterministic(self):
        a = generate_fgn(64, 0.7, 0.1, seed=5).values
        b = generate_fgn(64, 0.7, 0.1, seed=5).values
        c = generate_fgn(64, 0.7, 0.1, seed=6).values
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    @pytest.mark.parametrize("threads,chunk", [(1, 7), (3, 16), (4, 1024)])
    def test_batch_layout_invariance(self, threads, chunk):
        ref = generate_fgn_batch(40, 32, 0.8, 1.0, seed=11)
        out = generate_fgn_batch(40, 32, 0.8, 1.0, seed=11, threads=threads, chunk=chunk)
        assert np.array_equal(ref, out)

    def test_hosking_matches_covariance(self):
        x = generate_fgn_batch(4000, 8, 0.8, 1.0, seed=2, method="hosking")
        emp = np.array([np.mean(x[:, : 8 - k] * x[:, k:]) for k in range(4)])
        assert np.allclose(emp, fgn_autocov(np.arange(4), 0.8), atol=0.06)

    def test_circulant_matches_covariance(self):
        x = generate_fgn_batch(4000, 64, 0.7, 1.0, seed=3)
        emp = np.array([np.mean(x[:, : 64 - k] * x[:, k:]) for k in range(4)])
        assert np.allclose(emp, fgn_autocov(np.arange(4), 0.7), atol=0.03)

    def test_path_starts_at_zero_and_csv_roundtrip(self):
        p = cumulate_to_fbm(generate_fgn(16, 0.75, 1.0, seed=1))
        assert p.values.size == 17 and p.values[0] == 0.0 and p.times[0] == 0.0
        text = p.to_csv()
        assert text.startswith("t,value\n0,0\n")
        q = FbmPath.from_csv(text, 0.75)
        assert np.array_equal(q.values, p.values)

    def test_hilbert_components_scaled(self):
        grid = np.linspace(0, 1, 33)
        w = sample_hilbert_fbm([4.0, 1.0, 0.0], 0.75, grid, seed=3)
        v = w.values()
        assert v.shape == (33, 3)
        assert np.all(v[:, 2] == 0.0)
        assert np.allclose(v[:, 0], 2.0 * w.component_paths[0].values)

    def test_hilbert_grid_must_start_at_zero(self):
        with pytest.raises(ValueError):
            sample_hilbert_fbm([1.0], 0.75, np.linspace(0.1, 1, 5), seed=0)


class TestWienerIntegral:
    def test_step_integrand_validation(self):
        with pytest.raises(ValueError):
            StepIntegrand(np.array([0.0, 1.0, 0.5]), np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            StepIntegrand(np.array([0.0, 1.0]), np.array([1.0, 2.0]))

    def test_constant_integrand_is_increment(self):
        p = cumulate_to_fbm(generate_fgn(10, 0.7, 0.1, seed=4))
        hf = StepIntegrand(np.array([0.2, 0.7]), np.array([3.0]))
        assert wiener_integral_fbm(hf, p) == pytest.approx(3.0 * (p.values[7] - p.values[2]))

    def test_off_grid_breakpoint_rejected(self):
        p = cumulate_to_fbm(generate_fgn(10, 0.7, 0.1, seed=4))
        with pytest.raises(ValueError):
            wiener_integral_fbm(StepIntegrand(np.array([0.0, 0.55]), np.array([1.0])), p)

    @pytest.mark.parametrize("h", [0.6, 0.75, 0.9])
    def test_constant_second_moment(self, h):
        hf = StepIntegrand(np.array([0.0, 2.0]), np.array([1.5]))
        assert fbm_integral_second_moment(hf, h) == pytest.approx(2.25 * 2.0 ** (2 * h), rel=1e-12)

    def test_moment_equals_gram_form(self):
        hf = StepIntegrand(np.array([0.0, 0.3, 1.0, 1.7]), np.array([1.0, -2.0, 0.5]))
        gram = hf.values @ increment_covariance(hf.breakpoints, 0.8) @ hf.values
        assert fbm_integral_second_moment(hf, 0.8) == pytest.approx(gram, rel=1e-12)

    def test_uniform_grid_matches_dense(self):
        fn = lambda s: math.exp(-(1.0 - s))
        hf = StepIntegrand.from_function(fn, 0.0, 1.0, 300)
        dense = hf.values @ increment_covariance(hf.breakpoints, 0.75) @ hf.values
        assert fbm_integral_second_moment(hf, 0.75) == pytest.approx(dense, rel=1e-10)

    def test_exponential_integrand_against_quadrature(self):
        # 2H(2H-1) int_0^1 r^(2H-2) A(r) dr with A(r) = int e^{-(1-s)} e^{-(1-s-r)} ds
        h = 0.75
        A = lambda r: 0.5 * (math.exp(-r) - math.exp(r - 2.0))
        oracle = 2 * h * (2 * h - 1) * quad(lambda r: r ** (2 * h - 2) * A(r), 0, 1)[0]
        hf = StepIntegrand.from_function(lambda s: math.exp(-(1.0 - s)), 0.0, 1.0, 4000)
        assert fbm_integral_second_moment(hf, h) == pytest.approx(oracle, rel=1e-4)

    def test_kernel_norm_alias(self):
        hf = StepIntegrand(np.array([0.0, 1.0, 2.0]), np.array([1.0, 2.0]))
        assert kernel_norm_integral(hf, 0.7) == fbm_integral_second_moment(hf, 0.7)

    def test_lp_ratio_needs_p_above_inverse_h(self):
        hf = StepIntegrand(np.array([0.0, 1.0, 2.0]), np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            lp_kernel_ratio(hf, 0.6, p=1.5)
        out = lp_kernel_ratio(hf, 0.75, p=2.0)
        assert out["ratio"] > 0

    def test_many_matches_single(self):
        x = generate_fgn_batch(5, 20, 0.7, 0.05, seed=9)
        vals = np.concatenate([np.zeros((5, 1)), np.cumsum(x, axis=1)], axis=1)
        times = np.arange(21) * 0.05
        hf = StepIntegrand(np.array([0.1, 0.5, 1.0]), np.array([2.0, -1.0]))
        many = wiener_integral_fbm_many(hf, times, vals)
        single = [wiener_integral_fbm(hf, FbmPath(times, v, 0.7)) for v in vals]
        assert np.allclose(many, single)

    def test_operator_integral_moment(self):
        br = np.array([0.0, 0.5, 1.0])
        ops = np.zeros((2, 1, 2))
        ops[:, 0, 0] = [1.0, 2.0]
        ops[:, 0, 1] = [0.5, 0.5]
        lam = np.array([1.0, 4.0])
        h1 = StepIntegrand(br, np.array([1.0, 2.0]))
        h2 = StepIntegrand(br, np.array([0.5, 0.5]))
        expect = fbm_integral_second_moment(h1, 0.8) + 4.0 * fbm_integral_second_moment(h2, 0.8)
        assert operator_integral_second_moment(br, ops, lam, 0.8) == pytest.approx(expect, rel=1e-12)
        w = sample_hilbert_fbm(lam, 0.8, np.linspace(0, 1, 11), seed=1)
        assert operator_wiener_integral(br, ops, w).shape == (1,)


@settings(max_examples=25, deadline=None)
@given(h=st.floats(0.5, 0.95), k=st.integers(0, 50))
def test_autocov_bounded_by_variance(h, k):
    assert abs(fgn_autocov(k, h)) <= fgn_autocov(0, h) + 1e-15
