import math

import numpy as np
import pytest

from mvfbm.evolution import ScalarExponentialFamily
from mvfbm.metrics import EmpiricalMeasure
from mvfbm.presets import example1_problem, example2_problem, literal_b, ou_problem, ou_stationary_variance
from mvfbm.solver import (
    BlowUpError,
    CoefficientSpec,
    McKeanVlasovProblem,
    ParticleEnsemble,
    empirical_lipschitz,
    ensemble_statistics,
    make_drivers,
    mild_step,
    picard_measure_iteration,
    simulate,
    truncation_bound,
)


class TestStep:
    def test_zero_coefficients_follow_family(self):
        p = ou_problem(delta=2.0)
        ens = simulate(p, 0.0, 1.0, 0.1, 5, x0=np.array([1.0]))
        assert ens[-1].states == pytest.approx(np.full((5, 1), math.exp(-2.0)))
        assert len(ens) == 11

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_blow_up_detected(self):
        p = McKeanVlasovProblem(ScalarExponentialFamily(1.0),
                                CoefficientSpec(f=lambda t, X, mu: np.exp(np.abs(X) * 50)), dim=1)
        with pytest.raises(BlowUpError):
            simulate(p, 0.0, 1.0, 0.1, 3, x0=np.array([20.0]))

    def test_frozen_measure_used(self):
        p = ou_problem(kappa=1.0)
        ens = ParticleEnsemble(0.0, np.zeros((3, 1)), np.arange(3))
        out = mild_step(ens, 0.1, p, measure=EmpiricalMeasure(np.full(4, 2.0)))
        assert out.states == pytest.approx(np.full((3, 1), 0.2 * math.exp(-0.1)))

    def test_grid_must_divide(self):
        with pytest.raises(ValueError):
            simulate(ou_problem(), 0.0, 1.0, 0.3, 2)


class TestDeterminism:
    def test_threads_do_not_matter(self):
        p = ou_problem(sigma_w=1.0, sigma_h=0.5, hurst=0.8)
        a = simulate(p, 0.0, 1.0, 0.05, 300, seed=4, threads=1)
        b = simulate(p, 0.0, 1.0, 0.05, 300, seed=4, threads=3)
        assert all(np.array_equal(x.states, y.states) for x, y in zip(a, b))

    def test_particle_streams_are_positional_free(self):
        p = ou_problem(sigma_w=1.0)
        d1 = make_drivers(p, 10, 0.1, np.arange(6), seed=1)
        d2 = make_drivers(p, 10, 0.1, np.arange(6)[::-1], seed=1)
        assert np.array_equal(d1.dW[::-1], d2.dW)


def test_ou_brownian_variance():
    p = ou_problem(delta=1.0, sigma_w=1.0)
    ens = simulate(p, 0.0, 0.0, 0.01, 4000, burn_in=10.0, seed=7)
    var = ens[-1].states.var()
    assert var == pytest.approx(ou_stationary_variance(1.0, sigma_w=1.0), rel=0.08)


def test_truncation_bound():
    p = ou_problem(delta=2.0)
    assert truncation_bound(p, 3.0, 1.5) == pytest.approx(1.5 * math.exp(-6.0))


class TestPresets:
    def test_literal_b(self):
        assert literal_b(-1.0) == 0.0 and literal_b(0.5) == 0.5 and literal_b(3.0) == 3.0

    def test_example1_shapes_and_K(self):
        p = example1_problem(0.01, 0.02, 0.03, modes=8)
        assert p.dim == 8 and p.fbm_dim == 8
        assert p.coefficients.K == pytest.approx(2 * max(1.25e-4, 1.25 * 4e-4, 0.015))
        X = np.random.default_rng(0).normal(size=(5, 8))
        mu = EmpiricalMeasure(X)
        assert p.coefficients.f(0.5, X, mu).shape == (5, 8)
        assert p.coefficients.theta(0.5, X, mu).shape == (5, 8, 1)
        assert p.coefficients.psi(0.5, mu).shape == (8, 8)

    def test_example1_lipschitz_without_b(self):
        c = 0.5
        p = example1_problem(c, c, c, modes=8, b=lambda t: 0.0)
        g = np.random.default_rng(1)
        states = g.normal(size=(50, 8))
        measures = [EmpiricalMeasure(g.normal(size=(20, 8)) * s) for s in (0.5, 1.0, 2.0)]
        out = empirical_lipschitz(p.coefficients, np.linspace(0, 5, 11), states, measures, seed=0, pairs=100)
        assert out["holds"], out

    def test_example2_runs(self):
        p = example2_problem(nu=8.0, amplitude=0.1, X=4.0, n_nodes=41)
        ens = simulate(p, 0.0, 0.2, 0.05, 10, seed=0, x0=np.exp(-np.linspace(-4, 4, 41) ** 2))
        assert np.all(np.isfinite(ens[-1].states))

    def test_fingerprint_stable(self):
        assert example1_problem(0.01, 0.01, 0.01).fingerprint() == example1_problem(0.01, 0.01, 0.01).fingerprint()
        assert example1_problem(0.01, 0.01, 0.01).fingerprint() != example1_problem(0.02, 0.01, 0.01).fingerprint()


class TestPicard:
    def test_measure_free_coefficients_converge_in_one_step(self):
        p = ou_problem(sigma_w=1.0)
        _, gaps = picard_measure_iteration(p, None, 3, 200, 1, 0.0, 1.0, 0.1)
        assert gaps[0] > 0
        assert gaps[1] < 1e-12 and gaps[2] < 1e-12

    def test_gaps_shrink_for_contraction(self):
        p = example1_problem(0.05, 0.05, 0.05, modes=4)
        _, gaps = picard_measure_iteration(p, None, 3, 200, 2, 0.0, 0.5, 0.05)
        assert gaps[2] < gaps[1] < gaps[0]


def test_statistics_rows():
    p = ou_problem(sigma_w=1.0)
    ens = simulate(p, 0.0, 0.5, 0.1, 50, seed=3)
    rows = ensemble_statistics(ens)
    assert rows.shape == (6, 4)
    assert rows[-1, -1] == 0.0
