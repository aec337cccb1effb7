import math

import numpy as np
import pytest

from mvfbm.automorphy import (
    EXP_NEG,
    UNIT,
    SecondMomentTrace,
    WeightFunction,
    aa_distribution_test,
    aa_recurrence_test,
    sbc0_membership,
    trace_from_ensembles,
    weighted_ergodic_mean,
    weighted_mass,
)
from mvfbm.metrics import EmpiricalMeasure, MeasurePath
from mvfbm.presets import ou_problem
from mvfbm.solver import simulate


def t2_trace(q, step=0.005):
    k = int(round(q / step))
    t = np.linspace(-k * step, k * step, 2 * k + 1)
    return SecondMomentTrace(t, np.where(t >= 0, t**2, 0.0))


def exact_t2_mean(q):
    # int_0^q t^2 e^{-t} dt over int_{-q}^{q} e^{-t} dt
    return (2.0 - math.exp(-q) * (q * q + 2 * q + 2)) / (2.0 * math.sinh(q))


class TestWeightedMean:
    @pytest.mark.parametrize("q", [1.0, 4.0, 8.0, 16.0])
    def test_mass(self, q):
        assert weighted_mass(q, EXP_NEG) == pytest.approx(2 * math.sinh(q), rel=1e-10)
        assert weighted_mass(q, UNIT) == pytest.approx(2 * q, rel=1e-12)

    @pytest.mark.parametrize("q", [2.0, 4.0, 8.0, 16.0])
    def test_t2_closed_form(self, q):
        assert weighted_ergodic_mean(t2_trace(q), EXP_NEG, q) == pytest.approx(exact_t2_mean(q), rel=1e-4)

    def test_constant_trace_under_unit_weight(self):
        tr = SecondMomentTrace(np.linspace(-10, 10, 201), np.full(201, 3.0))
        assert weighted_ergodic_mean(tr, UNIT, 5.0) == pytest.approx(3.0)

    def test_window_too_small(self):
        with pytest.raises(ValueError):
            weighted_ergodic_mean(t2_trace(2.0), EXP_NEG, 4.0)

    def test_non_finite_weight(self):
        bad = WeightFunction(lambda t: 1.0 / t if t != 0 else math.inf, "1/t")
        with pytest.raises(ValueError):
            weighted_mass(1.0, bad)

    def test_negative_trace_rejected(self):
        with pytest.raises(ValueError):
            SecondMomentTrace(np.arange(3.0), np.array([1.0, -1.0, 0.0]))


class TestSBC0:
    def test_t2_member(self):
        res = sbc0_membership(t2_trace(16.0), EXP_NEG, [4, 8, 16])
        assert res["member"] and res["monotone"]

    def test_constant_non_member(self):
        tr = SecondMomentTrace(np.linspace(-20, 20, 401), np.ones(401))
        res = sbc0_membership(tr, UNIT, [4, 8, 16])
        assert not res["member"]

    def test_q_list_increasing(self):
        with pytest.raises(ValueError):
            sbc0_membership(t2_trace(4.0), EXP_NEG, [4, 2])

    def test_trace_from_ensembles(self):
        ens = simulate(ou_problem(sigma_w=1.0), 0.0, 0.5, 0.1, 100, seed=1)
        tr = trace_from_ensembles(ens)
        assert tr.values.shape == (6,) and tr.values[0] == 0.0 and np.all(tr.mc_se >= 0)


class TestRecurrence:
    def test_sine_periods(self):
        shifts = 2 * np.pi * np.arange(1, 11)
        res = aa_recurrence_test(np.sin, shifts, np.linspace(0, 10, 101), tol=1e-10)
        assert res["passed"] and res["bounded"]
        assert max(res["errors"]) < 1e-10

    def test_linear_growth_fails(self):
        res = aa_recurrence_test(lambda t: t, np.arange(1, 9) * 10.0, np.linspace(0, 1, 11), tol=1e-3)
        assert not res["passed"]
        assert not res["bounded"]

    def test_stochastic_samples(self):
        g = np.random.default_rng(0)
        amp = g.normal(size=(50, 1))

        def sampler(t):
            return amp * np.cos(t)[None, :]

        res = aa_recurrence_test(sampler, 2 * np.pi * np.arange(1, 9), np.linspace(0, 5, 21), tol=1e-12)
        assert res["passed"]

    def test_quasi_periodic_with_convergents(self):
        f = lambda t: np.sin(t) + np.sin(math.pi * t)
        shifts = 2 * np.pi * np.array([7, 113, 33102, 99532])
        res = aa_recurrence_test(f, shifts, np.linspace(0, 3, 31), tol=1e-3)
        assert res["errors"][-1] < res["errors"][0]


class TestDistribution:
    def _path(self, times, fn):
        base = np.random.default_rng(3).normal(size=200)
        return MeasurePath(times, [EmpiricalMeasure(base + fn(t)) for t in times])

    def test_periodic_law(self):
        times = np.arange(0, 41) * 0.25
        path = self._path(times, lambda t: np.sin(np.pi * t))
        res = aa_distribution_test(path, [2.0, 4.0, 6.0, 8.0], tol=1e-9)
        assert res["passed"]

    def test_drifting_law_fails(self):
        times = np.arange(0, 41) * 0.25
        path = self._path(times, lambda t: 0.5 * t)
        res = aa_distribution_test(path, [1.0, 2.0, 3.0, 4.0], tol=1e-2)
        assert not res["passed"]

    def test_short_window(self):
        times = np.arange(0, 5) * 0.25
        path = self._path(times, np.sin)
        with pytest.raises(ValueError):
            aa_distribution_test(path, [2.0], tol=1e-3, grid=[0.0])
