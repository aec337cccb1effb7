import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mvfbm.metrics import (
    BLNormError,
    CapExceededError,
    EmpiricalMeasure,
    MeasurePath,
    TentDictionary,
    dbl_lower,
    wasserstein2,
    wasserstein2_1d,
    wasserstein2_coupling_bound,
    wasserstein2_exact,
)


def brute_w2(x, y):
    n = x.shape[0]
    best = min(sum(np.sum((x[i] - y[p[i]]) ** 2) for i in range(n)) for p in itertools.permutations(range(n)))
    return np.sqrt(best / n)


class TestEmpiricalMeasure:
    def test_one_dim_is_column(self):
        m = EmpiricalMeasure(np.arange(4.0))
        assert m.samples.shape == (4, 1)
        assert m.second_moment() == pytest.approx(14.0 / 4)

    def test_csv_roundtrip(self):
        m = EmpiricalMeasure(np.array([[0.1, 2.0], [3.0, -1.0 / 3.0]]))
        text = m.to_csv()
        assert text.splitlines()[0] == "x1,x2"
        assert np.array_equal(EmpiricalMeasure.from_csv(text).samples, m.samples)

    def test_path_lookup(self):
        p = MeasurePath(np.array([0.0, 0.1, 0.2]), [EmpiricalMeasure(np.zeros(2)) for _ in range(3)])
        assert p.index(0.1 + 1e-13) == 1
        with pytest.raises(KeyError):
            p.at(0.15)

    def test_path_dimension_constant(self):
        with pytest.raises(ValueError):
            MeasurePath(np.array([0.0, 1.0]), [EmpiricalMeasure(np.zeros(2)), EmpiricalMeasure(np.zeros((2, 2)))])


class TestWasserstein:
    @pytest.mark.parametrize("n,d", [(3, 1), (5, 2), (6, 3)])
    def test_exact_matches_bruteforce(self, n, d):
        g = np.random.default_rng(n * 10 + d)
        x, y = g.normal(size=(n, d)), g.normal(size=(n, d))
        assert abs(wasserstein2_exact(x, y) - brute_w2(x, y)) <= 1e-12

    def test_cap(self):
        x = np.zeros((70, 2))
        with pytest.raises(CapExceededError):
            wasserstein2_exact(x, x)
        with pytest.raises(CapExceededError):
            wasserstein2(x, x + 1)
        assert wasserstein2(x, x + 1, paired=True) == pytest.approx(np.sqrt(2))

    def test_translation(self):
        x = np.random.default_rng(0).normal(size=(30, 2))
        assert wasserstein2_exact(x, x + np.array([3.0, 4.0])) == pytest.approx(5.0)

    def test_unequal_counts_1d(self):
        # replicate to the common multiple and compare
        x, y = np.array([0.0, 1.0, 5.0]), np.array([2.0, 3.0])
        xx, yy = np.repeat(np.sort(x), 2), np.repeat(np.sort(y), 3)
        assert wasserstein2_1d(x, y) == pytest.approx(np.sqrt(np.mean((xx - yy) ** 2)), rel=1e-14)

    def test_dirac_against_cloud(self):
        cloud = np.random.default_rng(1).normal(size=(200, 3))
        w = wasserstein2(np.zeros((1, 3)), cloud)
        assert w**2 == pytest.approx(EmpiricalMeasure(cloud).second_moment())

    def test_coupling_bound_dominates(self):
        g = np.random.default_rng(2)
        x, y = g.normal(size=(8, 2)), g.normal(size=(8, 2))
        assert wasserstein2_coupling_bound(x, y) >= wasserstein2_exact(x, y) - 1e-15


@settings(max_examples=40, deadline=None)
@given(
    x=arrays(np.float64, st.integers(1, 7), elements=st.floats(-50, 50)),
    shift=st.floats(-10, 10),
)
def test_1d_matches_assignment(x, shift):
    y = x[::-1] * 0.5 + shift
    assert abs(wasserstein2_1d(x, y) - wasserstein2_exact(x[:, None], y[:, None])) <= 1e-9


class TestBoundedLipschitz:
    def test_identical_measures(self):
        x = np.random.default_rng(0).normal(size=100)
        assert dbl_lower(x, x) == 0.0

    def test_point_masses(self):
        # a unit-width tent separates two Dirac masses by min(1, |a - b|)
        assert dbl_lower(np.zeros(1), np.full(1, 0.5)) >= 0.5 - 1e-9
        assert dbl_lower(np.zeros(1), np.full(1, 10.0)) <= 2.0

    def test_bounded_by_two(self):
        assert dbl_lower(np.zeros(3), np.full(3, 1e6)) <= 2.0

    def test_below_w1(self):
        g = np.random.default_rng(3)
        x, y = g.normal(size=400), g.normal(0.3, 1.0, size=400)
        w1 = np.mean(np.abs(np.sort(x) - np.sort(y)))
        assert dbl_lower(x, y) <= w1 + 1e-12

    def test_rejects_steep_dictionary(self):
        with pytest.raises(BLNormError):
            TentDictionary(widths=(0.5,))
        with pytest.raises(BLNormError):
            dbl_lower(np.zeros(2), np.ones(2), [lambda t: 2.0 * t])

    def test_callable_dictionary(self):
        g = [lambda t: float(np.clip(t, -1, 1))]
        assert dbl_lower(np.zeros(2), np.full(2, 0.25), g) == pytest.approx(0.25)
