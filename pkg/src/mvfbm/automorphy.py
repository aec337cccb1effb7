"""Numerical diagnostics for (square-mean / in-distribution) almost automorphy
and for the weighted ergodic criterion defining SBC_0."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .evolution import EVIDENCE_DISCLAIMER, _record_subsequence, _scored, _tail_size
from .metrics import EmpiricalMeasure, MeasurePath, TentDictionary, dbl_lower

__all__ = [
    "WeightFunction",
    "SecondMomentTrace",
    "weighted_mass",
    "weighted_ergodic_mean",
    "aa_recurrence_test",
    "aa_distribution_test",
    "sbc0_membership",
    "trace_from_ensembles",
    "EXP_NEG",
    "UNIT",
]


@dataclass
class WeightFunction:
    rho: Callable
    label: str = "rho"

    def __call__(self, t):
        return self.rho(t)


EXP_NEG = WeightFunction(lambda t: np.exp(-np.asarray(t, dtype=float)), "exp(-t)")
UNIT = WeightFunction(lambda t: np.ones_like(np.asarray(t, dtype=float)), "1")


@dataclass
class SecondMomentTrace:
    times: np.ndarray
    values: np.ndarray
    mc_se: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have the same shape")
        if np.any(self.values < 0):
            raise ValueError("second moments must be non-negative")
        if self.mc_se is None:
            self.mc_se = np.zeros_like(self.values)


def trace_from_ensembles(ensembles) -> SecondMomentTrace:
    """``E|x(t)|^2`` and its Monte Carlo standard error from particle ensembles."""
    t, v, se = [], [], []
    for e in ensembles:
        sq = np.sum(np.asarray(e.states) ** 2, axis=1)
        t.append(e.t)
        v.append(sq.mean())
        se.append(sq.std(ddof=1) / math.sqrt(sq.size) if sq.size > 1 else 0.0)
    return SecondMomentTrace(np.array(t), np.array(v), np.array(se))


def weighted_mass(q: float, rho: WeightFunction) -> float:
    """``m(q, rho)``, the integral of rho over [-q, q]."""
    if q < 0:
        raise ValueError("q must be non-negative")
    if q == 0:
        return 0.0

    def g(t):
        v = float(rho(t))
        if not math.isfinite(v):
            raise ValueError(f"weight is not finite at t = {t}")
        return v

    val, _ = quad(g, -q, q, epsabs=0.0, epsrel=1e-10, limit=500)
    return val


def weighted_ergodic_mean(trace: SecondMomentTrace, rho: WeightFunction, q: float) -> float:
    """``(1/m(q, rho)) int_{-q}^{q} trace(t) rho(t) dt``.

    The numerator is a trapezoid rule on the trace grid, the denominator an
    adaptive quadrature of rho.
    """
    t = trace.times
    if t[0] > -q + 1e-9 * max(1.0, q) or t[-1] < q - 1e-9 * max(1.0, q):
        raise ValueError(f"trace covers [{t[0]}, {t[-1]}], need [{-q}, {q}]")
    inside = (t >= -q - 1e-12) & (t <= q + 1e-12)
    tt, vv = t[inside], trace.values[inside]
    num = np.trapezoid(vv * np.asarray(rho(tt), dtype=float), tt)
    return float(num / weighted_mass(q, rho))


def _moment(x: np.ndarray) -> np.ndarray:
    """Mean over samples (axis 0) of the squared norm over trailing axes."""
    sq = x**2
    if sq.ndim > 2:
        sq = sq.reshape(sq.shape[0], sq.shape[1], -1).sum(axis=2)
    return sq.mean(axis=0)


def aa_recurrence_test(
    sampler: Callable,
    shifts: Sequence[float],
    grid: Sequence[float],
    tol: float,
    bound_ratio: float = 10.0,
) -> dict:
    """Two-pass square-mean recurrence diagnostic.

    ``sampler(times)`` returns joint samples of the process at ``times`` with
    shape ``(n_samples, len(times)[, d])``; a 1-D return is treated as a
    deterministic function. The limit process is estimated as the mean of
    ``x(t + e_m)`` over the last quartile of shifts (pathwise, so samples must
    be reproducible across calls); only shifts outside that tail are scored. Forward and backward errors
    ``sup_t E|x(t+e_n) - xhat(t)|^2`` and ``sup_t E|xhat(t-e_n) - x(t)|^2`` are
    reported per shift. The process is flagged unbounded when its second
    moment along the shifted grids exceeds ``bound_ratio`` times that on the
    base grid.
    """
    shifts = np.asarray(shifts, dtype=float)
    grid = np.asarray(grid, dtype=float)

    def sample(times):
        x = np.asarray(sampler(np.asarray(times, dtype=float)), dtype=float)
        return x[None, :] if x.ndim == 1 else x

    n = shifts.size
    base = sample(grid)
    if n == 0:
        return {"shifts": [], "errors": [], "forward_errors": [], "backward_errors": [], "subsequence": [],
                "bounded": True, "passed": True, "tolerance": tol, "disclaimer": EVIDENCE_DISCLAIMER}
    tail = shifts[n - _tail_size(n):]
    shifted = [sample(grid + e) for e in shifts]
    xhat = np.mean([sample(grid + e) for e in tail], axis=0)

    base_m = float(_moment(base).max())
    shift_m = max(float(_moment(s).max()) for s in shifted)
    bounded = shift_m <= bound_ratio * max(base_m, 1e-300)

    fwd = np.array([float(_moment(s - xhat).max()) for s in shifted])
    bwd = np.empty(n)
    for i, e in enumerate(shifts):
        back = np.mean([sample(grid - e + em) for em in tail], axis=0)
        bwd[i] = float(_moment(back - base).max())
    err = np.maximum(fwd, bwd)
    passing = [int(i) for i in np.flatnonzero(_scored(err, tail.size) < tol)]
    return {
        "shifts": shifts.tolist(),
        "forward_errors": fwd.tolist(),
        "backward_errors": bwd.tolist(),
        "errors": err.tolist(),
        "scored_shifts": n - tail.size,
        "subsequence": passing,
        "record_subsequence": _record_subsequence(err, tol),
        "bounded": bool(bounded),
        "sup_second_moment_base": base_m,
        "sup_second_moment_shifted": shift_m,
        "passed": bool(bounded and passing),
        "tolerance": tol,
        "disclaimer": EVIDENCE_DISCLAIMER,
    }


def _mixture(measures: Sequence[EmpiricalMeasure]) -> EmpiricalMeasure:
    return EmpiricalMeasure(np.concatenate([m.samples for m in measures]))


def _dbl(a: EmpiricalMeasure, b: EmpiricalMeasure, dictionary) -> float:
    # coordinate projections are 1-Lipschitz, so each gives a valid lower bound
    return max(dbl_lower(a.samples[:, k], b.samples[:, k], dictionary) for k in range(a.dim))


def aa_distribution_test(
    lawpath: MeasurePath,
    shifts: Sequence[float],
    tol: float,
    grid: Optional[Sequence[float]] = None,
    dictionary: Optional[TentDictionary] = None,
) -> dict:
    """Recurrence diagnostic for a law path under the d_BL lower bound.

    The limit law at t is the mixture of ``mu(t + e_m)`` over the last
    quartile of shifts, which are not scored. ``grid`` defaults to every path time ``t`` for which
    all required shifted times are on the path. Errors are reported per
    shift, and per grid time (``error_by_time``) to locate transients.
    """
    shifts = np.asarray(shifts, dtype=float)
    times = lawpath.times
    n = shifts.size
    tail = shifts[n - _tail_size(n):] if n else shifts
    lo_t, hi_t = times[0], times[-1]
    eps = 1e-9 * max(1.0, float(np.abs(times).max()))

    def covered(t):
        need = [t + e for e in shifts] + [t + e for e in tail] + [t - e + em for e in shifts for em in tail]
        return all(lo_t - eps <= s <= hi_t + eps for s in need)

    if grid is None:
        grid = [t for t in times if covered(t)]
    grid = np.asarray(grid, dtype=float)
    bad = [float(t) for t in grid if not covered(t)]
    if bad:
        raise ValueError(f"insufficient window: shifts from t = {bad[0]} leave the law path")
    if grid.size == 0 and n > 0:
        raise ValueError("law path does not cover any grid time together with its shifts")
    if n == 0:
        return {"shifts": [], "errors": [], "forward_errors": [], "backward_errors": [], "subsequence": [],
                "passed": True, "tolerance": tol, "grid": grid.tolist(), "disclaimer": EVIDENCE_DISCLAIMER}

    fwd_t = np.zeros((n, grid.size))
    bwd_t = np.zeros((n, grid.size))
    for j, t in enumerate(grid):
        limit_t = _mixture([lawpath.at(t + em) for em in tail])
        for i, e in enumerate(shifts):
            fwd_t[i, j] = _dbl(lawpath.at(t + e), limit_t, dictionary)
            back = _mixture([lawpath.at(t - e + em) for em in tail])
            bwd_t[i, j] = _dbl(back, lawpath.at(t), dictionary)
    fwd = fwd_t.max(axis=1)
    bwd = bwd_t.max(axis=1)
    err = np.maximum(fwd, bwd)
    passing = [int(i) for i in np.flatnonzero(_scored(err, tail.size) < tol)]
    return {
        "shifts": shifts.tolist(),
        "forward_errors": fwd.tolist(),
        "backward_errors": bwd.tolist(),
        "errors": err.tolist(),
        "scored_shifts": n - tail.size,
        "error_by_time": np.maximum(fwd_t, bwd_t).max(axis=0).tolist(),
        "grid": grid.tolist(),
        "subsequence": passing,
        "passed": bool(passing),
        "tolerance": tol,
        "disclaimer": EVIDENCE_DISCLAIMER,
    }


def sbc0_membership(trace: SecondMomentTrace, rho: WeightFunction, q_list: Sequence[float],
                    slope_tol: float = 1e-2, monotone_slack: float = 1e-12) -> dict:
    """Weighted ergodic means at increasing ``q`` and a decay verdict.

    Member when the means do not increase along ``q_list`` (up to MC standard
    error and ``monotone_slack``) and the last one is below ``slope_tol``.
    """
    q = np.asarray(q_list, dtype=float)
    if q.size == 0 or np.any(np.diff(q) <= 0):
        raise ValueError("q_list must be non-empty and strictly increasing")
    values = np.array([weighted_ergodic_mean(trace, rho, qi) for qi in q])
    se = float(np.max(trace.mc_se)) if trace.mc_se is not None and trace.mc_se.size else 0.0
    steps = np.diff(values)
    monotone = bool(np.all(steps <= se + monotone_slack * max(1.0, float(np.abs(values).max()))))
    final_small = bool(values[-1] < slope_tol)
    return {
        "q": q.tolist(),
        "values": values.tolist(),
        "monotone": monotone,
        "final_below_tol": final_small,
        "member": monotone and final_small,
        "slope_tol": slope_tol,
        "weight": rho.label,
        "disclaimer": "finite-q evaluation: the limit q -> infinity is inferred, not proven",
    }
