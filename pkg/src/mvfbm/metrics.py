"""Empirical measures, 2-Wasserstein distances and a bounded-Lipschitz lower bound."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "EmpiricalMeasure",
    "MeasurePath",
    "CapExceededError",
    "BLNormError",
    "wasserstein2_1d",
    "wasserstein2_exact",
    "wasserstein2_coupling_bound",
    "wasserstein2",
    "TentDictionary",
    "dbl_lower",
]

EXACT_CAP = 64


class CapExceededError(ValueError):
    """Exact assignment requested for an instance above the size cap."""


class BLNormError(ValueError):
    """A test function violates the bounded-Lipschitz unit-ball constraint."""


@dataclass
class EmpiricalMeasure:
    """Equal-weight sample set in R^d."""

    samples: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] < 1:
            raise ValueError("empirical measure needs at least one sample")
        self.samples = s

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    def second_moment(self) -> float:
        """``E|X|^2``, which is also ``W2(delta_0, self)^2``."""
        return float(np.mean(np.sum(self.samples**2, axis=1)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(f"x{i + 1}" for i in range(self.dim)) + "\n")
        for row in self.samples:
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EmpiricalMeasure":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        try:
            float(lines[0].split(",")[0])
        except ValueError:
            lines = lines[1:]
        return cls(np.array([[float(v) for v in ln.split(",")] for ln in lines]))


@dataclass
class MeasurePath:
    times: np.ndarray
    measures: list

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        if len(self.measures) != self.times.size:
            raise ValueError("one measure per grid point required")
        dims = {m.dim for m in self.measures}
        if len(dims) > 1:
            raise ValueError("dimension must be constant along the path")

    def __len__(self) -> int:
        return self.times.size

    def index(self, t: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol * max(1.0, abs(t)):
            raise KeyError(f"time {t} is not on the path grid")
        return i

    def at(self, t: float) -> EmpiricalMeasure:
        return self.measures[self.index(t)]


def _as_measure(x) -> EmpiricalMeasure:
    return x if isinstance(x, EmpiricalMeasure) else EmpiricalMeasure(x)


def wasserstein2_1d(a, b) -> float:
    """Exact W2 between one-dimensional empirical measures.

    Uses the monotone coupling. Unequal sample counts are handled on the
    merged grid of quantile levels, which is the same coupling as replicating
    both sample sets up to the least common multiple of the counts.
    """
    a, b = _as_measure(a), _as_measure(b)
    if a.dim != 1 or b.dim != 1:
        raise ValueError("wasserstein2_1d needs one-dimensional measures")
    x = np.sort(a.samples[:, 0])
    y = np.sort(b.samples[:, 0])
    n, m = x.size, y.size
    if n == m:
        return float(np.sqrt(np.mean((x - y) ** 2)))
    # breakpoints i/n and j/m, compared as integers i*m and j*n on [0, n*m]
    levels = np.union1d(np.arange(n + 1) * m, np.arange(m + 1) * n)
    w = np.diff(levels) / (n * m)
    mid = levels[:-1]
    xi = mid // m
    yj = mid // n
    return float(np.sqrt(np.sum(w * (x[xi] - y[yj]) ** 2)))


def _cost(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=2)


def wasserstein2_exact(a, b, cap: int = EXACT_CAP) -> float:
    """Exact W2 between equal-size empirical measures by optimal assignment."""
    a, b = _as_measure(a), _as_measure(b)
    if a.n != b.n:
        raise ValueError("wasserstein2_exact needs equal sample counts")
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if a.n > cap:
        raise CapExceededError(f"{a.n} samples exceeds the exact-transport cap {cap}")
    c = _cost(a.samples, b.samples)
    rows, cols = linear_sum_assignment(c)
    return float(np.sqrt(c[rows, cols].sum() / a.n))


def wasserstein2_coupling_bound(xs, ys) -> float:
    """``(mean |x_i - y_i|^2)^(1/2)`` for paired samples; an upper bound on W2."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if isinstance(xs, EmpiricalMeasure):
        x = xs.samples
    if isinstance(ys, EmpiricalMeasure):
        y = ys.samples
    if x.shape != y.shape:
        raise ValueError("paired samples must have the same shape")
    if x.ndim == 1:
        x, y = x[:, None], y[:, None]
    return float(np.sqrt(np.mean(np.sum((x - y) ** 2, axis=1))))


def wasserstein2(a, b, cap: int = EXACT_CAP, paired: bool = False) -> float:
    """Best available W2: sorted coupling in 1-D, assignment for small sets,
    otherwise the paired-sample bound (requires ``paired=True``)."""
    a, b = _as_measure(a), _as_measure(b)
    if a.dim == 1:
        return wasserstein2_1d(a, b)
    if a.n == 1 or b.n == 1:
        # every coupling with a Dirac mass is the product coupling
        point, other = (a, b) if a.n == 1 else (b, a)
        return wasserstein2_coupling_bound(np.broadcast_to(point.samples, other.samples.shape), other.samples)
    if a.n == b.n and a.n <= cap:
        return wasserstein2_exact(a, b, cap)
    if paired:
        return wasserstein2_coupling_bound(a.samples, b.samples)
    raise CapExceededError("no exact method available; pass paired=True to use the coupling bound")


@dataclass
class TentDictionary:
    """Clipped tents ``max(-1, 1 - |x-c|/w)`` and ramps ``clip((x-c)/w, -1, 1)``
    with both signs. Widths below 1 would break the Lipschitz bound.

    ``centers=None`` places ``n_centers`` centres across the pooled data range.
    """

    centers: Optional[np.ndarray] = None
    widths: Sequence[float] = (1.0, 1.5, 2.0, 4.0, 8.0)
    n_centers: int = 129
    ramps: bool = True

    def __post_init__(self) -> None:
        if min(self.widths) < 1.0:
            raise BLNormError("tent/ramp widths must be >= 1 for Lipschitz constant <= 1")

    def evaluate(self, x: np.ndarray, pooled: np.ndarray) -> np.ndarray:
        """Values of every dictionary function at ``x``; shape (n_funcs, len(x))."""
        if self.centers is None:
            lo, hi = float(pooled.min()), float(pooled.max())
            c = np.linspace(lo - 1.0, hi + 1.0, self.n_centers)
        else:
            c = np.asarray(self.centers, dtype=float)
        w = np.asarray(self.widths, dtype=float)
        u = (x[None, None, :] - c[:, None, None]) / w[None, :, None]
        funcs = [np.maximum(-1.0, 1.0 - np.abs(u))]
        if self.ramps:
            funcs.append(np.clip(u, -1.0, 1.0))
        return np.concatenate([f.reshape(-1, x.size) for f in funcs])


def _check_bl(g: Callable, grid: np.ndarray, tol: float = 1e-9) -> None:
    v = np.asarray([g(t) for t in grid], dtype=float)
    if np.max(np.abs(v)) > 1.0 + tol:
        raise BLNormError("test function has sup norm above 1")
    slope = np.abs(np.diff(v)) / np.diff(grid)
    if slope.size and slope.max() > 1.0 + 1e-6:
        raise BLNormError("test function has Lipschitz constant above 1")


def dbl_lower(a, b, dictionary=None) -> float:
    """Lower bound on the bounded-Lipschitz distance of two 1-D measures.

    Returns the largest ``|int g d(a - b)|`` over the dictionary. ``dictionary``
    is a :class:`TentDictionary` (default) or a sequence of callables, which
    are checked for ``|g| <= 1`` and Lipschitz constant ``<= 1`` on a grid.
    """
    a, b = _as_measure(a), _as_measure(b)
    if a.dim != 1 or b.dim != 1:
        raise ValueError("dbl_lower needs one-dimensional measures")
    x, y = a.samples[:, 0], b.samples[:, 0]
    pooled = np.concatenate([x, y])
    if dictionary is None:
        dictionary = TentDictionary()
    if isinstance(dictionary, TentDictionary):
        diff = dictionary.evaluate(x, pooled).mean(axis=1) - dictionary.evaluate(y, pooled).mean(axis=1)
        return float(min(2.0, np.max(np.abs(diff))))
    grid = np.linspace(pooled.min() - 2.0, pooled.max() + 2.0, 2001)
    best = 0.0
    for g in dictionary:
        _check_bl(g, grid)
        val = abs(np.mean([g(t) for t in x]) - np.mean([g(t) for t in y]))
        best = max(best, float(val))
    return best
