"""Fractional Gaussian noise, fBm paths and Wiener integrals against fBm.

Noise is synthesised by circulant embedding of the fGn autocovariance
(exact in law, O(n log n)); a sequential Durbin-Levinson sampler is kept as
the fallback when the embedding is not positive semi-definite.
"""

from __future__ import annotations

import csv
import functools
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import rng

__all__ = [
    "SingularityError",
    "check_hurst",
    "fbm_cov",
    "fractional_kernel",
    "fgn_autocov",
    "circulant_eigenvalues",
    "FgnSequence",
    "FbmPath",
    "HilbertFbm",
    "StepIntegrand",
    "generate_fgn",
    "generate_fgn_batch",
    "cumulate_to_fbm",
    "sample_hilbert_fbm",
    "increment_covariance",
    "fbm_integral_second_moment",
    "kernel_norm_integral",
    "lp_kernel_ratio",
    "wiener_integral_fbm",
    "wiener_integral_fbm_many",
    "operator_wiener_integral",
    "operator_integral_second_moment",
]

# relative size below which a negative embedding eigenvalue is treated as round-off
_EIG_CLIP = 1e-10


class SingularityError(ValueError):
    """Raised when the fractional kernel is evaluated at the origin."""


def check_hurst(h: float) -> float:
    """Validate a Hurst index; 1/2 is admitted as the Brownian limit."""
    h = float(h)
    if not (0.5 <= h < 1.0):
        raise ValueError(f"Hurst parameter must satisfy 1/2 <= h < 1, got {h}")
    return h


def fbm_cov(t, s, h: float):
    """Covariance of standard fBm, ``(|t|^2h + |s|^2h - |t-s|^2h) / 2``."""
    h2 = 2.0 * h
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    out = 0.5 * (np.abs(t) ** h2 + np.abs(s) ** h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def fractional_kernel(u, h: float):
    """Kernel ``h(2h-1)|u|^(2h-2)``; singular at ``u = 0``."""
    u = np.asarray(u, dtype=float)
    if np.any(u == 0.0):
        raise SingularityError("fractional kernel is singular at u = 0")
    out = h * (2.0 * h - 1.0) * np.abs(u) ** (2.0 * h - 2.0)
    return float(out) if out.ndim == 0 else out


def fgn_autocov(k, h: float, dt: float = 1.0):
    """Autocovariance at integer lag ``k`` of fGn sampled with step ``dt``."""
    h = check_hurst(h)
    if dt <= 0:
        raise ValueError("dt must be positive")
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * h
    out = 0.5 * dt**h2 * ((k + 1.0) ** h2 + np.abs(k - 1.0) ** h2 - 2.0 * k**h2)
    return float(out) if out.ndim == 0 else out


def circulant_eigenvalues(n: int, h: float) -> np.ndarray:
    """Eigenvalues of the size-2n circulant embedding of unit-step fGn."""
    return _embedding(int(n), float(h)).copy()


@functools.lru_cache(maxsize=64)
def _embedding(n: int, h: float) -> np.ndarray:
    gam = fgn_autocov(np.arange(n + 1), h)
    row = np.concatenate([gam, gam[n - 1:0:-1]])
    eig = np.fft.fft(row).real
    eig.setflags(write=False)
    return eig


@functools.lru_cache(maxsize=64)
def _embedding_sqrt(n: int, h: float) -> Optional[np.ndarray]:
    eig = _embedding(n, h)
    if eig.min() < -_EIG_CLIP * eig.max():
        return None
    out = np.sqrt(np.clip(eig, 0.0, None) / eig.size)
    out.setflags(write=False)
    return out


def _circulant_rows(normals: np.ndarray, scale: np.ndarray, n: int) -> np.ndarray:
    # normals: (..., 2, 2n); real part of the transform has exactly the fGn law
    z = normals[..., 0, :] + 1j * normals[..., 1, :]
    return np.fft.fft(scale * z, axis=-1).real[..., :n]


def _hosking(normals: np.ndarray, h: float) -> np.ndarray:
    """Durbin-Levinson sequential conditional sampler (unit step)."""
    n = normals.shape[-1]
    gam = fgn_autocov(np.arange(n), h)
    out = np.empty_like(normals)
    out[..., 0] = normals[..., 0] * np.sqrt(gam[0])
    phi = np.zeros(n)
    v = gam[0]
    for i in range(1, n):
        prev = phi[: i - 1].copy()
        k = (gam[i] - prev @ gam[1:i][::-1]) / v
        phi[: i - 1] = prev - k * prev[::-1]
        phi[i - 1] = k
        v *= 1.0 - k * k
        mean = out[..., :i][..., ::-1] @ phi[:i]
        out[..., i] = mean + np.sqrt(v) * normals[..., i]
    return out


def _draw_unit_fgn(gen: np.random.Generator, n: int, h: float, method: str) -> np.ndarray:
    if method not in ("auto", "circulant", "hosking"):
        raise ValueError(f"unknown fGn method {method!r}")
    scale = None if method == "hosking" else _embedding_sqrt(n, h)
    if scale is None:
        if method == "circulant":
            raise ValueError("circulant embedding is not positive semi-definite")
        return _hosking(gen.standard_normal(n), h)
    return _circulant_rows(gen.standard_normal((2, 2 * n)), scale, n)


@dataclass
class FgnSequence:
    values: np.ndarray
    dt: float
    h: float
    seed: int


@dataclass
class FbmPath:
    times: np.ndarray
    values: np.ndarray
    h: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,value\n")
        for t, v in zip(self.times, self.values):
            buf.write(f"{t:.17g},{v:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, h: float) -> "FbmPath":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["t", "value"]:
            raise ValueError("expected header 't,value'")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]]).reshape(-1, 2)
        return cls(times=data[:, 0], values=data[:, 1], h=h)


def generate_fgn(n: int, h: float, dt: float, seed: int, method: str = "auto") -> FgnSequence:
    """Sample ``n`` values of fractional Gaussian noise with step ``dt``.

    The result is a deterministic function of ``(n, h, dt, seed)``.
    """
    h = check_hurst(h)
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = int(n)
    gen = rng.stream(seed, rng.FGN)
    values = _draw_unit_fgn(gen, n, h, method) * dt**h
    return FgnSequence(values=values, dt=float(dt), h=h, seed=int(seed))


def generate_fgn_batch(
    n_paths: int,
    n: int,
    h: float,
    dt: float,
    seed: int,
    *,
    key: Sequence[int] = (),
    threads: int = 1,
    chunk: int = 1024,
    method: str = "auto",
) -> np.ndarray:
    """Sample ``n_paths`` independent fGn rows, shape ``(n_paths, n)``.

    Row ``i`` draws from the stream ``(seed, FGN, *key, i)`` so the output is
    bit-identical for any ``threads`` or ``chunk``.
    """
    h = check_hurst(h)
    if n < 1 or n_paths < 0:
        raise ValueError("n must be >= 1 and n_paths >= 0")
    if dt <= 0:
        raise ValueError("dt must be positive")
    out = np.empty((n_paths, n))
    scale = None if method == "hosking" else _embedding_sqrt(n, h)
    if scale is None and method == "circulant":
        raise ValueError("circulant embedding is not positive semi-definite")

    def work(lo: int) -> None:
        hi = min(lo + chunk, n_paths)
        if scale is None:
            z = np.stack([rng.stream(seed, rng.FGN, *key, i).standard_normal(n) for i in range(lo, hi)])
            out[lo:hi] = _hosking(z, h)
        else:
            z = np.stack(
                [rng.stream(seed, rng.FGN, *key, i).standard_normal((2, 2 * n)) for i in range(lo, hi)]
            )
            out[lo:hi] = _circulant_rows(z, scale, n)

    starts = range(0, n_paths, chunk)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    else:
        for lo in starts:
            work(lo)
    return out * dt**h


def cumulate_to_fbm(g: FgnSequence) -> FbmPath:
    values = np.concatenate([[0.0], np.cumsum(g.values)])
    times = np.arange(values.size) * g.dt
    return FbmPath(times=times, values=values, h=g.h)


@dataclass
class HilbertFbm:
    """Truncated series ``sum_k sqrt(lambda_k) beta_k(t) e_k``."""

    eigenvalues: np.ndarray
    component_paths: list
    tail: float = 0.0  # sum of eigenvalues dropped by truncation

    @property
    def times(self) -> np.ndarray:
        return self.component_paths[0].times

    def values(self) -> np.ndarray:
        """Coordinates of the sample, shape ``(len(times), m)``."""
        beta = np.stack([p.values for p in self.component_paths], axis=1)
        return beta * np.sqrt(self.eigenvalues)


def sample_hilbert_fbm(
    lambdas,
    h: float,
    grid,
    seed: int,
    modes: Optional[int] = None,
) -> HilbertFbm:
    """Sample a Q-fBm with eigenvalues ``lambdas`` on a uniform grid from 0.

    ``lambdas`` of all ones gives the (truncated) cylindrical fBm. When
    ``modes`` is smaller than ``len(lambdas)`` the remainder is dropped and its
    sum recorded in ``tail``.
    """
    h = check_hurst(h)
    lam = np.asarray(lambdas, dtype=float)
    if np.any(lam < 0):
        raise ValueError("eigenvalues must be non-negative")
    tail = 0.0
    if modes is not None and modes < lam.size:
        tail = float(lam[modes:].sum())
        lam = lam[:modes]
    grid = np.asarray(grid, dtype=float)
    if grid.size < 1 or grid[0] != 0.0:
        raise ValueError("grid must start at t = 0")
    n = grid.size - 1
    paths = []
    if n == 0:
        paths = [FbmPath(times=grid.copy(), values=np.zeros(1), h=h) for _ in lam]
    else:
        dt = grid[1] - grid[0]
        if not np.allclose(np.diff(grid), dt, rtol=1e-9, atol=0.0):
            raise ValueError("grid must be uniform")
        for k in range(lam.size):
            gen = rng.stream(seed, rng.FBM_COMPONENT, k)
            inc = _draw_unit_fgn(gen, n, h, "auto") * dt**h
            paths.append(FbmPath(times=grid.copy(), values=np.concatenate([[0.0], np.cumsum(inc)]), h=h))
    return HilbertFbm(eigenvalues=lam, component_paths=paths, tail=tail)


@dataclass
class StepIntegrand:
    """Piecewise-constant integrand, ``values[i]`` on ``[t_i, t_{i+1})``."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.breakpoints = np.asarray(self.breakpoints, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.breakpoints.ndim != 1 or self.breakpoints.size < 2:
            raise ValueError("need at least two breakpoints")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if self.values.shape[0] != self.breakpoints.size - 1:
            raise ValueError("one value per cell required")

    @classmethod
    def from_function(cls, fn: Callable, t1: float, t2: float, n_cells: int) -> "StepIntegrand":
        """Midpoint sampling of ``fn`` on ``n_cells`` equal cells of ``[t1, t2]``."""
        br = np.linspace(t1, t2, n_cells + 1)
        mid = 0.5 * (br[1:] + br[:-1])
        return cls(br, np.asarray([fn(m) for m in mid], dtype=float))

    def gram(self) -> np.ndarray:
        v = self.values.reshape(self.values.shape[0], -1)
        return v @ v.T


def increment_covariance(breakpoints, h: float) -> np.ndarray:
    """Covariance matrix of fBm increments over consecutive cells."""
    t = np.asarray(breakpoints, dtype=float)
    a, b = t[:-1], t[1:]
    h2 = 2.0 * h

    def p(x):
        return np.abs(x) ** h2

    return 0.5 * (
        p(b[:, None] - a[None, :]) + p(a[:, None] - b[None, :]) - p(b[:, None] - b[None, :]) - p(a[:, None] - a[None, :])
    )


def _is_uniform(t: np.ndarray) -> bool:
    d = np.diff(t)
    return bool(np.allclose(d, d[0], rtol=1e-12, atol=0.0))


def _autocorr(v: np.ndarray) -> np.ndarray:
    """``r[k] = sum_i <v_i, v_{i+k}>`` for k >= 0; v has shape (n, d)."""
    n = v.shape[0]
    size = 1 << int(2 * n - 1).bit_length()
    f = np.fft.rfft(v, n=size, axis=0)
    r = np.fft.irfft((f * f.conj()).sum(axis=1), n=size)[:n]
    return r


def _cell_double_integral(br: np.ndarray, vals: np.ndarray, h: float) -> float:
    v = vals.reshape(vals.shape[0], -1)
    if not np.all(np.isfinite(v)):
        raise ValueError("integrand has non-finite values")
    if _is_uniform(br):
        dt = br[1] - br[0]
        r = _autocorr(v)
        gam = fgn_autocov(np.arange(v.shape[0]), h, dt)
        return float(gam[0] * r[0] + 2.0 * np.dot(gam[1:], r[1:]))
    total = 0.0
    step = 2048
    for lo in range(0, v.shape[0], step):
        hi = min(lo + step, v.shape[0])
        a, b = br[lo:hi], br[lo + 1:hi + 1]
        A, B = br[:-1], br[1:]
        h2 = 2.0 * h
        g = 0.5 * (
            np.abs(b[:, None] - A) ** h2 + np.abs(a[:, None] - B) ** h2
            - np.abs(b[:, None] - B) ** h2 - np.abs(a[:, None] - A) ** h2
        )
        total += float(np.einsum("ij,ik,jk->", g, v[lo:hi], v))
    return total


def fbm_integral_second_moment(hfun: StepIntegrand, h: float) -> float:
    """Second moment of the Wiener integral of ``hfun`` against standard fBm.

    Each cell pair contributes the exact integral of the fractional kernel
    over the rectangle (the increment covariance), so the diagonal
    singularity never has to be sampled.
    """
    h = check_hurst(h)
    return _cell_double_integral(hfun.breakpoints, hfun.values, h)


def kernel_norm_integral(hfun: StepIntegrand, h: float) -> float:
    """Double integral of ``|h(s)| |h(r)| phi(r - s)``; finite iff the integral exists."""
    v = hfun.values.reshape(hfun.values.shape[0], -1)
    return _cell_double_integral(hfun.breakpoints, np.linalg.norm(v, axis=1), check_hurst(h))


def lp_kernel_ratio(hfun: StepIntegrand, h: float, p: float = 2.0) -> dict:
    """Ratio of the kernel double integral of ``|h|`` to ``|h|_{L^p}^2``.

    The ratio is the smallest constant that works for this integrand in the
    L^p bound on the kernel quadratic form; meaningful only for ``p > 1/h``.
    """
    h = check_hurst(h)
    if p <= 1.0 / h:
        raise ValueError(f"p must exceed 1/h = {1.0 / h:.6g}")
    norms = np.linalg.norm(hfun.values.reshape(hfun.values.shape[0], -1), axis=1)
    lp = float((np.diff(hfun.breakpoints) @ norms**p) ** (1.0 / p))
    lhs = kernel_norm_integral(hfun, h)
    return {"p": p, "double_integral": lhs, "lp_norm": lp, "ratio": lhs / lp**2 if lp > 0 else 0.0}


def _grid_indices(breakpoints: np.ndarray, times: np.ndarray) -> np.ndarray:
    dt = times[1] - times[0]
    pos = (breakpoints - times[0]) / dt
    idx = np.rint(pos).astype(int)
    if np.any(np.abs(pos - idx) > 1e-8) or idx.min() < 0 or idx.max() >= times.size:
        raise ValueError("integrand breakpoints must lie on the path grid")
    return idx


def wiener_integral_fbm(hfun: StepIntegrand, path: FbmPath):
    """Pathwise Riemann sum ``sum_i h_i (beta(t_{i+1}) - beta(t_i))``."""
    idx = _grid_indices(hfun.breakpoints, np.asarray(path.times))
    inc = np.diff(np.asarray(path.values)[idx])
    out = np.tensordot(inc, hfun.values, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def wiener_integral_fbm_many(hfun: StepIntegrand, times, values: np.ndarray) -> np.ndarray:
    """Vectorised :func:`wiener_integral_fbm` over paths stacked on axis 0."""
    idx = _grid_indices(hfun.breakpoints, np.asarray(times))
    inc = np.diff(np.asarray(values)[:, idx], axis=1)
    return np.tensordot(inc, hfun.values, axes=(1, 0))


def operator_wiener_integral(breakpoints, ops: np.ndarray, fbm: HilbertFbm) -> np.ndarray:
    """Integral of a step operator field against a Q-fBm.

    ``ops[i]`` is a ``(d, m)`` matrix acting on fBm coordinates on cell i.
    """
    br = np.asarray(breakpoints, dtype=float)
    idx = _grid_indices(br, fbm.times)
    inc = np.diff(fbm.values()[idx], axis=0)  # (cells, m)
    return np.einsum("idm,im->d", np.asarray(ops, dtype=float), inc)


def operator_integral_second_moment(breakpoints, ops: np.ndarray, eigenvalues, h: float) -> float:
    """``sum_k lambda_k`` times the scalar second moment of ``ops[:, :, k]``."""
    ops = np.asarray(ops, dtype=float)
    lam = np.asarray(eigenvalues, dtype=float)
    return float(
        sum(lam[k] * _cell_double_integral(np.asarray(breakpoints, float), ops[:, :, k], check_hurst(h))
            for k in range(lam.size))
    )
