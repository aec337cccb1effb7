"""Ready-made problems: scalar OU-type family, the modulated heat equation and
the weighted-shift (HJMM-type) equation."""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from scipy.fft import dst

from .evolution import ScalarExponentialFamily, SpectralHeatFamily, WeightedShiftGroup
from .metrics import EmpiricalMeasure
from .solver import CoefficientSpec, McKeanVlasovProblem

__all__ = ["ou_problem", "example1_problem", "example2_problem", "literal_b", "ou_stationary_variance"]


def ou_problem(delta: float = 1.0, sigma_w: float = 0.0, sigma_h: float = 0.0, hurst: float = 0.75,
               kappa: float = 0.0, forcing: Optional[Callable[[float], float]] = None) -> McKeanVlasovProblem:
    """Scalar problem with ``U(t, s) = exp(-delta (t - s))``.

    Drift ``kappa (mean(mu) - x) + forcing(t)``, constant diffusion ``sigma_w``
    and constant fBm coefficient ``sigma_h``. With ``kappa = 0`` the particles
    do not interact.
    """
    f = None
    if kappa != 0.0 or forcing is not None:
        def f(t, X, mu):
            out = kappa * (mu.mean()[None, :] - X) if kappa != 0.0 else np.zeros_like(X)
            if forcing is not None:
                out = out + forcing(t)
            return out

    theta = None
    if sigma_w != 0.0:
        def theta(t, X, mu):
            return np.full((X.shape[0], 1, 1), sigma_w)

    psi = None
    if sigma_h != 0.0:
        def psi(t, mu):
            return np.array([[sigma_h]])

    K = max(2.0 * kappa**2, 0.0)  # |kappa(m1 - x) - kappa(m2 - y)|^2 <= 2 kappa^2 (|x-y|^2 + W^2)
    return McKeanVlasovProblem(
        family=ScalarExponentialFamily(delta),
        coefficients=CoefficientSpec(f=f, theta=theta, psi=psi, K=K),
        dim=1,
        hurst=hurst,
        fbm_eigenvalues=np.ones(1),
        brownian_dim=1,
        name="ou",
        params={"delta": delta, "sigma_w": sigma_w, "sigma_h": sigma_h, "hurst": hurst, "kappa": kappa,
                "forcing": forcing is not None},
    )


def ou_stationary_variance(delta: float, sigma_w: float = 0.0, sigma_h: float = 0.0, hurst: float = 0.75) -> float:
    """Closed form ``sigma_w^2/(2 delta) + sigma_h^2 H Gamma(2H) / delta^(2H)``."""
    return sigma_w**2 / (2.0 * delta) + sigma_h**2 * hurst * math.gamma(2.0 * hurst) / delta ** (2.0 * hurst)


def literal_b(t: float) -> float:
    """``t 1_[0,1](t) + t 1_[1,inf)(t)``, i.e. ``t`` for ``t >= 0`` and 0 otherwise."""
    return t if t >= 0.0 else 0.0


def example1_problem(c1: float, c2: float, c3: float, hurst: float = 0.8, modes: int = 16,
                     b: Optional[Callable[[float], float]] = None, fbm_eigenvalues=None,
                     modulation: Optional[Callable[[float], float]] = None) -> McKeanVlasovProblem:
    """Modulated stochastic heat equation on (0, 1) with Dirichlet conditions.

    States are coefficients in the basis ``sqrt(2) sin(k pi x)``. Pointwise
    nonlinearities are evaluated at the ``modes`` interior collocation nodes
    ``x_j = j / (modes + 1)`` through an orthonormal DST-I. The reference law
    is the Dirac mass at the zero function, so ``W(P_0, mu)`` is the root mean
    square norm of ``mu``. Brownian noise is scalar; the fBm is cylindrical
    (all eigenvalues one) unless ``fbm_eigenvalues`` is given.
    """
    m = int(modes)
    b = literal_b if b is None else b
    root = math.sqrt(m + 1.0)
    s2, s3 = math.sqrt(2.0), math.sqrt(3.0)

    def to_grid(C):
        return root * dst(C, type=1, norm="ortho", axis=-1)

    def to_modes(U):
        return dst(U, type=1, norm="ortho", axis=-1) / root

    def w0(mu: EmpiricalMeasure) -> float:
        return math.sqrt(mu.second_moment())

    def phi1(t):
        return 0.5 * math.sin(1.0 / (2.0 + math.cos(t) + math.cos(s2 * t)))

    def phi2(t):
        return 0.5 * math.sin(1.0 / (2.0 + math.cos(t) + math.cos(s3 * t)))

    def f(t, X, mu):
        U = to_grid(X)
        return to_modes(c1 * (phi1(t) * (U / (U**2 + 1.0) + w0(mu)) + b(t) * np.cos(U)))

    def theta(t, X, mu):
        U = to_grid(X)
        return to_modes(c2 * (phi2(t) * (U + w0(mu)) + b(t) * np.sin(U)))[:, :, None]

    def psi(t, mu):
        return c3 * phi2(t) * w0(mu) * np.eye(m)

    K = 2.0 * max(1.25 * c1**2, 1.25 * c2**2, c3 / 2.0)
    lam = np.ones(m) if fbm_eigenvalues is None else np.asarray(fbm_eigenvalues, dtype=float)
    return McKeanVlasovProblem(
        family=SpectralHeatFamily(m, modulation),
        coefficients=CoefficientSpec(f=f, theta=theta, psi=psi, K=K),
        dim=m,
        hurst=hurst,
        fbm_eigenvalues=lam,
        brownian_dim=1,
        name="example1",
        params={"c1": c1, "c2": c2, "c3": c3, "hurst": hurst, "modes": m,
                "b": "literal" if b is literal_b else repr(b)},
    )


def example2_problem(nu: float = 8.0, amplitude: float = 0.05, X: float = 10.0,
                     n_nodes: int = 201) -> McKeanVlasovProblem:
    """Mean-field HJMM-type equation driven by the weighted shift group.

    Uses ``g(x, y, z) = a exp(-x^2) (sin y + sin z) / 2`` with ``z`` read
    pointwise from the other particles, so ``|g| <= g1 = a exp(-x^2)`` and
    ``g`` is Lipschitz with ``g2 = a exp(-x^2) / 2``. No fBm term.
    """
    grp = WeightedShiftGroup(nu, X=X, n_nodes=n_nodes)
    x = grp.grid
    h = grp.spacing
    env = amplitude * np.exp(-x**2)
    zero = int(np.argmin(np.abs(x)))
    mirror = np.abs(np.arange(x.size) - zero) + zero  # index of |x| for symmetric grids
    s3, s2 = math.sqrt(3.0), math.sqrt(2.0)

    def Phi1(t):
        return math.cos(1.0 / (2.0 + math.sin(t) + math.sin(s3 * t)))

    def Phi2(t):
        return math.cos(1.0 / (2.0 + math.sin(t) + math.sin(s2 * t)))

    def f(t, U, mu):
        G = Phi1(t) * env * (np.sin(U) + np.sin(mu.samples).mean(axis=0)) / 2.0
        cum = np.zeros_like(G)
        cum[:, zero + 1:] = np.cumsum(0.5 * (G[:, zero:-1] + G[:, zero + 1:]) * h, axis=1)
        return G * cum[:, np.minimum(mirror, x.size - 1)]

    def theta(t, U, mu):
        return (Phi2(t) * env * np.sin(U) / 2.0)[:, :, None]

    g1 = amplitude * math.sqrt(math.sqrt(math.pi / 2.0) * math.exp(nu**2 / 8.0))
    from .conditions import example2_constants

    c = example2_constants(g1, amplitude / 2.0, nu)
    return McKeanVlasovProblem(
        family=grp,
        coefficients=CoefficientSpec(f=f, theta=theta, psi=None, K=c.K),
        dim=x.size,
        hurst=0.75,
        fbm_eigenvalues=None,
        brownian_dim=1,
        name="example2",
        params={"nu": nu, "amplitude": amplitude, "X": X, "n_nodes": n_nodes,
                "g1_weighted_norm": g1, "g2_sup_norm": amplitude / 2.0},
    )
