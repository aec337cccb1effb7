"""Contraction constants and the existence / automorphy condition checker."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

__all__ = [
    "ContractionConstants",
    "Example2Constants",
    "beta_constants",
    "c_factor",
    "check_existence_conditions",
    "contraction_factor",
    "example1_constants",
    "example2_constants",
    "gronwall_bound",
]

VARIANTS = ("beta12", "mean3")


@dataclass(frozen=True)
class ContractionConstants:
    K: float
    M: float
    delta: float
    c_tilde2: float
    H: float
    beta1: float
    beta2: Optional[float]
    c_factor: Optional[float]
    l1_plus_l2: Optional[float]
    variant: str = "beta12"
    note: str = ""

    @property
    def defined(self) -> bool:
        return self.beta2 is not None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["defined"] = self.defined
        return d


def _l1_plus_l2(delta: float, H: float) -> float:
    p = 4.0 * H - 2.0
    return math.gamma(p) / (p * delta**p) + math.gamma(4.0 * H - 3.0) / (2.0 * delta**p)


def c_factor(delta: float, H: float) -> float:
    """``sqrt(L1 + L2)``; the double integral of ``|x-y|^(4H-4)`` converges only for H > 3/4."""
    if H <= 0.75:
        raise ValueError("C(delta, H) requires H > 3/4")
    return math.sqrt(_l1_plus_l2(delta, H))


def beta_constants(
    K: float,
    M: float,
    delta: float,
    c_tilde2: float = 1.0,
    H: float = 0.8,
    variant: str = "beta12",
) -> ContractionConstants:
    """Compute beta1, beta2 and C(delta, H).

    ``variant="beta12"`` uses ``beta1 + 3H(2H-1) M^2 K^2 delta C(delta, H)``
    as stated with the constants; ``variant="mean3"`` uses the power of
    delta appearing in the intermediate bound,
    ``3H(2H-1) M^2 K^2 delta^(1-2H) (G(4H-2)/(4H-2) + G(4H-3)/2)^(1/2)``.
    For ``H <= 3/4`` beta2 is left undefined.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if K < 0:
        raise ValueError("K must be non-negative")
    if M < 1:
        raise ValueError("M must be >= 1")
    if c_tilde2 <= 0:
        raise ValueError("c_tilde2 must be positive")
    if not (0.5 < H < 1.0):
        raise ValueError("H must lie in (1/2, 1)")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    beta1 = (3.0 * M**2 * K + c_tilde2 * M**2 * K) / delta
    if H <= 0.75:
        return ContractionConstants(
            K, M, delta, c_tilde2, H, beta1, None, None, None, variant,
            note="H <= 3/4: Gamma(4H-3) and the |x-y|^(4H-4) integral diverge; beta2 undefined",
        )
    l12 = _l1_plus_l2(delta, H)
    c = math.sqrt(l12)
    pref = 3.0 * H * (2.0 * H - 1.0) * M**2 * K**2
    if variant == "beta12":
        extra = pref * delta * c
    else:
        extra = pref / delta ** (2.0 * H - 1.0) * math.sqrt(
            math.gamma(4.0 * H - 2.0) / (4.0 * H - 2.0) + math.gamma(4.0 * H - 3.0) / 2.0
        )
    return ContractionConstants(K, M, delta, c_tilde2, H, beta1, beta1 + extra, c, l12, variant)


def contraction_factor(c: ContractionConstants) -> Optional[float]:
    """Lipschitz factor ``(beta2/delta)(1 + beta2/delta)`` of the law map on sup W^2."""
    if c.beta2 is None:
        return None
    r = c.beta2 / c.delta
    return r * (1.0 + r)


def check_existence_conditions(c: ContractionConstants) -> dict:
    """Left-hand sides and verdicts of the three sufficient conditions.

    A verdict is ``True`` (holds), ``False`` (fails) or ``None``
    (indeterminate, when beta2 is undefined).
    """
    K, M, d, C2, H = c.K, c.M, c.delta, c.c_tilde2, c.H
    cond1 = 2.0 * K * M**2 * (1.0 / d**2 + C2 / (2.0 * d))
    cond1_plus = contraction_factor(c)
    cond2 = 18.0 * K * M**2 / d + 18.0 * C2 * M**2 * K + 9.0 * H * (2.0 * H - 1.0) * M**2 * K**2
    return {
        "cond1": {"lhs": cond1, "holds": cond1 < 1.0},
        "cond1_plus": {
            "lhs": cond1_plus,
            "holds": None if cond1_plus is None else cond1_plus < 1.0,
        },
        "cond2": {"lhs": cond2, "holds": cond2 < 1.0, "l1_plus_l2": c.l1_plus_l2},
        "beta1": c.beta1,
        "beta2": c.beta2,
        "c_factor": c.c_factor,
        "variant": c.variant,
        "note": c.note,
    }


def example1_constants(c1: float, c2: float, c3: float, H: float, c_tilde2: float = 1.0,
                       variant: str = "beta12") -> ContractionConstants:
    """Constants of the modulated stochastic heat equation preset (M = 1, delta = pi^2 - 1)."""
    if min(c1, c2, c3) < 0:
        raise ValueError("coefficients c1, c2, c3 must be non-negative")
    K = 2.0 * max(c1**2 / 4.0 + c1**2, c2**2 / 4.0 + c2**2, c3 / 2.0)
    return beta_constants(K, 1.0, math.pi**2 - 1.0, c_tilde2, H, variant)


@dataclass(frozen=True)
class Example2Constants:
    K1: float
    K2: float
    nu: float

    @property
    def K(self) -> float:
        return max(self.K1, self.K2)

    M = 1.0

    @property
    def delta(self) -> float:
        return self.nu / 2.0

    def contraction(self, H: float = 0.8, c_tilde2: float = 1.0, variant: str = "beta12") -> ContractionConstants:
        return beta_constants(self.K, self.M, self.delta, c_tilde2, H, variant)


def example2_constants(g1_weighted_norm: float, g2_sup_norm: float, nu: float) -> Example2Constants:
    """Lipschitz constants of the weighted-shift preset drift (K1) and diffusion (K2)."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    if g1_weighted_norm < 0 or g2_sup_norm < 0:
        raise ValueError("norms must be non-negative")
    K1 = 8.0 / nu * g2_sup_norm**2 * g1_weighted_norm**2
    K2 = g2_sup_norm**2
    return Example2Constants(K1, K2, float(nu))


def gronwall_bound(alpha: float, betas: Sequence[float], deltas: Sequence[float]) -> float:
    """Bound ``alpha * dmin / (dmin - beta)`` with ``beta = sum(betas)``, ``dmin = min(deltas)``.

    Valid for a constant forcing ``alpha`` when every rate exceeds ``beta``.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if len(betas) != len(deltas) or not deltas:
        raise ValueError("betas and deltas must be non-empty and of equal length")
    beta = float(sum(betas))
    dmin = float(min(deltas))
    if beta >= dmin:
        raise ValueError(f"need every delta_i > sum(betas) = {beta}")
    return alpha * dmin / (dmin - beta)
