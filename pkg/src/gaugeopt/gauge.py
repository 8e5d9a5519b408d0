"""Gauge and polar evaluations for the two problem families, and duality certificates."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInput, PencilUnbounded
from .linalg import Pencil, check_symmetric, full_svd, sym

# relative band for PSD membership in the SDP gauge
TOL_PSD = 1e-8


@dataclass(frozen=True)
class GaugeValue:
    """A nonnegative extended-real value; ``infinite`` is an explicit flag."""

    value: float
    infinite: bool = False

    @classmethod
    def inf(cls):
        return cls(math.inf, True)

    @classmethod
    def of(cls, x):
        x = float(x)
        if math.isinf(x):
            return cls.inf()
        if x < 0:
            raise InvalidInput(f"gauge value must be nonnegative, got {x}")
        return cls(x, False)

    def __float__(self):
        return math.inf if self.infinite else self.value

    def to_json(self):
        return {"value": None if self.infinite else self.value, "infinite": self.infinite}

    @classmethod
    def from_json(cls, d):
        return cls.inf() if d["infinite"] else cls(float(d["value"]), False)


class Verdict(str, enum.Enum):
    STRONG = "StrongDuality"
    WEAK = "WeakOnly"
    VIOLATED = "Violated"


@dataclass(frozen=True)
class DualityCertificate:
    primal_value: GaugeValue
    dual_value: GaugeValue
    product: Optional[float]
    tol: float
    verdict: Verdict
    degenerate: bool = False

    @property
    def gap(self):
        """``|p*d - 1|``, or infinity when the product is undefined."""
        return math.inf if self.product is None else abs(self.product - 1.0)

    def to_json(self):
        return {
            "primal_value": self.primal_value.to_json(),
            "dual_value": self.dual_value.to_json(),
            "product": self.product,
            "tol": self.tol,
            "verdict": self.verdict.value,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_json(cls, d):
        return cls(GaugeValue.from_json(d["primal_value"]), GaugeValue.from_json(d["dual_value"]),
                   d["product"], d["tol"], Verdict(d["verdict"]), d["degenerate"])


def _as_gauge(x):
    return x if isinstance(x, GaugeValue) else GaugeValue.of(x)


def duality_certificate(primal, dual, tol=1e-6):
    """Classify a primal/dual gauge pair by the product of their values.

    Weak gauge duality says the product of strongly feasible values is at
    least one; a product of one certifies both points optimal.
    """
    p, d = _as_gauge(primal), _as_gauge(dual)
    if p.infinite or d.infinite or p.value == 0.0 or d.value == 0.0:
        return DualityCertificate(p, d, None, tol, Verdict.WEAK, degenerate=True)
    prod = p.value * d.value
    if abs(prod - 1.0) <= tol:
        verdict = Verdict.STRONG
    elif prod < 1.0 - tol:
        verdict = Verdict.VIOLATED
    else:
        verdict = Verdict.WEAK
    return DualityCertificate(p, d, prod, tol, verdict)


def nuclear_norm(X):
    return float(np.sum(full_svd(X)[1]))


def rpca_gauge(X, Y, gamma):
    """``||X||_* + gamma ||Y||_1``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape:
        raise InvalidInput(f"X and Y shapes differ: {X.shape} vs {Y.shape}")
    if gamma <= 0:
        raise InvalidInput("gamma must be positive")
    return GaugeValue.of(nuclear_norm(X) + gamma * float(np.abs(Y).sum()))


def rpca_polar(U, V, gamma):
    """Polar of the RPCA gauge: ``max(||U||_2, ||V||_inf / gamma)``."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    s_max = float(full_svd(U)[1][0]) if U.size else 0.0
    vmax = float(np.abs(V).max()) if V.size else 0.0
    return GaugeValue.of(max(s_max, vmax / gamma))


def sdp_gauge(X, C, tol_psd=TOL_PSD):
    """``<C, X>`` on the PSD cone, +infinity off it."""
    X = check_symmetric(X, "X")
    C = check_symmetric(C, "C")
    if X.shape != C.shape:
        raise InvalidInput(f"X and C shapes differ: {X.shape} vs {C.shape}")
    lam = np.linalg.eigvalsh(sym(X))
    if lam[0] < -tol_psd * max(1.0, float(lam[-1])):
        return GaugeValue.inf()
    # clamp roundoff below zero; <C,X> >= 0 for C, X PSD
    return GaugeValue.of(max(float(np.sum(C * X)), 0.0))


def sdp_polar(Z, C, pencil=None):
    """``inf{mu >= 0 : mu C - Z is PSD}``; +infinity when no such mu exists."""
    Z = check_symmetric(Z, "Z")
    if pencil is None:
        pencil = Pencil(C)
    lam = np.linalg.eigvalsh(sym(Z))
    if lam[-1] <= 0.0:
        return GaugeValue.of(0.0)
    try:
        mu, _ = pencil.max_eig(Z)
    except PencilUnbounded:
        return GaugeValue.inf()
    return GaugeValue.of(max(mu, 0.0))
