"""Subgradient minimization of a gauge over the halfspace ``<a, x> >= 1``.

Both gauge duals have this shape: a positively homogeneous convex objective
known only through function values and one subgradient per point, and a
single linear constraint whose Euclidean projection is explicit.  The
driver here is shared by the RPCA and SDP dual solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.linalg.blas import dger

from .errors import EssentiallyInfeasibleRegion, InvalidInput

# shortest metric cycle of the dilation method; small problems need the room
CYCLE_MIN = 1000

Oracle = Callable[[np.ndarray], Tuple[float, Optional[np.ndarray]]]


@dataclass
class HalfspaceResult:
    x: np.ndarray
    value: float
    iterations: int
    evaluations: int
    converged: bool
    message: str
    history: List[float] = field(default_factory=list)


def project_halfspace(x, a):
    """Nearest point of ``{z : <a, z> >= 1}`` to ``x``."""
    a = np.asarray(a, dtype=float)
    aa = float(a.ravel() @ a.ravel())
    if aa == 0.0:
        raise InvalidInput("halfspace normal must be nonzero")
    x = np.asarray(x, dtype=float)
    t = float(a.ravel() @ x.ravel())
    if t >= 1.0:
        return x
    return x + ((1.0 - t) / aa) * a


class _Tracker:
    """Best-so-far bookkeeping and the windowed relative-improvement test."""

    def __init__(self, window, rel_tol):
        self.window = window
        self.rel_tol = rel_tol
        self.best_x = None
        self.best_f = math.inf
        self.history = []

    def offer(self, x, f):
        if f < self.best_f:
            self.best_f = f
            self.best_x = x.copy()

    def close_iteration(self, since=0):
        """Record the best value; True when it stalled over the window (counted from ``since``)."""
        self.history.append(self.best_f)
        h = self.history
        if len(h) - since > self.window and math.isfinite(h[-1]):
            return h[-self.window - 1] - h[-1] <= self.rel_tol * abs(h[-1])
        return False


def minimize_on_halfspace(oracle: Oracle, a, x0, cfg, homogeneous=True):
    """Minimize ``f`` over ``<a, x> >= 1`` with the step rule named in ``cfg``.

    ``oracle(x)`` returns ``(f(x), g)`` with ``g`` a subgradient, or
    ``(inf, None)`` at essentially infeasible points.  For a homogeneous
    objective the best iterate is finally scaled onto the boundary, which
    can only lower its value.
    """
    a = np.asarray(a, dtype=float).ravel()
    x0 = project_halfspace(np.asarray(x0, dtype=float).ravel(), a)
    if cfg.step_rule == "dilation":
        res = _dilation(oracle, a, x0, cfg)
    else:
        res = _projected(oracle, a, x0, cfg)
    if homogeneous and math.isfinite(res.value):
        t = float(a @ res.x)
        if t > 1.0:
            res.x = res.x / t
            res.value = res.value / t
    return res


def _projected(oracle, a, x0, cfg):
    track = _Tracker(cfg.window, cfg.rel_tol)
    x = x0
    f, g = oracle(x)
    evals = 1
    if not math.isfinite(f):
        raise EssentiallyInfeasibleRegion("objective is infinite at the starting point")
    track.offer(x, f)
    gnorm0 = float(np.linalg.norm(g))
    alpha0 = 1.0 / gnorm0 if gnorm0 > 0 else 0.0
    converged, message = False, "max_iter reached"
    k = 0
    for k in range(cfg.max_iter):
        gn2 = float(g @ g)
        if gn2 == 0.0:
            converged, message = True, "zero subgradient"
            track.close_iteration()
            break
        if cfg.step_rule == "polyak":
            gap = f - cfg.polyak_target
            if gap <= 0.0:
                converged, message = True, "target reached"
                track.close_iteration()
                break
            step = gap / gn2
        else:
            step = alpha0 / math.sqrt(k + 1)
        for _ in range(60):
            xn = project_halfspace(x - step * g, a)
            fn, gnew = oracle(xn)
            evals += 1
            if math.isfinite(fn):
                break
            step *= 0.5
        else:
            # stuck at an essentially infeasible boundary: restart from the best point
            xn = track.best_x
            fn, gnew = oracle(xn)
            evals += 1
        x, f, g = xn, fn, gnew
        track.offer(x, f)
        if track.close_iteration():
            converged, message = True, "relative improvement below rel_tol"
            break
    return HalfspaceResult(track.best_x, track.best_f, k + 1, evals, converged, message, track.history)


def _dilation(oracle, a, x0, cfg, q1=1.0, q2=1.1, nh=3, max_ls=500):
    """Subgradient method with space dilation along subgradient differences.

    Runs in coordinates ``w`` of the boundary hyperplane ``x = x0 + P w``
    (``P`` the orthogonal projector onto ``a``'s complement).  Each
    iteration moves along ``-B B^T g`` with an adaptive step that is
    repeated while the objective keeps decreasing, then dilates the metric
    ``B`` by ``1 / cfg.dilation`` in the direction of ``B^T (g_new - g)``.
    The metric restarts from the identity when steps collapse, when the best
    value has not improved by ``cfg.rel_tol`` (relative) for ``cfg.window``
    iterations, or after ``max(10 d, CYCLE_MIN)`` iterations.  After ``cfg.patience``
    restarts in a row without such an improvement, one cycle runs at the
    initial step scale; the run ends if that cycle brings nothing either.
    """
    d = a.size
    ahat = a / np.linalg.norm(a)

    def proj(v):
        return v - (ahat @ v) * ahat

    def point(w):
        return project_halfspace(x0 + proj(w), a)

    evals = 0

    def F(w):
        nonlocal evals
        evals += 1
        f, g = oracle(point(w))
        if not math.isfinite(f):
            return f, None
        return f, proj(np.asarray(g, dtype=float).ravel())

    track = _Tracker(cfg.window, cfg.rel_tol)
    w_best = np.zeros(d)
    f, g = F(w_best)
    if not math.isfinite(f):
        raise EssentiallyInfeasibleRegion("objective is infinite at the starting point")
    track.offer(w_best, f)
    h0 = 0.1
    h = h0 * max(float(np.linalg.norm(x0)), 1e-12)
    hmin = 1e-15 * max(1.0, float(np.linalg.norm(x0)))
    inv = 1.0 / cfg.dilation - 1.0
    cycle = max(10 * d, CYCLE_MIN)
    it = 0
    idle = 0
    fresh = False
    converged, message = False, "max_iter reached"
    while it < cfg.max_iter and not converged:
        B = np.eye(d, order="F")
        w = track.best_x.copy()
        f_start = track.best_f
        f, g = F(w)
        k0 = it
        ndx = 0.0
        while it < cfg.max_iter and it - k0 < cycle:
            dg = B.T @ g
            nd = float(np.linalg.norm(dg))
            if nd == 0.0:
                converged, message = True, "zero subgradient"
                break
            dx = B @ (dg / nd)
            ndx = float(np.linalg.norm(dx))
            travelled = 0.0
            ls = 0
            g1 = None
            while True:
                w = w - h * dx
                ls += 1
                f1, g1 = F(w)
                if not math.isfinite(f1):
                    # overshot into the essentially infeasible region: back off
                    w = w + h * dx
                    h *= 0.5
                    g1 = None
                    if ls > 60:
                        break
                    continue
                travelled += h * ndx
                track.offer(w, f1)
                if ls % nh == 0:
                    h *= q2
                # relative test: on a flat ray roundoff alone keeps g1 @ dx positive
                if g1 @ dx <= 1e-12 * float(np.linalg.norm(g1)) * ndx or ls > max_ls:
                    break
            if ls == 1:
                h *= q1
            it += 1
            if track.close_iteration(since=k0):
                # no new best over the window: the metric is spent, restart it
                break
            if g1 is None or travelled < 1e-15 * max(1.0, float(np.linalg.norm(w))):
                break
            r = B.T @ (g1 - g)
            nr = float(np.linalg.norm(r))
            if nr > 0.0:
                xi = r / nr
                B = dger(inv, B @ xi, xi, a=B, overwrite_a=True)
            g = g1
        # carry the effective step length h ||dx|| into the identity metric,
        # shrunk after a fruitless cycle since oversized steps are the usual cause
        h = h * ndx if ndx > 0 else h
        if f_start - track.best_f <= cfg.rel_tol * abs(track.best_f):
            idle += 1
            h *= 0.1
            if converged:
                pass
            elif fresh:
                converged, message = True, "relative improvement below rel_tol"
            elif idle >= cfg.patience:
                # the shrinking steps may have stalled at a kink: one more
                # cycle at the initial scale before giving up
                fresh, idle = True, 0
                h = h0 * max(float(np.linalg.norm(point(track.best_x))), 1e-12)
        else:
            idle = 0
            fresh = False
        h = max(h, hmin)
    return HalfspaceResult(point(track.best_x), track.best_f, it, evals, converged, message,
                           track.history)
