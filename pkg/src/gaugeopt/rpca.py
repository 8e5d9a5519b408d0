"""Robust PCA through its gauge dual.

The primal problem splits ``M`` into a low-rank and a sparse part,

    minimize ||X||_* + gamma ||Y||_1  subject to  X + Y = M,

and its gauge dual minimizes ``max(||Z||_2, ||Z||_inf / gamma)`` over the
halfspace ``<M, Z> >= 1``.  The dual only needs the top singular pair of
``Z`` per iteration.  A dual optimum fixes the singular subspace of the
low-rank part, so recovery reduces to a small PSD-constrained problem in
an ``r x r`` matrix ``T``, solved by ADMM.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .config import SolverConfig
from .errors import Diverged, InvalidInput, NoConvergence, NoNontrivialSolution
from .gauge import DualityCertificate, Verdict, duality_certificate, rpca_gauge
from .linalg import _finite, full_svd, psd_project, sym, top_singular_triplet
from .subgradient import minimize_on_halfspace

# entries of a part this small relative to M count as the zero matrix
ZERO_PART = 1e-10


@dataclass(frozen=True)
class RpcaInstance:
    """Data matrix ``M`` (nonzero) and tradeoff ``gamma > 0``."""

    M: np.ndarray
    gamma: float

    def __post_init__(self):
        M = _finite(self.M, "M")
        if M.ndim != 2 or M.size == 0:
            raise InvalidInput(f"M must be a nonempty 2-D matrix, got shape {M.shape}")
        if not np.any(M):
            raise InvalidInput("M must be nonzero")
        gamma = float(self.gamma)
        if not (gamma > 0 and math.isfinite(gamma)):
            raise InvalidInput("gamma must be a positive finite scalar")
        M = M.copy()
        M.flags.writeable = False
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "gamma", gamma)

    @property
    def shape(self):
        return self.M.shape


@dataclass
class RpcaDualState:
    Z: np.ndarray
    objective: float
    iterations: int
    history: List[float] = field(default_factory=list)
    converged: bool = False
    message: str = ""
    evaluations: int = 0
    kernel_warning: bool = False


@dataclass
class TsubResult:
    """Output of :func:`admm_tsub`.

    ``Y`` is the feasible completion ``M - U T V^T``; ``residual`` is the
    primal residual of the last ADMM iterate before that completion.
    ``status`` is ``"converged"``, ``"stalled"`` (``T`` stopped moving while
    the multiplier kept drifting) or ``"max_iter"``.
    """

    T: np.ndarray
    Y: np.ndarray
    W: np.ndarray
    iterations: int
    residual: float
    status: str

    def __iter__(self):
        return iter((self.T, self.Y, self.W))


@dataclass
class RpcaPrimal:
    X: np.ndarray
    Y: np.ndarray
    T: np.ndarray
    U: np.ndarray
    V: np.ndarray
    tsub: Optional[TsubResult] = None

    @property
    def rank(self):
        return self.U.shape[1]


@dataclass(frozen=True)
class TrivialFlags:
    M_zero_opt: bool
    zero_M_opt: bool

    @property
    def any(self):
        return self.M_zero_opt or self.zero_M_opt


@dataclass
class RpcaCertificate:
    c: np.ndarray
    duality: DualityCertificate
    trivial_flags: TrivialFlags
    tol: float
    c6_exempt: bool

    @property
    def residuals_pass(self):
        checked = self.c[:5] if self.c6_exempt else self.c
        return bool(np.all(checked <= self.tol))

    @property
    def passed(self):
        return self.residuals_pass and self.duality.verdict is Verdict.STRONG

    def to_json(self):
        return {
            "residuals": {f"c{i + 1}": float(v) for i, v in enumerate(self.c)},
            "tol": self.tol,
            "c6_exempt": self.c6_exempt,
            "trivial_flags": {"M_zero_opt": self.trivial_flags.M_zero_opt,
                              "zero_M_opt": self.trivial_flags.zero_M_opt},
            "duality": self.duality.to_json(),
            "passed": self.passed,
        }

    @classmethod
    def from_json(cls, d):
        c = np.array([d["residuals"][f"c{i + 1}"] for i in range(6)], dtype=float)
        flags = TrivialFlags(**d["trivial_flags"])
        return cls(c, DualityCertificate.from_json(d["duality"]), flags, d["tol"], d["c6_exempt"])


def project_feasible(Z, M):
    """Euclidean projection of ``Z`` onto ``{<M, Z> >= 1}``."""
    M = np.asarray(M, dtype=float)
    mm = float(np.sum(M * M))
    if mm == 0.0:
        raise InvalidInput("M must be nonzero")
    Z = np.asarray(Z, dtype=float)
    t = float(np.sum(M * Z))
    if t >= 1.0:
        return Z
    return Z + ((1.0 - t) / mm) * M


def _triplet(Z, tol, v0=None, seed=0):
    """Top singular triplet of ``Z``; the best iterate if the kernel stalls."""
    try:
        return top_singular_triplet(lambda v: Z @ v, lambda u: Z.T @ u, Z.shape,
                                    tol=tol, v0=v0, seed=seed), False
    except NoConvergence as exc:
        return exc.best, True


def _argmax_abs(Z):
    # np.argmax returns the first maximizer in row-major order: the lexicographic one
    return np.unravel_index(int(np.argmax(np.abs(Z))), Z.shape)


def dual_objective(Z, gamma, tol=1e-13, v0=None):
    """``max(||Z||_2, ||Z||_inf / gamma)`` with the spectral norm from the Lanczos kernel."""
    Z = _finite(Z, "Z")
    if not np.any(Z):
        return 0.0
    trip, _ = _triplet(Z, tol, v0)
    return max(trip.sigma, float(np.max(np.abs(Z))) / gamma)


def _subgradient_from(Z, gamma, trip):
    zmax = float(np.max(np.abs(Z)))
    if trip.sigma >= zmax / gamma:
        return trip.sigma, np.outer(trip.u, trip.v)
    G = np.zeros_like(Z)
    ij = _argmax_abs(Z)
    G[ij] = np.sign(Z[ij]) / gamma
    return zmax / gamma, G


def dual_subgradient(Z, gamma, tol=1e-13, v0=None):
    """One subgradient of the dual objective at ``Z``.

    The spectral branch ``u1 v1^T`` wins ties; otherwise a single signed
    unit entry at the lexicographically first largest-magnitude position,
    scaled by ``1 / gamma``.
    """
    Z = _finite(Z, "Z")
    if not np.any(Z):
        return np.zeros_like(Z)
    trip, _ = _triplet(Z, tol, v0)
    return _subgradient_from(Z, gamma, trip)[1]


def solve_dual(instance: RpcaInstance, cfg: SolverConfig = SolverConfig(), Z0=None):
    """Minimize the dual objective over ``<M, Z> >= 1``.

    Starts from ``Z0`` (projected onto the constraint) when given, else from
    ``M / <M, M>``.
    """
    M, gamma = instance.M, instance.gamma
    shape = M.shape
    state = {"v": None, "warn": False}

    def oracle(z):
        Z = z.reshape(shape)
        if not np.any(Z):
            return 0.0, np.zeros(z.size)
        trip, warn = _triplet(Z, cfg.kernel_tol, state["v"], cfg.seed)
        state["warn"] |= warn
        state["v"] = trip.v
        f, G = _subgradient_from(Z, gamma, trip)
        return f, G.ravel()

    if Z0 is None:
        x0 = M / float(np.sum(M * M))
    else:
        x0 = project_feasible(_finite(Z0, "Z0").reshape(shape), M)
    res = minimize_on_halfspace(oracle, M.ravel(), x0.ravel(), cfg)
    Z = project_feasible(res.x.reshape(shape), M)
    obj = dual_objective(Z, gamma, cfg.kernel_tol, state["v"])
    return RpcaDualState(Z, obj, res.iterations, res.history, res.converged, res.message,
                         res.evaluations, state["warn"])


def leading_subspace(Z, tau_mult=1e-4):
    """Singular vectors of ``Z`` whose values are within ``tau_mult`` (relative) of the top one."""
    Z = _finite(Z, "Z")
    if not np.any(Z):
        raise InvalidInput("Z must be nonzero")
    U, s, V = full_svd(Z)
    r = int(np.count_nonzero(s >= (1.0 - tau_mult) * s[0]))
    return U[:, :r], V[:, :r], r


def soft_threshold(X, t):
    """Entrywise shrinkage ``sign(x) max(|x| - t, 0)``."""
    X = np.asarray(X, dtype=float)
    return np.sign(X) * np.maximum(np.abs(X) - t, 0.0)


def tsub_objective(instance, U, V, Z, T):
    """Objective of the recovery subproblem, ``gamma ||M - U T V^T||_1 + <Zhat, M - U T V^T>``.

    With ``Zhat = -Z / ||Z||_2`` and exact singular factors this equals
    ``trace(T) + gamma ||M - U T V^T||_1 - 1 / ||Z||_2`` on feasible ``Z``.
    """
    Zhat = -Z / full_svd(Z)[1][0]
    Y = instance.M - U @ T @ V.T
    return instance.gamma * float(np.abs(Y).sum()) + float(np.sum(Zhat * Y))


def admm_tsub(instance: RpcaInstance, U, V, Z, cfg: SolverConfig = SolverConfig(),
              stall_window=200):
    """ADMM for ``min gamma ||Y||_1 + <Zhat, Y>`` s.t. ``Y + U T V^T = M``, ``T`` PSD.

    Parameters
    ----------
    instance : RpcaInstance
    U, V : ndarray
        Orthonormal ``m x r`` and ``n x r`` leading singular factors of ``Z``.
    Z : ndarray
        Dual point; ``Zhat = -Z / ||Z||_2``.
    cfg : SolverConfig
        Uses ``admm_beta``, ``admm_tol`` and ``admm_max_iter``.
    stall_window : int
        Iterations with ``T`` frozen (dual residual below tolerance) and no
        primal-residual progress before the run is declared stalled.

    Returns
    -------
    TsubResult
        Unpacks as ``(T, Y, W)``.

    Raises
    ------
    Diverged
        When the primal residual grows a millionfold over its first value.
    """
    M, gamma = instance.M, instance.gamma
    beta = cfg.admm_beta
    r = U.shape[1]
    Zhat = -Z / full_svd(Z)[1][0]
    scale = 1.0 + float(np.linalg.norm(M))
    T = np.zeros((r, r))
    W = np.zeros_like(M)
    X = np.zeros_like(M)
    rp0 = None
    rp_anchor = math.inf
    frozen = 0
    status = "max_iter"
    rp = math.inf
    k = 0
    for k in range(1, cfg.admm_max_iter + 1):
        Y = soft_threshold(M + W / beta - X - Zhat / beta, gamma / beta)
        T_new = psd_project(sym(U.T @ (M + W / beta - Y) @ V))
        X_new = U @ T_new @ V.T
        R = Y + X_new - M
        W = W - beta * R
        rp = float(np.linalg.norm(R)) / scale
        # U, V orthonormal: ||U dT V^T||_F = ||dT||_F
        rd = beta * float(np.linalg.norm(T_new - T)) / scale
        T, X = T_new, X_new
        if not (math.isfinite(rp) and math.isfinite(rd)):
            raise Diverged("ADMM iterates became non-finite")
        if rp0 is None:
            rp0 = max(rp, cfg.admm_tol)
        elif rp > 1e6 * rp0:
            raise Diverged(f"ADMM primal residual grew from {rp0:.3e} to {rp:.3e}")
        if max(rp, rd) <= cfg.admm_tol:
            status = "converged"
            break
        if rd <= cfg.admm_tol:
            if frozen == 0:
                rp_anchor = rp
            frozen += 1
            if frozen >= stall_window:
                if rp >= 0.99 * rp_anchor:
                    status = "stalled"
                    break
                frozen = 0
        else:
            frozen = 0
    T = sym(T)
    Y = M - U @ T @ V.T
    return TsubResult(T, Y, W, k, rp, status)


def recover_primal(instance: RpcaInstance, dual: RpcaDualState, cfg: SolverConfig = SolverConfig()):
    """Primal pair ``(U T V^T, M - U T V^T)`` from a dual optimum.

    Raises
    ------
    NoNontrivialSolution
        When ``||Z||_inf / (gamma ||Z||_2)`` is off 1 by more than
        ``cfg.cond6_tol``; then no split with both parts nonzero matches
        ``Z``, and :func:`check_trivial` should be consulted.
    """
    Z = dual.Z
    U, V, r = leading_subspace(Z, cfg.tau_mult)
    z2 = float(full_svd(Z)[1][0])
    ratio = float(np.max(np.abs(Z))) / (instance.gamma * z2)
    if abs(ratio - 1.0) > cfg.cond6_tol:
        raise NoNontrivialSolution(
            f"||Z||_inf / (gamma ||Z||_2) = {ratio:.6g} is not 1 within {cfg.cond6_tol:g}")
    res = admm_tsub(instance, U, V, Z, cfg)
    X = U @ res.T @ V.T
    return RpcaPrimal(X, instance.M - X, res.T, U, V, res)


def check_trivial(Z, M, gamma, tol=1e-4):
    """Whether ``(M, 0)`` or ``(0, M)`` attains strong duality with ``Z``."""
    d = dual_objective(Z, gamma)
    M = np.asarray(M, dtype=float)
    nuc = float(np.sum(full_svd(M)[1]))
    l1 = gamma * float(np.abs(M).sum())
    return TrivialFlags(abs(nuc * d - 1.0) <= tol, abs(l1 * d - 1.0) <= tol)


def optimality_residuals(M, X, Y, Z, gamma):
    """The six scaled optimality residuals of a primal pair and dual point."""
    sX = full_svd(X)[1]
    sZ = full_svd(Z)[1]
    z2 = float(sZ[0]) if sZ.size else 0.0
    zinf = float(np.max(np.abs(Z))) if Z.size else 0.0
    y1 = float(np.abs(Y).sum())
    svn = float(sX @ sZ)
    c = np.empty(6)
    c[0] = np.linalg.norm(X + Y - M) / (1.0 + np.linalg.norm(M))
    c[1] = abs(float(np.sum(M * Z)) - 1.0)
    c[2] = abs(y1 * zinf - float(np.sum(Y * Z))) / (1.0 + y1 * zinf)
    c[3] = max(float(np.max(sX * (z2 - sZ))), 0.0) / (1.0 + float(sX[0]) * z2)
    c[4] = abs(float(np.sum(X * Z)) - svn) / (1.0 + svn)
    c[5] = abs(z2 - zinf / gamma) / (1.0 + z2)
    return c


def check_optimality(instance: RpcaInstance, X, Y, Z, tol=1e-4, duality_tol=1e-3):
    """Certify ``(X, Y)`` and ``Z`` by the six optimality residuals and the duality product.

    Condition 6 is reported but does not count when either part is zero or
    a trivial split is optimal; it is not necessary in those cases.
    """
    M, gamma = instance.M, instance.gamma
    X = _finite(X, "X")
    Y = _finite(Y, "Y")
    Z = _finite(Z, "Z")
    if not (X.shape == Y.shape == Z.shape == M.shape):
        raise InvalidInput("X, Y, Z must all have the shape of M")
    c = optimality_residuals(M, X, Y, Z, gamma)
    flags = check_trivial(Z, M, gamma, duality_tol)
    mscale = ZERO_PART * max(1.0, float(np.max(np.abs(M))))
    zero_part = not np.any(np.abs(X) > mscale) or not np.any(np.abs(Y) > mscale)
    duality = duality_certificate(rpca_gauge(X, Y, gamma), dual_objective(Z, gamma), duality_tol)
    return RpcaCertificate(c, duality, flags, tol, zero_part or flags.any)


@dataclass
class RpcaSolution:
    instance: RpcaInstance
    dual: RpcaDualState
    X: np.ndarray
    Y: np.ndarray
    primal: Optional[RpcaPrimal]
    certificate: RpcaCertificate
    trivial: Optional[str]
    timings: dict


def _merge(prev, dual):
    if prev is None:
        return dual
    dual.iterations += prev.iterations
    dual.evaluations += prev.evaluations
    dual.history = prev.history + dual.history
    dual.kernel_warning |= prev.kernel_warning
    return dual


def solve(instance: RpcaInstance, cfg: SolverConfig = SolverConfig()):
    """Dual solve, recovery and certification in one call.

    A trivial split ``(M, 0)`` or ``(0, M)`` is returned when the dual
    point already certifies it; otherwise the subspace recovery runs.  A
    failing certificate sends the dual back to work from its best point, up
    to ``cfg.refine_rounds`` times; the last attempt is returned either way.
    """
    timings = {"dual": 0.0, "recovery": 0.0, "certificate": 0.0}
    M = np.array(instance.M)
    dual = None
    for attempt in range(cfg.refine_rounds + 1):
        t0 = time.perf_counter()
        dual = _merge(dual, solve_dual(instance, cfg, None if dual is None else dual.Z))
        timings["dual"] += time.perf_counter() - t0
        t0 = time.perf_counter()
        flags = check_trivial(dual.Z, M, instance.gamma, cfg.duality_tol)
        primal = None
        trivial = None
        if flags.any:
            trivial = "M_zero" if flags.M_zero_opt else "zero_M"
            X, Y = (M, np.zeros_like(M)) if flags.M_zero_opt else (np.zeros_like(M), M)
        else:
            try:
                primal = recover_primal(instance, dual, cfg)
            except NoNontrivialSolution:
                timings["recovery"] += time.perf_counter() - t0
                if attempt == cfg.refine_rounds:
                    raise
                continue
            X, Y = primal.X, primal.Y
        timings["recovery"] += time.perf_counter() - t0
        t0 = time.perf_counter()
        cert = check_optimality(instance, X, Y, dual.Z, cfg.cert_tol, cfg.duality_tol)
        timings["certificate"] += time.perf_counter() - t0
        if cert.passed:
            break
    timings["rounds"] = attempt + 1
    return RpcaSolution(instance, dual, X, Y, primal, cert, trivial, timings)
