"""Standard-form SDP through its gauge dual.

With a PSD cost ``C`` the problem ``min <C, X> s.t. A X = b, X PSD`` is a
gauge optimization problem whose dual minimizes

    mu_y = inf{mu >= 0 : mu C - A^T y is PSD}  subject to  b^T y >= 1.

``mu_y`` is an extreme eigenvalue of the pencil ``(A^T y, C)`` and its
eigenvector gives a rank-one attaining matrix, hence a subgradient.  A dual
optimum confines the primal solution to the null space of
``mu C - A^T y``, where only a small semidefinite least-squares problem
remains.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .config import SolverConfig
from .errors import (DegeneratePolar, EmptyNullSpace, EssentiallyInfeasibleRegion, InvalidInput,
                     InvalidShift, PencilUnbounded)
from .gauge import (DualityCertificate, GaugeValue, Verdict, duality_certificate, sdp_gauge,
                    sdp_polar)
from .linalg import (Pencil, _finite, check_symmetric, null_space_basis, psd_project, sym,
                     top_singular_triplet)
from .subgradient import minimize_on_halfspace
from .subgradient import project_halfspace as _project_halfspace


@dataclass(frozen=True)
class SdpInstance:
    """Cost ``C``, right-hand side ``b`` and constraint matrices ``A[0..m-1]``.

    ``offset`` accumulates ``b^T y_hat`` from :func:`normalize_C` so that
    ``<C, X> + offset`` is the objective in the original coordinates.
    """

    C: np.ndarray
    b: np.ndarray
    A: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        C = check_symmetric(self.C, "C")
        b = np.array(_finite(self.b, "b"), dtype=float).ravel()
        A = [check_symmetric(Ai, f"A{i + 1}") for i, Ai in enumerate(self.A)]
        if len(A) != b.size:
            raise InvalidInput(f"{len(A)} constraint matrices but b has length {b.size}")
        if b.size == 0 or not np.any(b):
            raise InvalidInput("b must be nonzero")
        n = C.shape[0]
        for i, Ai in enumerate(A):
            if Ai.shape != (n, n):
                raise InvalidInput(f"A{i + 1} has shape {Ai.shape}, expected {(n, n)}")
        stack = np.array([sym(Ai) for Ai in A]).reshape(b.size, n, n)
        C = sym(C)
        for arr in (C, b, stack):
            arr.flags.writeable = False
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", stack)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self):
        return self.C.shape[0]

    @property
    def m(self):
        return self.b.size


@dataclass
class SdpDualState:
    y: np.ndarray
    mu: float
    Z_y: Optional[np.ndarray]
    iterations: int
    history: List[float] = field(default_factory=list)
    converged: bool = False
    message: str = ""
    evaluations: int = 0


@dataclass
class SdlsResult:
    T: np.ndarray
    residual: float
    pg_residual: float
    iterations: int
    converged: bool


@dataclass
class SdpPrimal:
    X: np.ndarray
    T: np.ndarray
    U2: np.ndarray
    residual: float
    sdls: Optional[SdlsResult] = None

    @property
    def rank(self):
        return self.U2.shape[1]


@dataclass
class SdpCertificate:
    feas_primal: float
    feas_psd: float
    feas_dual: float
    complementarity: float
    duality: DualityCertificate
    tol: float

    @property
    def residuals(self):
        return {"feas_primal": self.feas_primal, "feas_psd": self.feas_psd,
                "feas_dual": self.feas_dual, "complementarity": self.complementarity}

    @property
    def residuals_pass(self):
        return all(v <= self.tol for v in self.residuals.values())

    @property
    def passed(self):
        return self.residuals_pass and self.duality.verdict is Verdict.STRONG

    def to_json(self):
        return {"residuals": {k: float(v) for k, v in self.residuals.items()}, "tol": self.tol,
                "duality": self.duality.to_json(), "passed": self.passed}

    @classmethod
    def from_json(cls, d):
        r = d["residuals"]
        return cls(r["feas_primal"], r["feas_psd"], r["feas_dual"], r["complementarity"],
                   DualityCertificate.from_json(d["duality"]), d["tol"])


def apply_A(instance: SdpInstance, X):
    """``(A X)_i = <A_i, X>``."""
    X = _finite(X, "X")
    if X.shape != (instance.n, instance.n):
        raise InvalidInput(f"X has shape {X.shape}, expected {(instance.n, instance.n)}")
    return np.einsum("kij,ij->k", instance.A, X)


def apply_At(instance: SdpInstance, y):
    """``A^T y = sum_i y_i A_i``."""
    y = _finite(y, "y").ravel()
    if y.size != instance.m:
        raise InvalidInput(f"y has length {y.size}, expected {instance.m}")
    return np.einsum("k,kij->ij", y, instance.A)


def normalize_C(instance: SdpInstance, y_hat):
    """Shift the cost to ``C - A^T y_hat``, which must be PSD.

    On ``A X = b`` the objective changes by the constant ``b^T y_hat``,
    recorded in ``offset``.
    """
    y_hat = _finite(y_hat, "y_hat").ravel()
    C_new = sym(instance.C - apply_At(instance, y_hat))
    lam = np.linalg.eigvalsh(C_new)
    if lam[0] < -1e-10 * max(1.0, float(lam[-1])):
        raise InvalidShift(f"C - A^T y_hat has eigenvalue {lam[0]:.3e} < 0")
    return SdpInstance(C_new, instance.b, instance.A,
                       instance.offset + float(instance.b @ y_hat))


def _polar(instance, pencil, y):
    """``(mu, q)`` for the pencil ``(A^T y, C)``; ``q`` is None when ``mu`` is 0 or infinite."""
    Z = sym(apply_At(instance, y))
    if np.linalg.eigvalsh(Z)[-1] <= 0.0:
        return 0.0, None
    try:
        mu, q = pencil.max_eig(Z)
    except PencilUnbounded:
        return math.inf, None
    if q is None or mu <= 0.0:
        return 0.0, None
    return float(mu), q


def dual_objective(instance: SdpInstance, y, pencil=None):
    """``mu_y`` as a :class:`GaugeValue`; an infinite value marks ``y`` essentially infeasible."""
    return sdp_polar(apply_At(instance, y), instance.C, pencil)


def _attaining(instance, q, tau_null):
    cq = float(q @ instance.C @ q)
    if cq <= tau_null:
        raise DegeneratePolar("the attaining direction lies in the null space of C")
    return np.outer(q, q) / cq


def attaining_matrix(instance: SdpInstance, y, tau_null=1e-6, pencil=None):
    """Rank-one PSD ``Z_y`` with ``<C, Z_y> = 1`` and ``<A^T y, Z_y> = mu_y``.

    Requires ``0 < mu_y < inf``.
    """
    pencil = pencil or Pencil(instance.C)
    mu, q = _polar(instance, pencil, y)
    if math.isinf(mu):
        raise EssentiallyInfeasibleRegion("mu_y is infinite: y is essentially infeasible")
    if q is None:
        raise InvalidInput("attaining matrix needs mu_y > 0")
    return _attaining(instance, q, tau_null)


def dual_subgradient(instance: SdpInstance, y, tau_null=1e-6, pencil=None):
    """``A Z_y``, or the zero vector when ``A^T y`` is negative semidefinite."""
    pencil = pencil or Pencil(instance.C)
    mu, q = _polar(instance, pencil, y)
    if math.isinf(mu):
        raise EssentiallyInfeasibleRegion("mu_y is infinite: y is essentially infeasible")
    if q is None:
        return np.zeros(instance.m)
    return apply_A(instance, _attaining(instance, q, tau_null))


def project_halfspace(y, b):
    """Euclidean projection onto ``{y : b^T y >= 1}``."""
    return _project_halfspace(y, b)


def solve_dual(instance: SdpInstance, cfg: SolverConfig = SolverConfig(), backend="dense",
               y0=None):
    """Minimize ``mu_y`` over ``b^T y >= 1`` from ``y0`` (default ``b / ||b||^2``).

    Raises
    ------
    EssentiallyInfeasibleRegion
        When ``mu_y`` is infinite at the start point.
    """
    pencil = Pencil(instance.C, backend=backend)
    b = instance.b

    def oracle(y):
        mu, q = _polar(instance, pencil, y)
        if math.isinf(mu):
            return mu, None
        if q is None:
            return 0.0, np.zeros(instance.m)
        return mu, apply_A(instance, _attaining(instance, q, cfg.tau_null))

    if y0 is None:
        y0 = b / float(b @ b)
    else:
        y0 = project_halfspace(_finite(y0, "y0").ravel(), b)
    try:
        res = minimize_on_halfspace(oracle, b, y0, cfg)
    except EssentiallyInfeasibleRegion as exc:
        raise EssentiallyInfeasibleRegion(
            f"{exc}; C may be singular with A^T y0 positive on its null space") from None
    y = project_halfspace(res.x, b)
    mu, q = _polar(instance, pencil, y)
    Z_y = _attaining(instance, q, cfg.tau_null) if q is not None else None
    return SdpDualState(y, mu, Z_y, res.iterations, res.history, res.converged, res.message,
                        res.evaluations)


def _reduced_operator(instance, U2):
    r = U2.shape[1]
    Ar = np.einsum("ia,kij,jb->kab", U2, instance.A, U2)
    return Ar.reshape(instance.m, r * r)


def sdls_solve(instance: SdpInstance, U2, cfg: SolverConfig = SolverConfig()):
    """Projected gradient for ``min_{T PSD} 1/2 ||A(U2 T U2^T) - b||^2``.

    The step is ``1 / L`` with ``L`` the squared top singular value of the
    reduced operator (Lanczos, padded by its residual).  Starts from the
    PSD projection of the unconstrained least-squares solution.  Stops when
    ``L ||T+ - T||_F <= sdls_tol (1 + ||b||)``.
    """
    U2 = np.asarray(U2, dtype=float)
    r = U2.shape[1]
    if r == 0:
        raise EmptyNullSpace("the recovery basis is empty")
    b = instance.b
    Ar = _reduced_operator(instance, U2)
    trip = top_singular_triplet(lambda v: Ar @ v, lambda u: Ar.T @ u, Ar.shape, tol=1e-12,
                                seed=cfg.seed)
    L = (trip.sigma + trip.residual) ** 2 * (1.0 + 1e-10)
    if L == 0.0:
        T = np.zeros((r, r))
        return SdlsResult(T, float(np.linalg.norm(b)), 0.0, 0, True)
    t0 = np.linalg.lstsq(Ar, b, rcond=None)[0]
    T = psd_project(sym(t0.reshape(r, r)))
    scale = 1.0 + float(np.linalg.norm(b))
    pg = math.inf
    converged = False
    k = 0
    for k in range(1, cfg.sdls_max_iter + 1):
        grad = (Ar.T @ (Ar @ T.ravel() - b)).reshape(r, r)
        T_new = psd_project(sym(T - grad / L))
        pg = L * float(np.linalg.norm(T_new - T)) / scale
        T = T_new
        if pg <= cfg.sdls_tol:
            converged = True
            break
    res = float(np.linalg.norm(Ar @ T.ravel() - b))
    return SdlsResult(T, res, pg, k, converged)


def recover_primal(instance: SdpInstance, dual: SdpDualState, cfg: SolverConfig = SolverConfig()):
    """``X = U2 T U2^T`` with ``U2`` spanning the null space of ``mu C - A^T y``.

    Raises
    ------
    EmptyNullSpace
        When no eigenvalue of ``mu C - A^T y`` falls below the ``tau_null``
        band; tighten the dual solve or raise ``tau_null``.
    """
    mu = dual.mu
    if not (math.isfinite(mu) and mu > 0):
        raise InvalidInput(f"recovery needs a finite positive mu_y, got {mu}")
    S = sym(mu * instance.C - apply_At(instance, dual.y))
    U2 = null_space_basis(S, cfg.tau_null)
    if U2.shape[1] == 0:
        raise EmptyNullSpace(
            f"mu C - A^T y has no eigenvalue below tau_null = {cfg.tau_null:g} (relative)")
    res = sdls_solve(instance, U2, cfg)
    X = sym(U2 @ res.T @ U2.T)
    return SdpPrimal(X, res.T, U2, res.residual, res)


def check_optimality(instance: SdpInstance, X, y, tol=1e-4, duality_tol=1e-3):
    """Primal feasibility, PSD, dual feasibility and complementarity residuals, plus the duality product."""
    X = check_symmetric(X, "X")
    y = _finite(y, "y").ravel()
    b = instance.b
    mu_g = dual_objective(instance, y)
    lam = np.linalg.eigvalsh(sym(X))
    feas_primal = float(np.linalg.norm(apply_A(instance, X) - b)) / (1.0 + float(np.linalg.norm(b)))
    feas_psd = max(0.0, -float(lam[0])) / (1.0 + max(float(lam[-1]), 0.0))
    feas_dual = abs(float(b @ y) - 1.0)
    if mu_g.infinite:
        comp = math.inf
    else:
        mu = mu_g.value
        S = mu * instance.C - apply_At(instance, y)
        comp = abs(float(np.sum(S * X))) / (1.0 + mu * float(np.linalg.norm(X)))
    duality = duality_certificate(sdp_gauge(X, instance.C), mu_g, duality_tol)
    return SdpCertificate(feas_primal, feas_psd, feas_dual, comp, duality, tol)


def simdiag_check(A, B, tol=1e-8):
    """Orthogonal PSD matrices commute: ``<A, B> ~ 0`` must imply ``||AB||_F ~ 0``.

    Returns True when the implication holds (vacuously when ``<A, B>`` is
    not small).
    """
    A = check_symmetric(A, "A")
    B = check_symmetric(B, "B")
    for name, S in (("A", A), ("B", B)):
        if np.linalg.eigvalsh(sym(S))[0] < -tol:
            raise InvalidInput(f"{name} is not positive semidefinite")
    scale = 1.0 + float(np.linalg.norm(A)) * float(np.linalg.norm(B))
    if float(np.sum(A * B)) > tol * scale:
        return True
    return float(np.linalg.norm(A @ B)) <= math.sqrt(tol) * scale


@dataclass
class SdpSolution:
    instance: SdpInstance
    dual: SdpDualState
    primal: SdpPrimal
    certificate: SdpCertificate
    timings: dict

    @property
    def objective(self):
        """``<C, X>`` in the original (unshifted) coordinates."""
        return float(np.sum(self.instance.C * self.primal.X)) + self.instance.offset


def _merge(prev, dual):
    if prev is None:
        return dual
    dual.iterations += prev.iterations
    dual.evaluations += prev.evaluations
    dual.history = prev.history + dual.history
    return dual


def solve(instance: SdpInstance, cfg: SolverConfig = SolverConfig(), backend="dense"):
    """Dual solve, null-space recovery and certification in one call.

    A failing certificate sends the dual back to work from its best point,
    up to ``cfg.refine_rounds`` times; the last attempt is returned either way.
    """
    timings = {"dual": 0.0, "recovery": 0.0, "certificate": 0.0}
    dual = None
    for attempt in range(cfg.refine_rounds + 1):
        t0 = time.perf_counter()
        dual = _merge(dual, solve_dual(instance, cfg, backend, None if dual is None else dual.y))
        timings["dual"] += time.perf_counter() - t0
        t0 = time.perf_counter()
        try:
            primal = recover_primal(instance, dual, cfg)
        except EmptyNullSpace:
            timings["recovery"] += time.perf_counter() - t0
            if attempt == cfg.refine_rounds:
                raise
            continue
        timings["recovery"] += time.perf_counter() - t0
        t0 = time.perf_counter()
        cert = check_optimality(instance, primal.X, dual.y, cfg.cert_tol, cfg.duality_tol)
        timings["certificate"] += time.perf_counter() - t0
        if cert.passed:
            break
    timings["rounds"] = attempt + 1
    return SdpSolution(instance, dual, primal, cert, timings)
