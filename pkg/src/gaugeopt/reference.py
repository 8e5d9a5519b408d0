"""Independent reference solvers and planted-instance generators.

Nothing here goes through a gauge dual.  The RPCA reference is the classical
two-block ADMM with singular-value shrinkage and the SDP reference a
splitting method between the affine constraints and the PSD cone, both on
dense decompositions.  Each returns a Lagrange lower bound next to its
objective so that its own accuracy is certified and not assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NoConvergence
from .gauge import nuclear_norm
from .linalg import _finite, full_svd, psd_project, sym
from .rpca import RpcaInstance, soft_threshold
from .sdp import SdpInstance, apply_A, apply_At


@dataclass(frozen=True)
class PlantedRpca:
    instance: RpcaInstance
    L_true: np.ndarray
    S_true: np.ndarray
    seed: int


@dataclass(frozen=True)
class PlantedSdp:
    instance: SdpInstance
    X_strict: np.ndarray
    seed: int


@dataclass
class RpcaReference:
    """ADMM output; unpacks as ``(X, Y, p_star)``."""

    X: np.ndarray
    Y: np.ndarray
    p_star: float
    lower_bound: float
    iterations: int

    def __iter__(self):
        return iter((self.X, self.Y, self.p_star))


@dataclass
class SdpReference:
    """Splitting-method output; unpacks as ``(X, p_star)``.

    ``y`` is the Lagrange multiplier scaled to dual feasibility, so that
    ``lower_bound = b^T y`` and ``C - A^T y`` is PSD.
    """

    X: np.ndarray
    p_star: float
    lower_bound: float
    iterations: int
    y: np.ndarray = None

    def __iter__(self):
        return iter((self.X, self.p_star))


def _svt(X, t):
    U, s, V = full_svd(X)
    return (U * np.maximum(s - t, 0.0)) @ V.T


def _rpca_lower_bound(M, L, gamma):
    # any L gives <M, L> / max(||L||_2, ||L||_inf / gamma) <= p*
    scale = max(float(full_svd(L)[1][0]), float(np.abs(L).max()) / gamma)
    return float(np.sum(M * L)) / scale if scale > 0 else 0.0


def rpca_reference_admm(instance: RpcaInstance, tol=1e-8, max_iter=200000):
    """Solve ``min ||X||_* + gamma ||Y||_1 s.t. X + Y = M`` by two-block ADMM.

    The penalty is rebalanced between primal and dual residuals every few
    iterations.  Stops once the primal residual and the relative gap to the
    Lagrange bound of the multiplier are both below ``tol``.  The returned
    ``Y`` is ``M - X`` exactly.

    Raises
    ------
    NoConvergence
        After ``max_iter`` iterations, with the last iterate as ``best``.
    """
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    M, g = instance.M, instance.gamma
    nM = float(np.linalg.norm(M))
    X = np.zeros_like(M)
    Y = np.zeros_like(M)
    L = np.zeros_like(M)
    beta = 0.25 / float(np.abs(M).mean())
    p = lb = np.inf
    for k in range(1, max_iter + 1):
        X = _svt(M - Y + L / beta, 1.0 / beta)
        Y_old = Y
        Y = soft_threshold(M - X + L / beta, g / beta)
        R = M - X - Y
        L = L + beta * R
        rp = float(np.linalg.norm(R)) / (1.0 + nM)
        rd = beta * float(np.linalg.norm(Y - Y_old)) / (1.0 + nM)
        if k % 10 == 0:
            if rp > 10.0 * rd:
                beta *= 2.0
            elif rd > 10.0 * rp:
                beta /= 2.0
        if max(rp, rd) <= tol:
            p = nuclear_norm(X) + g * float(np.abs(M - X).sum())
            lb = _rpca_lower_bound(M, L, g)
            if p - lb <= tol * (1.0 + abs(p)):
                return RpcaReference(X, M - X, p, lb, k)
    raise NoConvergence(f"rpca_reference_admm: gap {p - lb:.2e} after {max_iter} iterations",
                        best=RpcaReference(X, M - X, p, lb, max_iter))


def _dual_feasible(instance, y):
    # y is Lagrange-feasible once C - A^T y is PSD; shrink it toward 0 until it is
    C = instance.C
    lc = float(np.linalg.eigvalsh(C)[0])
    ls = float(np.linalg.eigvalsh(sym(C - apply_At(instance, y)))[0])
    if ls >= 0:
        t = 1.0
    elif lc > 0:
        t = lc / (lc - ls)
    else:
        t = 0.0
    return t * y


def sdp_reference(instance: SdpInstance, tol=1e-8, max_iter=200000):
    """Solve ``min <C, X> s.t. A X = b, X PSD`` by ADMM on ``X = W``.

    The ``X`` step is an exact projection onto the affine set, the ``W``
    step a PSD projection.  The multiplier of the affine step yields a
    Lagrange-feasible ``y`` (after a shrink toward the origin, valid since
    ``C`` is positive definite), whose ``b^T y`` certifies the objective.
    The returned ``X`` is the PSD iterate.

    Raises
    ------
    NoConvergence
        After ``max_iter`` iterations, with the last iterate as ``best``.
    """
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    n, m = instance.n, instance.m
    C, b = instance.C, instance.b
    Am = instance.A.reshape(m, n * n)
    G = Am @ Am.T
    g = np.linalg.eigvalsh(G)
    if g[0] <= 1e-12 * g[-1]:
        raise InvalidInput("constraint matrices are linearly dependent")
    Gc = np.linalg.cholesky(G)

    def gsolve(r):
        return np.linalg.solve(Gc.T, np.linalg.solve(Gc, r))

    nb = float(np.linalg.norm(b))
    rho = 1.0
    W = np.zeros((n, n))
    L = np.zeros((n, n))
    p = lb = np.inf
    for k in range(1, max_iter + 1):
        v = (W - (C + L) / rho).ravel()
        z = gsolve(Am @ v - b)
        X = (v - Am.T @ z).reshape(n, n)
        W_old = W
        W = psd_project(sym(X + L / rho))
        L = L + rho * (X - W)
        rp = float(np.linalg.norm(X - W)) / (1.0 + nb)
        rd = rho * float(np.linalg.norm(W - W_old)) / (1.0 + nb)
        if k % 10 == 0:
            if rp > 10.0 * rd:
                rho *= 2.0
            elif rd > 10.0 * rp:
                rho /= 2.0
        if max(rp, rd) <= tol:
            # X-step stationarity: C + L + rho (X - W_old) = A^T y with y = -rho z
            y = -rho * z
            feas = float(np.linalg.norm(apply_A(instance, W) - b)) / (1.0 + nb)
            p = float(np.sum(C * W))
            y_feas = _dual_feasible(instance, y)
            lb = float(b @ y_feas)
            if feas <= tol and p - lb <= tol * (1.0 + abs(p)):
                return SdpReference(W, p, lb, k, y_feas)
    raise NoConvergence(f"sdp_reference: gap {p - lb:.2e} after {max_iter} iterations",
                        best=SdpReference(W, p, lb, max_iter, y))


def gen_rpca(m, n, rank, density, magnitude=1.0, seed=0, gamma=None):
    """Planted low-rank plus sparse matrix ``M = L_true + S_true``.

    ``L_true = A B^T`` with Gaussian factors, scaled to unit Frobenius norm;
    ``S_true`` has ``round(density m n)`` entries of value ``+-magnitude`` on
    a uniformly random support.  ``gamma`` defaults to ``1 / sqrt(max(m, n))``.
    """
    m, n, rank = int(m), int(n), int(rank)
    if m < 1 or n < 1:
        raise InvalidInput("dimensions must be positive")
    if not 1 <= rank <= min(m, n):
        raise InvalidInput(f"rank must lie in [1, {min(m, n)}]")
    if not 0 < density < 0.5:
        raise InvalidInput("density must lie in (0, 0.5)")
    if not magnitude > 0:
        raise InvalidInput("magnitude must be positive")
    if gamma is None:
        gamma = 1.0 / np.sqrt(max(m, n))
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, rank))
    B = rng.standard_normal((n, rank))
    L = A @ B.T
    L /= np.linalg.norm(L)
    k = int(round(density * m * n))
    S = np.zeros(m * n)
    idx = rng.choice(m * n, k, replace=False)
    S[idx] = magnitude * rng.choice([-1.0, 1.0], k)
    S = S.reshape(m, n)
    return PlantedRpca(RpcaInstance(L + S, float(gamma)), L, S, seed)


def gen_sdp(n, m, seed=0):
    """Random SDP with ``C`` positive definite and a planted Slater point.

    ``X_strict = Q diag(lam) Q^T`` with ``lam`` in ``[0.1, 1.1)`` and
    ``b = A X_strict``; ``C = C0 C0^T + 0.1 I``.
    """
    n, m = int(n), int(m)
    if n < 1 or m < 1:
        raise InvalidInput("n and m must be positive")
    if m > n * (n + 1) // 2:
        raise InvalidInput(f"m = {m} exceeds n(n+1)/2 = {n * (n + 1) // 2}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n, n))
    A = 0.5 * (A + A.transpose(0, 2, 1))
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = 0.1 + rng.random(n)
    X = sym((Q * lam) @ Q.T)
    b = np.einsum("kij,ij->k", A, X)
    C0 = rng.standard_normal((n, n))
    C = sym(C0 @ C0.T) + 0.1 * np.eye(n)
    return PlantedSdp(SdpInstance(C, b, A), X, seed)


@dataclass(frozen=True)
class VonNeumann:
    """Trace-inequality check; unpacks as ``(lhs, rhs, ok)``."""

    lhs: float
    rhs: float
    ok: bool
    equality: bool

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.ok))


def von_neumann_check(X, Y, tol=1e-10):
    """``<X, Y> <= <sigma(X), sigma(Y)>``, with equality flagged within ``tol``."""
    X = _finite(X, "X")
    Y = _finite(Y, "Y")
    if X.shape != Y.shape:
        raise InvalidInput(f"X and Y shapes differ: {X.shape} vs {Y.shape}")
    lhs = float(np.sum(X * Y))
    rhs = float(full_svd(X)[1] @ full_svd(Y)[1])
    return VonNeumann(lhs, rhs, lhs <= rhs + tol, abs(lhs - rhs) <= tol)
