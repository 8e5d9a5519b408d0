"""Dense and matrix-free spectral kernels.

The dense routines (``full_svd``, ``sym_eig``) are thin wrappers over LAPACK
and serve as oracles and for small recovery subproblems.  The iterative
routines (``top_singular_triplet``, ``top_eigpair``) only touch the matrix
through products and are what the dual solvers call once per iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, svds

from .errors import InvalidInput, NoConvergence, PencilUnbounded

Operator = Callable[[np.ndarray], np.ndarray]

# relative tolerance for the symmetry guard on SymMatrix arguments
SYM_TOL = 1e-12


@dataclass(frozen=True)
class SvdTriplet:
    sigma: float
    u: np.ndarray
    v: np.ndarray
    iterations: int = 0
    residual: float = 0.0


@dataclass(frozen=True)
class EigPair:
    lam: float
    q: np.ndarray
    iterations: int = 0
    residual: float = 0.0


def _finite(A, name="matrix"):
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} has non-finite entries")
    return A


def check_symmetric(S, name="matrix", tol=SYM_TOL):
    """Return ``S`` as a float array, raising InvalidInput if it is not symmetric."""
    S = _finite(S, name)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {S.shape}")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if S.size and np.max(np.abs(S - S.T)) > tol * scale:
        raise InvalidInput(f"{name} is not symmetric")
    return S


def sym(A):
    return 0.5 * (A + A.T)


def full_svd(A):
    """Thin SVD ``A = U diag(sigma) V^T`` with sigma nonincreasing."""
    A = _finite(A)
    if A.ndim != 2:
        raise InvalidInput("full_svd expects a 2-D array")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return U, s, Vt.T


def sym_eig(S):
    """Eigendecomposition of a symmetric matrix, eigenvalues nonincreasing."""
    S = check_symmetric(S)
    lam, Q = np.linalg.eigh(sym(S))
    # eigh is ascending; a stable reversal keeps ties in a fixed order
    order = np.argsort(-lam, kind="stable")
    return Q[:, order], lam[order]


def psd_project(S):
    """Euclidean projection onto the PSD cone (eigenvalue clamping)."""
    Q, lam = sym_eig(S)
    P = (Q * np.maximum(lam, 0.0)) @ Q.T
    return sym(P)


def null_space_basis(S, tau_null=1e-6):
    """Orthonormal eigenvectors of ``S`` whose eigenvalues are <= tau_null * max(1, lambda_max).

    An empty ``n x 0`` array is a valid answer.
    """
    if tau_null <= 0:
        raise InvalidInput("tau_null must be positive")
    Q, lam = sym_eig(S)
    thresh = tau_null * max(1.0, float(lam[0])) if lam.size else 0.0
    keep = lam <= thresh
    # ascending eigenvalue order inside the basis: most-null vector first
    idx = np.nonzero(keep)[0][::-1]
    return Q[:, idx]


def _orth_against(w, basis, count):
    # two passes of classical Gram-Schmidt ("twice is enough")
    if count:
        B = basis[:, :count]
        w = w - B @ (B.T @ w)
        w = w - B @ (B.T @ w)
    return w


def _start_vector(n, v0, seed):
    if v0 is not None:
        v = np.array(v0, dtype=float).ravel()
        nv = np.linalg.norm(v)
        if v.size == n and nv > 0 and np.isfinite(nv):
            return v / nv
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def top_singular_triplet(apply: Operator, apply_t: Operator, dims, tol=1e-10,
                         max_iter=None, v0=None, seed=0, method="arpack", max_krylov=64):
    """Largest singular triplet of an implicit matrix.

    Parameters
    ----------
    apply, apply_t : callable
        ``v -> A v`` and ``u -> A^T u``.
    dims : (int, int)
        Shape ``(m, n)`` of the implicit matrix.
    tol : float
        Target for ``||A v - sigma u||`` and ``||A^T u - sigma v||``
        relative to ``max(1, sigma)``.
    max_iter : int, optional
        Iteration cap; defaults to ``20 * min(m, n) + 20``.
    v0 : array, optional
        Warm-start right vector; a seeded random vector otherwise.
    method : {"arpack", "gkl"}
        ``"arpack"`` runs implicitly restarted Lanczos (ARPACK through
        ``scipy.sparse.linalg.svds``) on the smaller Gram operator;
        ``"gkl"`` is the in-house Golub-Kahan-Lanczos bidiagonalization
        with full reorthogonalization, also used when ARPACK cannot run
        (a dimension below 2), fails to converge or breaks down.
    max_krylov : int
        Krylov dimension of the ``"gkl"`` path before an explicit restart.

    Raises
    ------
    NoConvergence
        With the best triplet found attached as ``best``.
    """
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    if method not in ("arpack", "gkl"):
        raise InvalidInput(f"unknown singular-value method {method!r}")
    m, n = int(dims[0]), int(dims[1])
    if method == "arpack" and min(m, n) >= 2:
        trip = _arpack_triplet(apply, apply_t, m, n, tol, max_iter, v0, seed)
        if trip is not None:
            return trip
    return _gkl_triplet(apply, apply_t, (m, n), tol, max_iter, v0, seed, max_krylov)


def _arpack_triplet(apply, apply_t, m, n, tol, max_iter, v0, seed):
    op = LinearOperator((m, n), matvec=apply, rmatvec=apply_t, dtype=float)
    # svds iterates on the smaller Gram matrix; its start vector lives on that side.
    # Supplying it always keeps svds off its own (costly, per-call) generator setup.
    v = _start_vector(n, v0, seed)
    start = v if n <= m else np.asarray(apply(v), dtype=float).ravel()
    if not np.any(start):
        start = _start_vector(min(m, n), None, seed)
    try:
        U, s, Vt = svds(op, k=1, tol=tol, v0=start, maxiter=max_iter, solver="arpack")
    except (ArpackNoConvergence, ArpackError):
        # ArpackError covers an operator that maps the start vector to zero
        return None
    sigma = float(s[0])
    u, v = U[:, 0].copy(), Vt[0].copy()
    if sigma == 0.0:
        return SvdTriplet(0.0, _unit(u, m), _unit(v, n), 0, 0.0)
    u, v = _unit(u, m), _unit(v, n)
    res = max(float(np.linalg.norm(apply(v) - sigma * u)),
              float(np.linalg.norm(apply_t(u) - sigma * v)))
    if res > tol * max(1.0, sigma):
        return None
    return SvdTriplet(sigma, u, v, 0, res)


def _unit(x, size):
    nx = np.linalg.norm(x)
    if nx > 0 and np.isfinite(nx):
        return x / nx
    e = np.zeros(size)
    e[0] = 1.0
    return e


def _gkl_triplet(apply, apply_t, dims, tol, max_iter, v0, seed, max_krylov):
    m, n = int(dims[0]), int(dims[1])
    kdim = min(m, n)
    if kdim == 0:
        return SvdTriplet(0.0, np.zeros(m), np.zeros(n))
    if max_iter is None:
        max_iter = 20 * kdim + 20
    # one extra step lets a wide matrix exhaust its row space
    kcap = max(1, min(max_krylov, kdim + 1, n))
    v = _start_vector(n, v0, seed)
    steps = 0
    best = None
    while True:
        V = np.zeros((n, kcap + 1))
        U = np.zeros((m, kcap))
        alpha = np.zeros(kcap)
        beta = np.zeros(kcap)
        V[:, 0] = v
        k = 0
        converged = False
        for j in range(kcap):
            w = apply(V[:, j])
            if j:
                w = w - beta[j - 1] * U[:, j - 1]
            w = _orth_against(w, U, j)
            a = np.linalg.norm(w)
            steps += 1
            k = j + 1
            scale = max(1.0, float(np.max(alpha[:j], initial=0.0)), float(np.max(beta[:j], initial=0.0)))
            if a <= 1e-14 * scale:
                alpha[j] = 0.0
                converged = True  # invariant subspace
                break
            alpha[j] = a
            U[:, j] = w / a
            z = apply_t(U[:, j]) - a * V[:, j]
            z = _orth_against(z, V, j + 1)
            b = np.linalg.norm(z)
            beta[j] = b
            if b <= 1e-14 * max(scale, a):
                beta[j] = 0.0
                converged = True
                break
            V[:, j + 1] = z / b
            Bk = np.diag(alpha[:k]) + np.diag(beta[:k - 1], 1)
            P, s, Qt = np.linalg.svd(Bk)
            res = beta[j] * abs(P[k - 1, 0])
            if res <= tol * max(1.0, s[0]):
                converged = True
                break
            if steps >= max_iter:
                break
        Bk = np.diag(alpha[:k]) + np.diag(beta[:k - 1], 1)
        P, s, Qt = np.linalg.svd(Bk)
        sigma = float(s[0])
        u = U[:, :k] @ P[:, 0]
        vv = V[:, :k] @ Qt[0]
        res = float(beta[k - 1] * abs(P[k - 1, 0]))
        nu = np.linalg.norm(u)
        if nu > 0:
            u = u / nu
        else:
            u = np.zeros(m)
            u[0] = 1.0
        vv = vv / np.linalg.norm(vv)
        if sigma == 0.0:
            res = 0.0
        cand = SvdTriplet(sigma, u, vv, steps, res)
        if best is None or cand.sigma >= best.sigma:
            best = cand
        if converged:
            # recompute the residual pair explicitly on exit
            r1 = np.linalg.norm(apply(vv) - sigma * u)
            r2 = np.linalg.norm(apply_t(u) - sigma * vv)
            return SvdTriplet(sigma, u, vv, steps, float(max(r1, r2)))
        if steps >= max_iter:
            raise NoConvergence(
                f"top_singular_triplet: no convergence after {steps} steps", best=best)
        v = vv


def top_eigpair(apply: Operator, n, tol=1e-10, max_iter=None, v0=None, seed=0, max_krylov=64):
    """Largest algebraic eigenpair of a symmetric operator by Lanczos with full reorthogonalization."""
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    n = int(n)
    if max_iter is None:
        max_iter = 20 * n + 20
    kcap = max(1, min(max_krylov, n))
    q = _start_vector(n, v0, seed)
    steps = 0
    best = None
    while True:
        Qb = np.zeros((n, kcap))
        a = np.zeros(kcap)
        b = np.zeros(kcap)
        Qb[:, 0] = q
        k = 0
        done = False
        for j in range(kcap):
            w = apply(Qb[:, j])
            a[j] = Qb[:, j] @ w
            w = w - a[j] * Qb[:, j]
            if j:
                w = w - b[j - 1] * Qb[:, j - 1]
            w = _orth_against(w, Qb, j + 1)
            steps += 1
            k = j + 1
            b[j] = np.linalg.norm(w)
            Tk = np.diag(a[:k]) + np.diag(b[:k - 1], 1) + np.diag(b[:k - 1], -1)
            th, S = np.linalg.eigh(Tk)
            res = b[j] * abs(S[k - 1, -1])
            scale = max(1.0, float(np.max(np.abs(th))))
            if res <= tol * scale or b[j] <= 1e-14 * scale or k == n:
                done = True
                break
            if j + 1 < kcap:
                Qb[:, j + 1] = w / b[j]
            if steps >= max_iter:
                break
        Tk = np.diag(a[:k]) + np.diag(b[:k - 1], 1) + np.diag(b[:k - 1], -1)
        th, S = np.linalg.eigh(Tk)
        x = Qb[:, :k] @ S[:, -1]
        x = x / np.linalg.norm(x)
        lam = float(th[-1])
        cand = EigPair(lam, x, steps, float(b[k - 1] * abs(S[k - 1, -1])))
        if best is None or cand.lam >= best.lam:
            best = cand
        if done:
            r = np.linalg.norm(apply(x) - lam * x)
            return EigPair(lam, x, steps, float(r))
        if steps >= max_iter:
            raise NoConvergence(f"top_eigpair: no convergence after {steps} steps", best=best)
        q = x


class Pencil:
    """Largest generalized eigenvalue of ``(Z, C)`` for a fixed PSD ``C``.

    The factorization of ``C`` is computed once, so a solver evaluating many
    ``Z`` against the same cost matrix reuses it.  For ``C`` positive
    definite the pencil is reduced by Cholesky congruence; for singular
    ``C`` the null-space block of ``Z`` is eliminated by a Schur complement,
    and any direction where no multiple of ``C`` can dominate ``Z`` raises
    :class:`PencilUnbounded`.
    """

    def __init__(self, C, tol=1e-12, backend="dense"):
        C = check_symmetric(C, "C")
        if backend not in ("dense", "lanczos"):
            raise InvalidInput(f"unknown pencil backend {backend!r}")
        self.C = C
        self.n = C.shape[0]
        self.tol = tol
        self.backend = backend
        lam, Q = np.linalg.eigh(sym(C))
        cmax = max(float(lam[-1]), 0.0) if lam.size else 0.0
        if lam.size and lam[0] < -1e-10 * max(1.0, cmax):
            raise InvalidInput("pencil requires C to be positive semidefinite")
        self.definite = bool(lam.size and lam[0] > 1e-10 * max(1.0, cmax))
        if self.definite:
            self.L = np.linalg.cholesky(sym(C))
            self.Linv = solve_triangular(self.L, np.eye(self.n), lower=True)
        else:
            if backend == "lanczos":
                raise InvalidInput("the matrix-free pencil path requires C to be positive definite")
            rng_mask = lam > 1e-10 * max(1.0, cmax)
            self.R = Q[:, rng_mask]
            self.N = Q[:, ~rng_mask]
            self.cr = lam[rng_mask]
            if self.R.shape[1] == 0:
                self.L = None
            else:
                self.L = np.diag(np.sqrt(self.cr))

    def _reduce(self, Z):
        """Return (K, back) with ``K`` symmetric on a basis ``back`` of the active range."""
        Z = sym(np.asarray(Z, dtype=float))
        if self.definite:
            Li = self.Linv
            K = sym(Li @ Z @ Li.T)
            return K, Li.T
        zscale = max(1.0, float(np.max(np.abs(Z)))) if Z.size else 1.0
        R, N = self.R, self.N
        Zrr = R.T @ Z @ R
        Zrn = R.T @ Z @ N
        Znn = sym(N.T @ Z @ N)
        if Znn.size:
            w, E = np.linalg.eigh(Znn)
            eps = 1e-10 * zscale
            if w[-1] > eps:
                raise PencilUnbounded("Z is positive on the null space of C")
            neg = w < -eps
            zero = ~neg
            Ez = E[:, zero]
            if Ez.shape[1] and np.max(np.abs(Zrn @ Ez), initial=0.0) > eps:
                raise PencilUnbounded("Z couples range(C) to a flat null direction of C")
            En = E[:, neg]
            if En.shape[1]:
                B = Zrn @ En
                Zrr = Zrr + B @ np.diag(1.0 / -w[neg]) @ B.T
        if R.shape[1] == 0:
            return None, None
        Dm = 1.0 / np.sqrt(self.cr)
        K = sym(Dm[:, None] * Zrr * Dm[None, :])
        return K, R * Dm[None, :]

    def max_eig(self, Z, v0=None, seed=0):
        """Largest lambda with ``Z q = lambda C q`` (on the active range), and its vector ``q``."""
        if self.backend == "lanczos":
            Zs = sym(np.asarray(Z, dtype=float))
            L = self.L

            def op(x):
                y = solve_triangular(L, x, lower=True, trans="T")
                return solve_triangular(L, Zs @ y, lower=True)

            pair = top_eigpair(op, self.n, tol=self.tol, v0=v0, seed=seed)
            q = solve_triangular(L, pair.q, lower=True, trans="T")
            return pair.lam, q / np.linalg.norm(q)
        K, back = self._reduce(Z)
        if K is None:
            # C = 0 and Z <= 0 (else _reduce raised): every mu works
            return -np.inf, None
        th, W = np.linalg.eigh(K)
        lam, w = float(th[-1]), W[:, -1]
        q = back @ w
        if not self.definite and self.N.shape[1]:
            # lift the eliminated null-space block: x_N = (-Z_NN)^{-1} Z_NR x_R on the negative part
            Zs = sym(np.asarray(Z, dtype=float))
            Znn = sym(self.N.T @ Zs @ self.N)
            wz, E = np.linalg.eigh(Znn)
            eps = 1e-10 * max(1.0, float(np.max(np.abs(Zs))))
            neg = wz < -eps
            if np.any(neg):
                En = E[:, neg]
                xn = En @ ((En.T @ (self.N.T @ Zs @ q)) / -wz[neg])
                q = q + self.N @ xn
        nq = np.linalg.norm(q)
        return float(lam), q / nq


def max_pencil_eig(Z, C, tol=1e-12, backend="dense"):
    """Largest generalized eigenvalue of the pencil ``(Z, C)`` with ``C`` PSD.

    Raises :class:`PencilUnbounded` when no ``mu`` makes ``mu C - Z`` PSD.
    """
    Z = check_symmetric(Z, "Z")
    lam, _ = Pencil(C, tol=tol, backend=backend).max_eig(Z)
    return lam
