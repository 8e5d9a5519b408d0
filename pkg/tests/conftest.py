"""Shared fixtures: hand-built optimal pairs and the acceptance-line collector."""

import numpy as np
import pytest

from gaugeopt.rpca import RpcaInstance
from gaugeopt.sdp import SdpInstance

ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


def rpca_optimal_triple():
    """A 2x2 instance with an optimal split where both parts are nonzero.

    With gamma = 0.6 the dual point Z = c [[2, 3], [3, 2]] has spectral
    norm 5c and max norm 3c = 0.6 * 5c, so both branches of the dual
    objective are active.  X lives on the top singular pair (1, 1)/sqrt(2)
    of Z, and Y on the entries where |Z| peaks, with matching signs.
    """
    gamma = 0.6
    a, s = 1.0, 0.5
    X = 0.5 * a * np.ones((2, 2))
    Y = s * np.array([[0.0, 1.0], [1.0, 0.0]])
    c = 1.0 / (5 * a + 6 * s)
    Z = c * np.array([[2.0, 3.0], [3.0, 2.0]])
    return RpcaInstance(X + Y, gamma), X, Y, Z


def sdp_optimal_pair(n=6, m=4, k=2, seed=0):
    """Instance with a planted Lagrange pair (X*, y*) and the gauge-dual point.

    X* and the slack S live on complementary eigenspaces, C = A^T y* + S
    and b = A X*.  The gauge-dual optimum is y = y* / b^T y*.
    """
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    X = (Q[:, :k] * (0.5 + rng.random(k))) @ Q[:, :k].T
    S = (Q[:, k:] * (0.5 + rng.random(n - k))) @ Q[:, k:].T
    A = rng.standard_normal((m, n, n))
    A = 0.5 * (A + A.transpose(0, 2, 1))
    A[0] = np.eye(n)
    ys = 0.1 * rng.standard_normal(m)
    ys[0] = 0.0
    shift = np.einsum("k,kij->ij", ys, A)
    ys[0] = 1.0 + max(0.0, -np.linalg.eigvalsh(shift)[0])
    C = np.einsum("k,kij->ij", ys, A) + S
    C = 0.5 * (C + C.T)
    X = 0.5 * (X + X.T)
    b = np.einsum("kij,ij->k", A, X)
    inst = SdpInstance(C, b, A)
    return inst, X, ys / float(b @ ys)


def tsub_pdhg(instance, U, V, Z, max_iter=200000, tol=1e-12):
    """Primal-dual projected gradient on the saddle form of the recovery subproblem.

    Projects ``T`` onto the PSD cone and the l1 multiplier onto the box
    ``|W| <= gamma``; shares nothing with the ADMM under test.
    """
    M, g = instance.M, instance.gamma
    Zh = -Z / np.linalg.svd(Z, compute_uv=False)[0]
    r = U.shape[1]
    T = np.zeros((r, r))
    Tb = T
    W = np.zeros_like(M)
    step = 0.95
    for k in range(max_iter):
        W = np.clip(W + step * (M - U @ Tb @ V.T), -g, g)
        G = U.T @ (W + Zh) @ V
        lam, Q = np.linalg.eigh(T + step * 0.5 * (G + G.T))
        Tn = (Q * np.maximum(lam, 0.0)) @ Q.T
        Tn = 0.5 * (Tn + Tn.T)
        Tb = 2 * Tn - T
        moved = np.linalg.norm(Tn - T)
        T = Tn
        if k > 100 and moved < tol:
            break
    return T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
