"""Regenerate ``frozen.json``: optimal values from an interior-point solver.

The instances are drawn here with plain numpy, and the optimal values come
from cvxpy, which shares no code with gaugeopt.  Run once; the test suite
only reads the frozen file.

    python3 tests/oracles/make_oracles.py
"""

import json
from pathlib import Path

import cvxpy as cp
import numpy as np

OUT = Path(__file__).with_name("frozen.json")


def rpca_case(seed, m, n, rank, k, gamma):
    rng = np.random.default_rng(1000 + seed)
    L = rng.standard_normal((m, rank)) @ rng.standard_normal((rank, n))
    L /= np.linalg.norm(L)
    S = np.zeros(m * n)
    S[rng.choice(m * n, k, replace=False)] = 0.3 * rng.choice([-1.0, 1.0], k)
    M = L + S.reshape(m, n)
    X = cp.Variable((m, n))
    prob = cp.Problem(cp.Minimize(cp.normNuc(X) + gamma * cp.sum(cp.abs(M - X))))
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-9, tol_gap_rel=1e-9, tol_feas=1e-9)
    return {"M": M.tolist(), "gamma": gamma, "p_star": float(prob.value)}


def sdp_case(seed, n, m):
    rng = np.random.default_rng(2000 + seed)
    A = rng.standard_normal((m, n, n))
    A = 0.5 * (A + A.transpose(0, 2, 1))
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    X0 = (Q * (0.1 + rng.random(n))) @ Q.T
    b = np.einsum("kij,ij->k", A, X0)
    C0 = rng.standard_normal((n, n))
    C = C0 @ C0.T + 0.1 * np.eye(n)
    X = cp.Variable((n, n), symmetric=True)
    cons = [X >> 0] + [cp.trace(A[i] @ X) == b[i] for i in range(m)]
    prob = cp.Problem(cp.Minimize(cp.trace(C @ X)), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-9, tol_gap_rel=1e-9, tol_feas=1e-9)
    return {"C": C.tolist(), "A": A.tolist(), "b": b.tolist(), "p_star": float(prob.value)}


def main():
    rpca = [rpca_case(s, m, n, r, k, g) for s, (m, n, r, k, g) in enumerate(
        [(8, 8, 1, 3, 0.35), (10, 7, 2, 4, 0.3), (6, 9, 1, 2, 0.33), (12, 12, 2, 7, 0.29)])]
    sdp = [sdp_case(s, n, m) for s, (n, m) in enumerate([(5, 3), (6, 8), (8, 5), (10, 12)])]
    OUT.write_text(json.dumps({"solver": "cvxpy/CLARABEL", "rpca": rpca, "sdp": sdp}, indent=1))
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
