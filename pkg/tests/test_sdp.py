import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import sdp_optimal_pair
from gaugeopt import (DegeneratePolar, EssentiallyInfeasibleRegion, InvalidInput, InvalidShift,
                      SolverConfig)
from gaugeopt.reference import gen_sdp, sdp_reference
from gaugeopt.sdp import (SdpDualState, SdpInstance, apply_A, apply_At, attaining_matrix,
                          check_optimality, dual_objective, dual_subgradient, normalize_C,
                          project_halfspace, recover_primal, sdls_solve, simdiag_check, solve,
                          solve_dual)


def trace_instance(n=3, C=None):
    return SdpInstance(np.eye(n) if C is None else C, [1.0], [np.eye(n)])


def random_sym(rng, n):
    A = rng.standard_normal((n, n))
    return 0.5 * (A + A.T)


def test_instance_guards():
    with pytest.raises(InvalidInput):
        SdpInstance(np.eye(2), [1.0, 2.0], [np.eye(2)])
    with pytest.raises(InvalidInput, match="A1"):
        SdpInstance(np.eye(2), [1.0], [np.array([[1.0, 1.0], [0.0, 1.0]])])
    with pytest.raises(InvalidInput):
        SdpInstance(np.eye(2), [0.0], [np.eye(2)])
    with pytest.raises(InvalidInput):
        SdpInstance(np.eye(2), [1.0], [np.eye(3)])


# linear map

def test_apply_examples(rng):
    inst = trace_instance(4)
    X = random_sym(rng, 4)
    assert apply_A(inst, X)[0] == pytest.approx(np.trace(X))
    A2 = random_sym(rng, 3)
    inst = SdpInstance(np.eye(3), [1.0, 1.0], [np.eye(3), A2])
    assert np.allclose(apply_At(inst, [0.0, 1.0]), A2)


def test_adjoint_identity(rng):
    P = gen_sdp(7, 5, seed=1)
    X = random_sym(rng, 7)
    y = rng.standard_normal(5)
    lhs = apply_A(P.instance, X) @ y
    rhs = np.sum(X * apply_At(P.instance, y))
    assert abs(lhs - rhs) <= 1e-12 * max(1, abs(lhs))


def test_apply_shape_guards():
    inst = trace_instance(3)
    with pytest.raises(InvalidInput):
        apply_A(inst, np.eye(2))
    with pytest.raises(InvalidInput):
        apply_At(inst, [1.0, 2.0])


# normalization

def test_normalize_zero_shift():
    inst = gen_sdp(5, 3, seed=0).instance
    out = normalize_C(inst, np.zeros(3))
    assert np.array_equal(out.C, inst.C) and out.offset == 0.0


def test_normalize_invalid_shift():
    inst = SdpInstance(np.zeros((2, 2)), [1.0], [-np.eye(2)])
    with pytest.raises(InvalidShift):
        normalize_C(inst, [-1.0])


def test_normalize_objective_consistency(rng):
    P = gen_sdp(6, 4, seed=2)
    inst = P.instance
    # a shift small enough to keep C - A^T y_hat PSD
    d = rng.standard_normal(4)
    lam_c = np.linalg.eigvalsh(inst.C)[0]
    step = 0.5 * lam_c / np.linalg.norm(apply_At(inst, d), 2)
    y_hat = step * d
    out = normalize_C(inst, y_hat)
    Am = inst.A.reshape(4, 36)
    Nul = np.linalg.svd(Am)[2][4:]
    for _ in range(100):
        X = P.X_strict + (Nul.T @ rng.standard_normal(Nul.shape[0])).reshape(6, 6)
        X = 0.5 * (X + X.T)
        lhs = np.sum(out.C * X) + out.offset
        assert abs(lhs - np.sum(inst.C * X)) <= 1e-10 * (1 + abs(lhs))


# dual objective, attaining matrix, subgradient

def test_dual_objective_examples():
    inst = SdpInstance(np.eye(2), [1.0], [np.diag([2.0, -1.0])])
    assert dual_objective(inst, [1.0]).value == pytest.approx(2.0)
    assert dual_objective(inst, [-0.5]).value == pytest.approx(0.5)
    neg = SdpInstance(np.eye(2), [1.0], [-np.eye(2)])
    assert dual_objective(neg, [1.0]).value == 0.0


def test_dual_objective_singular_C():
    inst = SdpInstance(np.diag([1.0, 0.0]), [1.0], [np.diag([0.0, 1.0])])
    assert dual_objective(inst, [1.0]).infinite
    with pytest.raises(EssentiallyInfeasibleRegion):
        attaining_matrix(inst, [1.0])


def test_attaining_matrix_examples():
    inst = SdpInstance(np.diag([1.0, 2.0]), [1.0], [np.diag([2.0, 2.0])])
    Zy = attaining_matrix(inst, [1.0])
    assert np.allclose(Zy, np.diag([1.0, 0.0]))
    assert np.sum(inst.C * Zy) == pytest.approx(1.0)
    inst = SdpInstance(np.eye(2), [1.0], [np.diag([3.0, 1.0])])
    Zy = attaining_matrix(inst, [1.0])
    assert np.allclose(Zy, np.diag([1.0, 0.0]))
    assert np.sum(apply_At(inst, [1.0]) * Zy) == pytest.approx(3.0)


def test_attaining_matrix_identities(rng):
    inst = gen_sdp(8, 6, seed=3).instance
    y = rng.standard_normal(6)
    Zy = attaining_matrix(inst, y)
    mu = dual_objective(inst, y).value
    assert np.linalg.eigvalsh(Zy)[0] >= -1e-12
    assert abs(np.sum(inst.C * Zy) - 1.0) <= 1e-10
    assert abs(np.sum(apply_At(inst, y) * Zy) - mu) <= 1e-9 * max(1, mu)


def test_attaining_matrix_degenerate():
    # C = diag(1, 1e-9): the top pencil direction is nearly C-null
    inst = SdpInstance(np.diag([1.0, 1e-9]), [1.0], [np.diag([0.0, 1.0])])
    with pytest.raises(DegeneratePolar):
        attaining_matrix(inst, [1.0])


def test_dual_subgradient_examples(rng):
    A2 = random_sym(rng, 2)
    inst = SdpInstance(np.eye(2), [1.0, 1.0], [np.diag([3.0, 1.0]), A2])
    g = dual_subgradient(inst, [1.0, 0.0])
    assert np.allclose(g, [3.0, A2[0, 0]])
    assert np.array_equal(dual_subgradient(inst, [-1.0, 0.0]), [0.0, 0.0])


def test_dual_subgradient_convexity(rng):
    inst = gen_sdp(6, 5, seed=4).instance
    worst = 0.0
    for _ in range(500):
        y = rng.standard_normal(5)
        w = rng.standard_normal(5)
        g = dual_subgradient(inst, y)
        fy = dual_objective(inst, y).value
        fw = dual_objective(inst, w).value
        worst = min(worst, fw - fy - g @ (w - y))
    assert worst >= -1e-8


# halfspace projection

def test_project_halfspace_examples():
    assert np.allclose(project_halfspace(np.zeros(2), np.array([1.0, 0.0])), [1, 0])
    y = np.array([2.0, 0.0])
    assert np.array_equal(project_halfspace(y, np.array([1.0, 0.0])), y)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 8).flatmap(lambda m: st.tuples(
    arrays(float, m, elements=st.floats(-5, 5)), arrays(float, m, elements=st.floats(-5, 5)))))
def test_project_halfspace_property(yb):
    y, b = yb
    if np.linalg.norm(b) < 1e-3:
        return
    out = project_halfspace(y, b)
    assert b @ out >= 1 - 1e-12
    assert np.allclose(project_halfspace(out, b), out, atol=1e-12)
    if b @ y < 1:
        assert abs(b @ out - 1.0) <= 1e-12
        d = out - y
        assert np.linalg.norm(d - (d @ b) / (b @ b) * b) <= 1e-12 * (1 + np.linalg.norm(d))


# dual solve

def test_solve_dual_trace_instance():
    d = solve_dual(trace_instance(3))
    assert d.y[0] == pytest.approx(1.0, abs=1e-9)
    assert d.mu == pytest.approx(1.0, abs=1e-9)


def test_solve_dual_matches_reference():
    inst = gen_sdp(7, 5, seed=6).instance
    ref = sdp_reference(inst)
    d = solve_dual(inst)
    assert d.mu == pytest.approx(1.0 / ref.p_star, rel=1e-3)


def test_solve_dual_scaling_b():
    inst = gen_sdp(6, 4, seed=7).instance
    mu1 = solve_dual(inst).mu
    mu2 = solve_dual(SdpInstance(inst.C, 2 * inst.b, inst.A)).mu
    assert mu2 == pytest.approx(mu1 / 2, rel=1e-3)


def test_solve_dual_lanczos_backend():
    inst = gen_sdp(6, 4, seed=8).instance
    fast = solve_dual(inst, SolverConfig(max_iter=300), backend="lanczos")
    assert fast.mu == pytest.approx(solve_dual(inst).mu, rel=1e-6)


def test_solve_dual_infeasible_start():
    inst = SdpInstance(np.diag([1.0, 0.0]), [1.0], [np.diag([0.0, 1.0])])
    with pytest.raises(EssentiallyInfeasibleRegion):
        solve_dual(inst)


# recovery

def test_recover_trace_instance():
    inst = trace_instance(3)
    dual = SdpDualState(np.array([1.0]), 1.0, None, 0)
    p = recover_primal(inst, dual)
    assert p.rank == 3
    assert p.residual <= 1e-12
    assert np.trace(p.X) == pytest.approx(1.0)
    assert np.linalg.eigvalsh(p.X)[0] >= -1e-12


def test_recover_planted_feasible():
    P = gen_sdp(8, 6, seed=9)
    sol = solve(P.instance)
    X, b = sol.primal.X, P.instance.b
    assert np.linalg.norm(apply_A(P.instance, X) - b) <= 1e-5 * (1 + np.linalg.norm(b))
    assert np.linalg.eigvalsh(X)[0] >= -1e-8
    assert sol.certificate.passed


def test_loose_dual_degrades_without_panic():
    inst = gen_sdp(8, 6, seed=10).instance
    sol = solve(inst, SolverConfig(step_rule="sqrt", rel_tol=1e-2, refine_rounds=0))
    res = sol.certificate.residuals
    assert all(np.isfinite(v) for v in res.values())
    assert not sol.certificate.passed


def test_sdls_scalar():
    for a, b1 in [(2.0, 3.0), (2.0, -3.0), (0.5, 1.0)]:
        inst = SdpInstance(np.eye(1), [b1], [np.array([[a]])])
        res = sdls_solve(inst, np.eye(1))
        assert res.T[0, 0] == pytest.approx(max(b1 / a, 0.0), abs=1e-9)


def test_sdls_consistent_planted(rng):
    n, m = 5, 3
    A = np.array([random_sym(rng, n) for _ in range(m)])
    U2 = np.linalg.qr(rng.standard_normal((n, 2)))[0]
    F = rng.standard_normal((2, 2))
    T = F @ F.T
    X = U2 @ T @ U2.T
    b = np.einsum("kij,ij->k", A, 0.5 * (X + X.T))
    res = sdls_solve(SdpInstance(np.eye(n), b, A), U2, SolverConfig(sdls_tol=1e-12))
    assert 0.5 * res.residual ** 2 <= 1e-12


def test_sdls_inconsistent_grid_scan():
    a = np.array([1.0, 2.0, -0.5])
    b = np.array([1.0, 0.5, 1.0])
    inst = SdpInstance(np.eye(1), b, [np.array([[v]]) for v in a])
    res = sdls_solve(inst, np.eye(1), SolverConfig(sdls_tol=1e-12))
    grid = np.linspace(0, 3, 3_000_001)
    vals = ((grid[:, None] * a[None, :] - b[None, :]) ** 2).sum(axis=1)
    assert res.T[0, 0] == pytest.approx(grid[np.argmin(vals)], abs=1e-6)


# certificate

def test_check_optimality_planted_pair():
    inst, X, y = sdp_optimal_pair()
    cert = check_optimality(inst, X, y)
    assert max(cert.residuals.values()) <= 1e-8, cert.residuals
    assert cert.duality.product == pytest.approx(1.0, abs=1e-8)
    assert cert.passed


def test_check_optimality_dual_residual_definition():
    inst, X, y = sdp_optimal_pair()
    y2 = y + 0.1 * inst.b / (inst.b @ inst.b)
    cert = check_optimality(inst, X, y2)
    assert cert.feas_dual == pytest.approx(abs(inst.b @ y2 - 1.0), abs=1e-14)
    assert cert.feas_dual == pytest.approx(0.1)


def test_check_optimality_psd_residual_definition():
    inst = trace_instance(2)
    X = np.diag([1.5, -0.5])
    cert = check_optimality(inst, X, [1.0])
    assert cert.feas_psd == pytest.approx(0.5 / (1 + 1.5))
    assert not cert.passed


def test_certificate_json_roundtrip():
    inst, X, y = sdp_optimal_pair()
    cert = check_optimality(inst, X, y)
    assert type(cert).from_json(cert.to_json()).to_json() == cert.to_json()


# simultaneous diagonalization

def test_simdiag_examples():
    assert simdiag_check(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    assert simdiag_check(np.eye(3), np.eye(3))


def test_simdiag_constructed(rng):
    for _ in range(20):
        Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        k = int(rng.integers(1, 6))
        A = (Q[:, :k] * rng.random(k)) @ Q[:, :k].T
        B = (Q[:, k:] * rng.random(6 - k)) @ Q[:, k:].T
        A, B = 0.5 * (A + A.T), 0.5 * (B + B.T)
        assert np.linalg.norm(A @ B) <= 1e-8
        assert simdiag_check(A, B)


def test_simdiag_rejects_indefinite():
    with pytest.raises(InvalidInput):
        simdiag_check(np.diag([1.0, -1.0]), np.eye(2))
