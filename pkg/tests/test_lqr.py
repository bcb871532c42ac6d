import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from fleetlift import (LqrSystem, integrator_cost_to_go, integrator_exact_cost_to_go,
                       integrator_input, lqr_classic, lqr_pair_recursion, lqr_variance_aware)
from fleetlift.errors import DomainError
from fleetlift.verify import random_lqr


def rollout_cost(sys, c, x, y):
    total = 0.0
    for k in range(sys.N):
        u = c.input(k, x, y)
        total += float(u @ sys.R[k] @ u)
        x = sys.A[k] @ x + sys.B[k] @ u
    return total + float((x - y) @ sys.P_N @ (x - y))


def test_one_step_scalar():
    c = lqr_pair_recursion(LqrSystem(1, 1.0, 1.0, 1.0, 1.0))
    assert abs(c.Kx[0][0, 0] - 0.5) <= 1e-12 and abs(c.Ky[0][0, 0] + 0.5) <= 1e-12
    for x, y in [(0.0, 1.0), (2.0, -1.0), (3.5, 3.5)]:
        assert abs(c.cost(0, x, y) - 0.5 * (x - y) ** 2) <= 1e-12
        # direct one-step minimum of u^2 + (x + u - y)^2
        assert abs(c.cost(0, x, y) - minimize_scalar(
            lambda u: u * u + (x + u - y) ** 2).fun) <= 1e-9


def test_uncontrollable_system():
    A = np.array([[1.0, 1.0], [0.0, 2.0]])
    sys = LqrSystem(3, A, np.zeros((2, 1)), [[1.0]], np.eye(2))
    c = lqr_pair_recursion(sys)
    for k in range(3):
        assert np.all(c.Kx[k] == 0) and np.all(c.Ky[k] == 0)
        assert np.allclose(c.Px[k], A.T @ c.Px[k + 1] @ A, atol=1e-12)


def test_pair_rollout_identity():
    rng = np.random.default_rng(0)
    for _ in range(100):
        sys = random_lqr(rng)
        c = lqr_pair_recursion(sys)
        x, y = rng.normal(size=sys.n), rng.normal(size=sys.n)
        ref = c.cost(0, x, y)
        assert abs(rollout_cost(sys, c, x, y) - ref) <= 1e-8 * max(1.0, abs(ref))
        assert max(c.heart) <= 1e-10 * max(1.0, max(np.abs(P).max() for P in c.Px))
        assert max(c.drift) <= 1e-10 * max(1.0, max(np.abs(P).max() for P in c.Px))
        assert c.cost(0, x, x) >= -1e-12
        assert all(np.array_equal(P, P.T) for P in c.Px + c.Py)


def expected_next(sys, c, k, x, y, u, ws, ps):
    return sum(p * c.cost(k + 1, sys.A[k] @ x + sys.B[k] @ u + w, y) for w, p in zip(ws, ps))


def test_noisy_recursion_bellman():
    rng = np.random.default_rng(1)
    for _ in range(40):
        sys = random_lqr(rng)
        n = sys.n
        ws = rng.normal(size=(3, n))
        ps = rng.random(3) + 0.1
        ps /= ps.sum()
        mean = ps @ ws
        cov = sum(p * np.outer(w - mean, w - mean) for w, p in zip(ws, ps))
        c = lqr_pair_recursion(sys, noise_mean=mean, noise_cov=cov)
        x, y = rng.normal(size=n), rng.normal(size=n)
        for k in range(sys.N):
            def f(u):
                return float(u @ sys.R[k] @ u) + expected_next(sys, c, k, x, y, u, ws, ps)
            u = c.input(k, x, y)
            assert abs(f(u) - c.cost(k, x, y)) <= 1e-8 * max(1.0, abs(f(u)))
            # the feedback is a stationary point of a convex quadratic
            for e in np.eye(sys.p):
                h = 1e-4
                grad = (f(u + h * e) - f(u - h * e)) / (2 * h)
                assert abs(grad) <= 1e-6 * max(1.0, abs(f(u)))


def test_zero_noise_is_deterministic():
    rng = np.random.default_rng(2)
    for _ in range(10):
        sys = random_lqr(rng)
        a = lqr_pair_recursion(sys)
        b = lqr_pair_recursion(sys, noise_mean=np.zeros(sys.n), noise_cov=np.zeros((sys.n,) * 2))
        for name in ("Px", "Py", "Pxy", "Kx", "Ky"):
            for u, v in zip(getattr(a, name), getattr(b, name)):
                assert np.array_equal(u, v)
        assert all(cw == 0 for cw in b.cw)
        assert all(np.all(kw == 0) for kw in b.kw)


def test_tracking_bellman():
    rng = np.random.default_rng(3)
    for _ in range(30):
        sys = random_lqr(rng)
        G = rng.normal(size=(sys.n, sys.n))
        Q = G @ G.T
        c = lqr_pair_recursion(sys, tracking=Q)
        x, y = rng.normal(size=sys.n), rng.normal(size=sys.n)
        for k in range(sys.N):
            u = c.input(k, x, y)
            nxt = sys.A[k] @ x + sys.B[k] @ u
            rhs = float((x - y) @ Q @ (x - y) + u @ sys.R[k] @ u) + c.cost(k + 1, nxt, y)
            assert abs(rhs - c.cost(k, x, y)) <= 1e-8 * max(1.0, abs(rhs))


def test_classic_scalar_step():
    P, K = lqr_classic(LqrSystem(1, 1.0, 1.0, 1.0, 1.0))
    assert abs(P[0][0, 0] - 0.5) <= 1e-12 and abs(K[0][0, 0] + 0.5) <= 1e-12


def test_classic_against_search():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a, b, r, q, p = rng.random(5) + 0.2
        N = int(rng.integers(1, 4))
        P, K = lqr_classic(LqrSystem(N, a, b, r, p, q))
        # scalar Bellman step by golden-section search on u
        for k in range(N):
            Pn = P[k + 1][0, 0]
            best = minimize_scalar(lambda u: r * u * u + Pn * (a + b * u) ** 2,
                                   method="golden", tol=1e-12).fun
            assert abs(q + best - P[k][0, 0]) <= 1e-6


def test_classic_zero_dynamics():
    Q = [[2.0, 0.5], [0.5, 1.0]]
    P, _ = lqr_classic(LqrSystem(3, np.zeros((2, 2)), np.eye(2), np.eye(2), np.eye(2), Q))
    for k in range(3):
        assert np.allclose(P[k], Q, atol=1e-12)


def test_variance_aware_reductions():
    rng = np.random.default_rng(5)
    for _ in range(10):
        sys = random_lqr(rng)
        G = rng.normal(size=(sys.n, sys.n))
        Q = G @ G.T
        P, K = lqr_classic(LqrSystem(sys.N, sys.A, sys.B, sys.R, sys.P_N, Q))
        P1, P2, K1, K2 = lqr_variance_aware(sys, Q, Q, sys.P_N, sys.P_N)
        for k in range(sys.N):
            assert np.allclose(K1[k], K[k], atol=1e-12) and np.allclose(K2[k], K[k], atol=1e-12)
            assert np.allclose(P1[k], P[k], atol=1e-12) and np.allclose(P2[k], P[k], atol=1e-12)
    A = np.array([[0.5, 1.0], [0.0, 1.0]])
    sys = LqrSystem(2, A, np.zeros((2, 1)), [[1.0]], np.eye(2))
    P1, P2, _, _ = lqr_variance_aware(sys, np.eye(2), 2 * np.eye(2), np.eye(2), np.eye(2))
    for k in range(2):
        assert np.allclose(P1[k], np.eye(2) + A.T @ P1[k + 1] @ A)
        assert np.allclose(P2[k], 2 * np.eye(2) + A.T @ P2[k + 1] @ A)


def test_rejects_indefinite_effort():
    with pytest.raises(DomainError):
        LqrSystem(1, 1.0, 1.0, -1.0, 1.0)


def test_integrator_formula_values():
    assert integrator_cost_to_go(2, 0, 0.0, 1.0) == 0.5
    assert integrator_cost_to_go(3, 1, [1.0, 2.0], [1.0, 2.0]) == 0.0
    assert integrator_cost_to_go(4, 2, 0.0, 2.0) == 0.5
    with pytest.raises(DomainError):
        integrator_cost_to_go(2, 2, 0.0, 1.0)


def test_integrator_bellman_step():
    # x+ = x + u with effort |u|^2 and a hard target; golden-section search over u
    rng = np.random.default_rng(6)
    for _ in range(50):
        N = int(rng.integers(2, 7))
        k = int(rng.integers(0, N - 1))
        x, r = rng.normal(size=2)

        def step(u):
            return u * u + integrator_exact_cost_to_go(N, k + 1, x + u, r)

        res = minimize_scalar(step, bracket=(-5, 5), method="golden", tol=1e-12)
        assert abs(res.fun - integrator_exact_cost_to_go(N, k, x, r)) <= 1e-8
        assert abs(res.x - integrator_input(N, k, x, r)) <= 1e-6
        # the last step is forced onto the target
        assert abs(integrator_input(N, N - 1, x, r) - (r - x)) <= 1e-15


def test_integrator_formula_along_straight_line():
    rng = np.random.default_rng(7)
    for _ in range(20):
        N = int(rng.integers(2, 7))
        x0, r = rng.normal(size=2), rng.normal(size=2)
        x = x0.copy()
        for k in range(N):
            assert abs(integrator_cost_to_go(N, 0, x0, r) - integrator_exact_cost_to_go(N, 0, x0, r)) <= 1e-12
            left = integrator_exact_cost_to_go(N, k, x, r)
            assert abs(left - (N - k) / N ** 2 * float((r - x0) @ (r - x0))) <= 1e-12
            x = x + integrator_input(N, k, x, r)
        assert np.allclose(x, r, atol=1e-12)
