import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fleetlift import (DiscreteMeasure, GroundSystem, NoisyGroundSystem, dpa_multi, dpa_simple,
                       dpa_stochastic, rollout_particle)
from fleetlift.errors import CapacityError, InfeasibleError, ModeError
from fleetlift.extended import ext_add
from fleetlift.scenario import bundled_path, load_scenario
from fleetlift.verify import random_finite_system

INF = math.inf


def bundled(name):
    return load_scenario(bundled_path(name)).system


def brute_cost_to_go(sys, x, refs):
    """Minimum over every input sequence; ``refs`` is ``(r_0, ..., r_N)``."""
    N = sys.horizon
    best = INF
    for us in itertools.product(*(range(len(sys.inputs[k])) for k in range(N))):
        xi, total = sys.state_index(0, x), 0.0
        for k, u in enumerate(us):
            total = ext_add(total, sys.stage_cost[k][xi, u, sys.ref_index(k, refs[k])])
            xi = sys.dynamics[k][xi, u]
        total = ext_add(total, sys.terminal_cost[xi, sys.ref_index(N, refs[N])])
        best = min(best, total)
    return best


def same(a, b):
    # summation order differs between the recursion and the enumeration
    return a == b or abs(a - b) <= 1e-12


def test_flip_tuple_has_zero_cost():
    sys = bundled("counterexample_multimarginal")
    t = dpa_multi(sys)
    assert t.cost_to_go(0, 1, (1, -1, 1)) == 0.0
    assert t.cost_to_go(0, -1, (-1, 1, -1)) == 0.0
    assert t.input(0, 1, (1, -1, 1)) == -1 and t.input(1, -1, (-1, 1)) == -1
    traj, us, cost = rollout_particle(sys, t, 1, (1, -1, 1))
    assert us == [-1, -1] and cost == 0.0 and traj == [1, -1, 1]


def test_multi_table_matches_enumeration():
    sys = bundled("counterexample_multimarginal")
    t = dpa_multi(sys)
    for x in sys.states[0]:
        for refs in itertools.product(sys.refs[0], repeat=3):
            assert t.cost_to_go(0, x, refs) == brute_cost_to_go(sys, x, refs)


def test_frozen_reference_table():
    sys = bundled("counterexample_multimarginal")
    t = dpa_simple(sys, freeze_reference=True)
    for x in (-1, 1):
        assert t.cost_to_go(0, x, x) == 2.0
        # flip once, then park at the origin: 4 + 0 + 1
        assert t.cost_to_go(0, x, -x) == 5.0
        assert t.cost_to_go(0, x, -x) == brute_cost_to_go(sys, x, (-x,) * 3)


def test_split_mass_ground_solution():
    sys = bundled("split_mass")
    t = dpa_multi(sys)
    for x in sys.states[0]:
        for r0 in sys.refs[0]:
            for r1 in sys.refs[1]:
                assert t.cost_to_go(0, x, (r0, r1)) == 0.0
    _, us, cost = rollout_particle(sys, dpa_simple(sys), 0, -1)
    assert us == [-1] and cost == 0.0


def test_dpa_simple_rejects_reference_costs():
    with pytest.raises(ModeError):
        dpa_simple(bundled("counterexample_multimarginal"))


def test_finite_integrator_line():
    X = (-1, 0, 1)
    sys = GroundSystem.time_invariant(
        X, X, X, 1, lambda x, u: min(1, max(-1, x + u)), lambda x, u, r: float(u * u),
        lambda x, r: 0.0 if x == r else INF)
    t = dpa_simple(sys)
    for x in X:
        for r in X:
            expect = float((r - x) ** 2) if abs(r - x) <= 1 else INF
            assert t.cost_to_go(0, x, r) == expect
    with pytest.raises(InfeasibleError):
        rollout_particle(sys, t, -1, 1)


def test_zero_costs_give_zero_tables():
    sys = bundled("zero_cost")
    for t in (dpa_multi(sys), dpa_simple(sys)):
        assert all(np.all(v == 0) for v in t.values)
    _, _, cost = rollout_particle(sys, dpa_simple(sys), "a", "b")
    assert cost == 0.0


def test_capacity_error():
    sys = bundled("counterexample_multimarginal")
    with pytest.raises(CapacityError):
        dpa_multi(sys, mem_cap=10)


def test_noisy_counterexample_table():
    sys = bundled("noise_counterexample")
    t = dpa_stochastic(sys)
    for x in (-2, -1):
        for r in (-2, -1):
            assert t.cost_to_go(0, x, r) == 1.0


def test_degenerate_noise_matches_deterministic():
    rng = np.random.default_rng(4)
    for _ in range(20):
        sys = random_finite_system(rng)
        sys.stage_cost = [np.broadcast_to(g[:, :, :1], g.shape).copy() for g in sys.stage_cost]
        noisy = NoisyGroundSystem.from_deterministic(sys)
        a, b = dpa_simple(sys), dpa_stochastic(noisy)
        for va, vb in zip(a.values, b.values):
            assert np.array_equal(va, vb)


def test_zero_cost_noise():
    noise = DiscreteMeasure([0, 1])
    sys = NoisyGroundSystem.time_invariant((0, 1), (0, 1), (0, 1), noise, 3,
                                           lambda x, u, w: (x + u + w) % 2,
                                           lambda x, u, w, r: 0.0, lambda x, r: 0.0)
    assert all(np.all(v == 0) for v in dpa_stochastic(sys).values)


def plain_stochastic(sys):
    """Expected-cost recursion written out with loops."""
    N = sys.horizon
    V = [None] * (N + 1)
    V[N] = sys.terminal_cost.copy()
    for k in range(N - 1, -1, -1):
        nx, ny = len(sys.states[k]), len(sys.refs[N])
        V[k] = np.empty((nx, ny))
        for x in range(nx):
            for r in range(ny):
                best = INF
                for u in range(len(sys.inputs[k])):
                    total = 0.0
                    for w, p in enumerate(sys.noise[k].weights):
                        term = ext_add(sys.stage_cost[k][x, u, w, r],
                                       V[k + 1][sys.dynamics[k][x, u, w], r])
                        total = ext_add(total, INF if term == INF else p * term)
                    best = min(best, total)
                V[k][x, r] = best
    return V


def test_stochastic_matches_loop_recursion():
    rng = np.random.default_rng(8)
    for _ in range(30):
        nx, nu, nw, N = 3, 2, int(rng.integers(1, 4)), int(rng.integers(1, 4))
        w = rng.random(nw) + 0.1
        noise = DiscreteMeasure(list(range(nw)), w / w.sum())
        dyn = rng.integers(0, nx, size=(nx, nu, nw))
        g = np.round(rng.random((nx, nu, nw, 1)) * 3, 2) * np.ones((1, 1, 1, nx))
        term = np.round(rng.random((nx, nx)) * 3, 2)
        term[rng.random((nx, nx)) < 0.2] = INF
        X = tuple(range(nx))
        sys = NoisyGroundSystem([X] * (N + 1), [tuple(range(nu))] * N, [X] * (N + 1),
                                [noise] * N, [dyn] * N, [g] * N, term)
        for a, b in zip(dpa_stochastic(sys).values, plain_stochastic(sys)):
            assert np.allclose(a, b, atol=1e-12, equal_nan=False)
            assert np.array_equal(np.isinf(a), np.isinf(b))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_bellman_consistency_and_rollout(seed):
    rng = np.random.default_rng(seed)
    sys = random_finite_system(rng)
    t = dpa_multi(sys)
    N = sys.horizon
    for k in range(N):
        for idx in np.ndindex(t.values[k].shape):
            v = t.values[k][idx]
            if v == INF:
                continue
            x, rs = idx[0], idx[1:]
            u = t.policy[k][idx]
            nxt = t.values[k + 1][(sys.dynamics[k][x, u],) + rs[1:]]
            assert ext_add(sys.stage_cost[k][x, u, rs[0]], nxt) == v
    for x in sys.states[0]:
        for refs in itertools.product(*(sys.refs[k] for k in range(N + 1))):
            j0 = t.cost_to_go(0, x, refs)
            assert same(j0, brute_cost_to_go(sys, x, refs))
            if j0 < INF:
                assert abs(rollout_particle(sys, t, x, refs)[2] - j0) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_multi_collapses_to_simple(seed):
    rng = np.random.default_rng(seed)
    sys = random_finite_system(rng)
    sys.stage_cost = [np.broadcast_to(g[:, :, :1], g.shape).copy() for g in sys.stage_cost]
    multi, simple = dpa_multi(sys), dpa_simple(sys)
    N = sys.horizon
    for k in range(N + 1):
        for x in sys.states[k]:
            for r in sys.refs[N]:
                refs = (r,) * (N - k + 1)
                assert multi.cost_to_go(k, x, refs) == simple.cost_to_go(k, x, r)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_monotone_in_terminal_cost(seed):
    rng = np.random.default_rng(seed)
    sys = random_finite_system(rng)
    bumped = GroundSystem(sys.states, sys.inputs, sys.refs, sys.dynamics, sys.stage_cost,
                          sys.terminal_cost + rng.random(sys.terminal_cost.shape))
    for a, b in zip(dpa_multi(sys).values, dpa_multi(bumped).values):
        assert np.all(b >= a)
