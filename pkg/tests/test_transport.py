from dataclasses import replace
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import sqrtm

from fleetlift import (DiscreteMeasure, as_map, blend, cost_tensor, dirac, gaussian_w2_sq,
                       mmot, ot2)
from fleetlift.errors import CapacityError, DomainError

INF = math.inf
HALF = DiscreteMeasure([-1, 1])


def random_measure(rng, n):
    w = rng.random(n) + 0.05
    return DiscreteMeasure(list(range(n)), w / w.sum())


def vertex_minimum(marginals, C):
    """Minimum over basic feasible solutions of the multi-marginal LP."""
    shape = C.shape
    cells = list(itertools.product(*(range(s) for s in shape)))
    rows = []
    for a, s in enumerate(shape):
        for i in range(s):
            rows.append([1.0 if c[a] == i else 0.0 for c in cells])
    A = np.array(rows)
    b = np.concatenate([m.weights for m in marginals])
    rank = np.linalg.matrix_rank(A)
    best = INF
    for cols in itertools.combinations(range(len(cells)), rank):
        sub = A[:, cols]
        if np.linalg.matrix_rank(sub) < rank:
            continue
        x, *_ = np.linalg.lstsq(sub, b, rcond=None)
        if np.all(x >= -1e-12) and np.allclose(sub @ x, b, atol=1e-10):
            best = min(best, float(sum(x[i] * C[cells[c]] for i, c in enumerate(cols))))
    return best


def test_split_coupling():
    plan = ot2(dirac(0), HALF, [[1.0, 1.0]])
    assert plan.value == 1.0
    assert plan.joint == DiscreteMeasure([(0, -1), (0, 1)])
    assert as_map(plan) is None


def test_identical_measures_zero_diagonal():
    mu = DiscreteMeasure([0, 1, 2], [0.2, 0.3, 0.5])
    C = np.array([[abs(i - j) for j in range(3)] for i in range(3)], float)
    plan = ot2(mu, mu, C)
    assert plan.value == 0.0
    assert as_map(plan) == {0: 0, 1: 1, 2: 2}


def test_frozen_reference_table_value():
    # cost-to-go indexed by the final reference only: 2 on the diagonal, 6 off it
    assert ot2(HALF, HALF, [[2.0, 6.0], [6.0, 2.0]]).value == 2.0


def test_multi_reference_plan_flips():
    # j_0(x, r0, r1, r2) is 0 exactly on the sign-flip pattern (x, x, -x, x)
    def j0(x, r0, r1, r2):
        return 0.0 if (r0, r1, r2) == (x, -x, x) else 1.0

    C = cost_tensor([HALF] * 4, j0)
    plan = mmot([HALF] * 4, C)
    assert plan.value == 0.0
    assert as_map(plan) == {-1: (-1, 1, -1), 1: (1, -1, 1)}


def test_dirac_marginals_single_cell():
    plan = mmot([dirac(0), dirac(1), dirac(2)], [[[7.0]]])
    assert plan.value == 7.0 and len(plan.mass) == 1
    assert plan.joint == dirac((0, 1, 2))


def test_ot2_matches_mmot():
    rng = np.random.default_rng(0)
    for _ in range(50):
        mu, nu = random_measure(rng, int(rng.integers(1, 5))), random_measure(rng, int(rng.integers(1, 5)))
        C = rng.random((len(mu), len(nu))) * 3
        assert abs(ot2(mu, nu, C).value - mmot([mu, nu], C).value) <= 1e-9


def test_mmot_matches_vertex_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(30):
        K = int(rng.integers(2, 4))
        ms = [random_measure(rng, 2) for _ in range(K)]
        C = np.round(rng.random((2,) * K) * 5, 2)
        assert abs(mmot(ms, C).value - vertex_minimum(ms, C)) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_plans_feasible_with_zero_gap(seed):
    rng = np.random.default_rng(seed)
    mu, nu = random_measure(rng, int(rng.integers(1, 6))), random_measure(rng, int(rng.integers(1, 6)))
    plan = ot2(mu, nu, rng.random((len(mu), len(nu))))
    assert plan.marginal_error() <= 1e-9
    assert abs(plan.value - plan.dual_value) <= 1e-9
    ms = [random_measure(rng, int(rng.integers(1, 4))) for _ in range(3)]
    p3 = mmot(ms, rng.random(tuple(len(m) for m in ms)))
    assert p3.marginal_error() <= 1e-9
    assert abs(p3.value - p3.dual_value) <= 1e-9


def test_infinite_cells():
    mu = DiscreteMeasure([0, 1])
    plan = ot2(mu, mu, [[INF, 1.0], [1.0, INF]])
    assert plan.value == 1.0 and as_map(plan) == {0: 1, 1: 0}
    assert ot2(mu, mu, [[INF, INF], [1.0, 1.0]]).value == INF
    # every row reachable but the column sums cannot be met
    assert ot2(mu, mu, [[1.0, INF], [1.0, INF]]).value == INF


def test_cost_validation():
    with pytest.raises(DomainError):
        ot2(dirac(0), dirac(0), [[-1.0]])
    with pytest.raises(DomainError):
        ot2(dirac(0), HALF, [[1.0]])
    with pytest.raises(CapacityError):
        big = DiscreteMeasure(list(range(40)))
        mmot([big] * 4, np.zeros((40,) * 4))


def test_free_marginal():
    mu = DiscreteMeasure([0, 1])
    C = np.array([[3.0, 1.0], [2.0, 5.0]])
    plan = mmot([mu, None], C, {1: ("a", "b")})
    assert plan.value == 1.5
    assert plan.axis_points[1] == ("a", "b")


def test_gaussian_values():
    assert gaussian_w2_sq(0.0, 1.0, 0.0, 1.0) == 0.0
    # scalars are variances: sd 2 vs 5
    assert abs(gaussian_w2_sq(1.0, 4.0, 3.0, 25.0) - 13.0) <= 1e-12
    assert abs(gaussian_w2_sq(0.0, 3.0, 4.0, 3.0) - 16.0) <= 1e-12
    with pytest.raises(DomainError):
        gaussian_w2_sq(0.0, -1.0, 0.0, 1.0)


def test_gaussian_against_sqrtm():
    rng = np.random.default_rng(2)
    for _ in range(20):
        G, H = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
        S, T = G @ G.T, H @ H.T
        m, n = rng.normal(size=3), rng.normal(size=3)
        rS = np.real(sqrtm(S))
        ref = np.sum((m - n) ** 2) + np.trace(S + T - 2 * np.real(sqrtm(rS @ T @ rS)))
        assert abs(gaussian_w2_sq(m, S, n, T) - ref) <= 1e-8


def test_blend_tracks_slack():
    mu = DiscreteMeasure([0, 1])
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    best = ot2(mu, mu, C)
    # anti-diagonal plan, restated with its value under C
    worst = replace(ot2(mu, mu, 1.0 - C), value=1.0)
    mixed = blend(best, worst, 0.25)
    assert mixed.marginal_error() <= 1e-12
    assert abs(mixed.value - 0.25) <= 1e-12
    assert abs(mixed.epsilon - 0.25) <= 1e-12
    with pytest.raises(DomainError):
        blend(best, worst, 1.5)
