"""Self-checks that reproduce the reference values and randomized identities.

Each suite returns a list of ``Check`` records.  ``verify`` runs suites
by name and builds a report that depends only on the seed (no timings),
so two runs with the same seed are byte-identical.
"""

from dataclasses import dataclass

import numpy as np

from .extended import INF, ext_round
from .ground_dp import GroundSystem, dpa_multi, dpa_simple, _reference_free
from .lifting import (integrator_fleet, lift_input, lifted_value, naive_noisy_lift,
                      w2_squared)
from .lqr import LqrSystem, lqr_classic, lqr_pair_recursion, lqr_variance_aware
from .measures import DiscreteMeasure, expected_value, pushforward
from .oracle import bench_counts, config_count, oracle_solve
from .scenario import bundled_path, dump_json, load_scenario, run
from .transport import as_map, mmot, ot2

TOL = 1e-9


@dataclass
class Check:
    id: str
    name: str
    passed: bool
    detail: str

    def to_dict(self):
        return {"id": self.id, "name": self.name, "passed": bool(self.passed),
                "detail": self.detail}


# -- random instances ------------------------------------------------------------------

def random_empirical(rng, labels, M):
    """Uniform empirical measure of ``M`` particles drawn from ``labels``."""
    idx = rng.integers(0, len(labels), size=M)
    return DiscreteMeasure([labels[i] for i in idx])


def random_measure(rng, labels, max_atoms):
    n = int(rng.integers(1, min(max_atoms, len(labels)) + 1))
    pts = [labels[i] for i in rng.choice(len(labels), size=n, replace=False)]
    w = rng.random(n) + 0.05
    return DiscreteMeasure(pts, w / w.sum())


def _random_costs(rng, shape, p_inf):
    c = np.round(rng.random(shape) * 4, 3)
    c[rng.random(shape) < p_inf] = INF
    return c


def random_finite_system(rng, max_states=3, max_inputs=2, max_refs=3, max_horizon=3,
                         p_inf=0.1):
    """Time-varying finite system with integer labels and random tables.

    Stage costs depend on the reference with probability 1/2; infinite
    entries appear with probability ``p_inf``.
    """
    N = int(rng.integers(1, max_horizon + 1))
    nx = int(rng.integers(1, max_states + 1))
    nu = int(rng.integers(1, max_inputs + 1))
    ny = int(rng.integers(1, max_refs + 1))
    X, U, Y = tuple(range(nx)), tuple(range(nu)), tuple(range(ny))
    ref_dependent = rng.random() < 0.5
    dyn, stage = [], []
    for _ in range(N):
        dyn.append(rng.integers(0, nx, size=(nx, nu)))
        g = _random_costs(rng, (nx, nu, ny if ref_dependent else 1), p_inf)
        stage.append(np.broadcast_to(g, (nx, nu, ny)).copy())
    term = _random_costs(rng, (nx, ny), p_inf)
    return GroundSystem([X] * (N + 1), [U] * N, [Y] * (N + 1), dyn, stage, term)


def random_fleet_instance(rng, max_particles=3):
    """A random system plus uniform empirical ``mu_0`` and references.

    With probability 1/2 the references are constant over the horizon, so
    the final-reference lifting is also defined.
    """
    sys = random_finite_system(rng)
    N = sys.horizon
    M = int(rng.integers(1, max_particles + 1))
    mu0 = random_empirical(rng, sys.states[0], M)
    if rng.random() < 0.5:
        refs = [random_empirical(rng, sys.refs[0], M)] * (N + 1)
    else:
        refs = [random_empirical(rng, sys.refs[k], M) for k in range(N + 1)]
    return sys, M, mu0, refs


def constant_refs(refs):
    return all(r == refs[-1] for r in refs)


# -- suites ----------------------------------------------------------------------------

def _bundled(name):
    return load_scenario(bundled_path(name))


def suite_counterexamples(seed=0):
    out = []
    r = run(_bundled("counterexample_multimarginal"), mode="both", seed=seed)
    v, vt = r.values.get("V0"), r.values.get("V0_two")
    out.append(Check("1", "multi-reference value 0 and final-reference value 2",
                     r.status == "ok" and ext_round(v) == 0.0 and ext_round(vt) == 2.0,
                     f"V0={v!r} V0_two={vt!r}"))

    sc = _bundled("noise_counterexample")
    naive, true = naive_noisy_lift(sc.system, sc.mu0, sc.refs)
    out.append(Check("2", "noisy counterexample: naive 1, true 0",
                     ext_round(naive) == 1.0 and ext_round(true) == 0.0,
                     f"naive={naive!r} true={true!r}"))

    sc = _bundled("split_mass")
    table = dpa_simple(sc.system)
    lv = lifted_value(sc.system, table, sc.mu0, sc.refs[-1], 0)
    lam = lift_input(lv.plan, table, 0)
    expect = DiscreteMeasure([(0, -1), (0, 1)], [0.5, 0.5])
    ok = lam.joint.allclose(expect, 1e-12) and as_map(lv.plan) is None
    out.append(Check("3", "single atom split evenly over inputs -1 and +1", ok,
                     f"Lambda0={lam.joint!r} map={as_map(lv.plan)!r}"))
    return out


def suite_published_values(seed=0):
    out = []
    sc = _bundled("counterexample_multimarginal")
    r = run(sc, mode="both", seed=seed)
    out.append(Check("P1", "multi-reference value", ext_round(r.values["V0"]) == 0.0,
                     f"{r.values['V0']!r}"))
    out.append(Check("P2", "final-reference value", ext_round(r.values["V0_two"]) == 2.0,
                     f"{r.values['V0_two']!r}"))
    sc = _bundled("noise_counterexample")
    naive, true = naive_noisy_lift(sc.system, sc.mu0, sc.refs)
    out.append(Check("P3", "naive noisy lifting", ext_round(naive) == 1.0, f"{naive!r}"))
    out.append(Check("P4", "noisy fleet optimum", ext_round(true) == 0.0, f"{true!r}"))
    c = lqr_pair_recursion(LqrSystem(1, 1.0, 1.0, 1.0, 1.0))
    coef = (float(c.Px[0][0, 0]), float(c.Py[0][0, 0]), float(c.Pxy[0][0, 0]))
    ok = all(abs(a - b) <= 1e-12 for a, b in zip(coef, (0.5, 0.5, -0.5)))
    out.append(Check("P5", "one-step scalar pair cost (x - y)^2 / 2", ok, f"{coef!r}"))
    n = config_count(10, 10)
    out.append(Check("P6", "configurations of 10 particles on 10 states", n == 92378, str(n)))
    return out


def suite_integrator(seed=0, trials=100):
    rng = np.random.default_rng(seed)
    worst, landed = 0.0, True
    for _ in range(trials):
        M = int(rng.integers(2, 9))
        N = int(rng.integers(2, 6))
        xs, ys = rng.normal(size=(M, 2)), rng.normal(size=(M, 2))
        roll, values, pos = integrator_fleet(xs, ys, N)
        for k in range(N):
            ref = (N - k) / N ** 2 * w2_squared(pos[k], ys)
            worst = max(worst, abs(values[k] - ref))
        landed &= roll.terminal_cost == 0.0 and DiscreteMeasure(pos[-1]).allclose(
            DiscreteMeasure(ys), 1e-12)
        worst = max(worst, abs(roll.total - values[0]))
    return [Check("4", "integrator value ((N-k)/N^2) W2^2 and exact landing",
                  worst <= TOL and landed, f"max_error={worst:.3e} landed={landed}")]


def suite_oracle_equivalence(seed=0, trials=200):
    rng = np.random.default_rng(seed)
    mismatches, fractional, above, dominance_bad, compared, strict = 0, 0, 0, 0, 0, 0
    for _ in range(trials):
        sys, M, mu0, refs = random_fleet_instance(rng)
        plan = lifted_value(sys, dpa_multi(sys), mu0, refs, 0).plan
        lv = plan.value
        ov, _ = oracle_solve(sys, M, mu0, refs)
        if ext_round(lv) != ext_round(ov):
            mismatches += 1
            # M particles cannot follow a plan with mass finer than 1/M
            units = plan.mass * M
            fractional += bool(np.max(np.abs(units - np.round(units)), initial=0.0) > 1e-9)
        above += ext_round(lv) > ext_round(ov)
        if constant_refs(refs):
            frozen = not all(_reference_free(g) for g in sys.stage_cost)
            t = lifted_value(sys, dpa_simple(sys, freeze_reference=frozen), mu0, refs[-1], 0).value
            compared += 1
            if ext_round(t) < ext_round(lv):
                dominance_bad += 1
            strict += ext_round(t) > ext_round(lv)
    r = run(_bundled("counterexample_multimarginal"), mode="both", seed=seed)
    strict_bundled = r.values["V0_two"] > r.values["V0"] + TOL
    return [
        Check("5", "lifted multi-reference value equals brute-force fleet optimum",
              mismatches == 0, f"instances={trials} mismatches={mismatches} "
              f"off_lattice_plans={fractional} lifted_above_oracle={above}"),
        Check("9", "final-reference value never below multi-reference value",
              dominance_bad == 0 and compared > 0 and strict_bundled,
              f"compared={compared} violations={dominance_bad} strict={strict} "
              f"bundled_strict={strict_bundled}"),
    ]


def _random_cost(rng, shape):
    return np.round(rng.random(shape) * 5, 3)


def suite_lemmas(seed=0, trials=100):
    rng = np.random.default_rng(seed)
    e1 = e2 = e3 = 0.0
    for _ in range(trials):
        X, Z, Y = tuple(range(5)), tuple(range(4)), tuple(range(5))
        mu = random_measure(rng, X, 5)
        nu = random_measure(rng, Y, 5)
        lmap = {x: int(rng.integers(0, len(Z))) for x in X}
        c = _random_cost(rng, (len(Z), len(Y)))
        pushed = pushforward(mu, lmap)
        lhs = ot2(pushed, nu, c[np.ix_(list(pushed.points), list(nu.points))]).value
        comp = np.array([[c[lmap[x], y] for y in nu.points] for x in mu.points])
        rhs = ot2(mu, nu, comp).value
        e1 = max(e1, abs(lhs - rhs))

        v = {x: float(rng.random() * 3) for x in X}
        lhs = expected_value(mu, v) + ot2(pushed, nu, c[np.ix_(list(pushed.points),
                                                               list(nu.points))]).value
        rhs = ot2(mu, nu, comp + np.array([[v[x]] for x in mu.points])).value
        e2 = max(e2, abs(lhs - rhs))

        A, B, F, Zs = (tuple(range(4)),) * 4
        m1, m2 = random_measure(rng, A, 4), random_measure(rng, B, 4)
        nz = random_measure(rng, Zs, 4)
        c1 = _random_cost(rng, (len(m1), len(nz)))
        c2 = _random_cost(rng, (len(m1), len(m2), len(F)))
        lhs = ot2(m1, nz, c1).value + mmot([m1, m2, None], c2, {2: F}).value
        cc = c2[:, :, :, None] + c1[:, None, None, :]
        rhs = mmot([m1, m2, None, nz], cc, {2: F}).value
        e3 = max(e3, abs(lhs - rhs))
    return [
        Check("6a", "transport after a pushforward equals transport with composed cost",
              e1 <= TOL, f"max_error={e1:.3e}"),
        Check("6b", "expectation plus pushed transport equals transport with added cost",
              e2 <= TOL, f"max_error={e2:.3e}"),
        Check("6c", "sum of discrepancies equals the joint free-marginal problem",
              e3 <= TOL, f"max_error={e3:.3e}"),
    ]


def _pair_rollout_cost(sys, c, x, y):
    """Cost of one particle following the pair feedback from ``x`` towards ``y``."""
    total = 0.0
    for k in range(sys.N):
        u = c.input(k, x, y)
        total += float(u @ sys.R[k] @ u)
        x = sys.A[k] @ x + sys.B[k] @ u
    return total + float((x - y) @ sys.P_N @ (x - y))


def random_lqr(rng, n=None):
    n = n or int(rng.integers(1, 3))
    p = int(rng.integers(1, n + 1))
    N = int(rng.integers(1, 6))
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, p))
    L = rng.normal(size=(p, p))
    R = L @ L.T + 0.1 * np.eye(p)
    G = rng.normal(size=(n, n))
    return LqrSystem(N, A, B, R, G @ G.T + 0.1 * np.eye(n))


def suite_lqr(seed=0, trials=100):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        sys = random_lqr(rng)
        c = lqr_pair_recursion(sys)
        x, y = rng.normal(size=sys.n), rng.normal(size=sys.n)
        ref = c.cost(0, x, y)
        worst = max(worst, abs(_pair_rollout_cost(sys, c, x, y) - ref) / max(1.0, abs(ref)))
    c = lqr_pair_recursion(LqrSystem(1, 1.0, 1.0, 1.0, 1.0))
    got = (c.Px[0][0, 0], c.Py[0][0, 0], c.Pxy[0][0, 0], c.Kx[0][0, 0], c.Ky[0][0, 0])
    one_step = all(abs(a - b) <= 1e-12 for a, b in zip(got, (0.5, 0.5, -0.5, 0.5, -0.5)))
    gap = 0.0
    for _ in range(20):
        sys = random_lqr(rng)
        Qm = rng.normal(size=(sys.n, sys.n))
        Qm = Qm @ Qm.T
        P, K = lqr_classic(LqrSystem(sys.N, sys.A, sys.B, sys.R, sys.P_N, Qm))
        P1, P2, K1, K2 = lqr_variance_aware(sys, Qm, Qm, sys.P_N, sys.P_N)
        for k in range(sys.N):
            gap = max(gap, np.abs(P1[k] - P[k]).max(), np.abs(P2[k] - P[k]).max(),
                      np.abs(K1[k] - K[k]).max(), np.abs(K2[k] - K[k]).max())
        gap = max(gap, np.abs(P1[sys.N] - P[sys.N]).max())
    return [
        Check("7a", "pair feedback rollout cost equals c_0(x, y)", worst <= 1e-8,
              f"max_rel_error={worst:.3e}"),
        Check("7b", "one-step scalar pair cost is (x - y)^2 / 2", one_step,
              "Px,Py,Pxy,Kx,Ky=" + ",".join(f"{float(v):.15g}" for v in got)),
        Check("7c", "variance-aware recursion with equal weights is classic LQR",
              gap <= 1e-12, f"max_gap={gap:.3e}"),
    ]


def suite_complexity(seed=0):
    rows = bench_counts([(1, 10), (10, 10), (1000, 10 ** 7), (60, 10 ** 4), (70, 10 ** 5)])
    limit = int(np.finfo(float).max)
    exact = all(r[4] == (r[2] > limit) for r in rows)
    ok = config_count(10, 10) == 92378 and config_count(1, 10) == 10 and rows[2][4] and exact
    # Boundary: the first M whose count passes the largest double is marked, its
    # predecessor is not.
    n = 10 ** 4
    M = _first_overflow(n)
    edge = bench_counts([(M - 1, n), (M, n)])
    ok &= (not edge[0][4]) and edge[1][4]
    return [Check("8", "configuration counts and overflow markers", ok,
                  f"config_count(10,10)={config_count(10, 10)} first_overflow_M(n={n})={M}")]


def _first_overflow(n):
    lo, hi = 1, 1
    limit = int(np.finfo(float).max)
    while config_count(hi, n) <= limit:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if config_count(mid, n) > limit:
            hi = mid
        else:
            lo = mid + 1
    return lo


SUITES = {
    "counterexamples": suite_counterexamples,
    "paper-values": suite_published_values,
    "integrator": suite_integrator,
    "oracle-equivalence": suite_oracle_equivalence,
    "lemmas": suite_lemmas,
    "lqr": suite_lqr,
    "complexity": suite_complexity,
}


def verify(suite="all", seed=0):
    """Run one suite (or ``"all"``) and return ``(report_dict, all_passed)``."""
    names = list(SUITES) if suite == "all" else [suite]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite {unknown[0]!r}; choose from {', '.join(SUITES)}")
    suites = {}
    passed = True
    for name in names:
        checks = SUITES[name](seed=seed)
        suites[name] = [c.to_dict() for c in checks]
        passed &= all(c.passed for c in checks)
    return {"seed": seed, "passed": passed, "suites": suites}, passed


def format_table(report):
    lines = []
    for name, checks in report["suites"].items():
        for c in checks:
            mark = "PASS" if c["passed"] else "FAIL"
            lines.append(f"{mark}  [{name}] {c['id']}: {c['name']} ({c['detail']})")
    return "\n".join(lines)


def report_json(report):
    return dump_json(report)


__all__ = ["Check", "SUITES", "verify", "format_table", "report_json",
           "random_finite_system", "random_fleet_instance", "random_empirical",
           "random_measure", "random_lqr", "constant_refs"]
