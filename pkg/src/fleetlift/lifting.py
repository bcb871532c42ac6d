"""Fleet-level optimal control from a ground cost-to-go plus transport.

The probability-space cost-to-go at stage ``k`` is the transport
discrepancy between the fleet ``mu_k`` and the remaining references, with
the ground cost-to-go table as transportation cost.  An optimal plan,
pushed through the ground argmin policy, gives an optimal state-input
distribution.  Rollouts apply that construction stage by stage
(feedback) or once at ``k = 0`` (open loop).
"""

from dataclasses import dataclass, field
from fractions import Fraction
import itertools
import math

import numpy as np

from .errors import CapacityError, DomainError, InfeasibleError, ModeError
from .extended import INF, ext_add, ext_equal
from .ground_dp import MULTI, FROZEN, STOCHASTIC, dpa_stochastic
from .measures import LABELED, DiscreteMeasure, StateInputDistribution, pushforward
from .transport import as_map, empirical_ot, mmot, ot2

TWO = "two-marginal"


@dataclass
class LiftedValue:
    stage: int
    value: float
    plan: object
    mode: str


@dataclass
class FleetRollout:
    """Trace of a fleet rollout.

    ``stage_costs[k]`` is the transport discrepancy between ``inputs[k]``
    and ``rho_k`` under the stage cost; ``plan_stage_costs[k]`` integrates
    the stage cost against the allocation plan actually used.  The two can
    differ when several allocations are optimal; ``flags`` lists stages
    where they do.  ``slack`` sums the declared suboptimality of the plans
    used, so ``total <= V_0 + slack``.
    """

    measures: list
    inputs: list
    plans: list
    stage_costs: list
    terminal_cost: float
    plan_stage_costs: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    slack: float = 0.0

    @property
    def total(self):
        return ext_add(*self.stage_costs, self.terminal_cost)


def _as_list(refs):
    if isinstance(refs, DiscreteMeasure):
        return [refs]
    return list(refs)


def _support_index(labels, measure, what):
    lookup = {p: i for i, p in enumerate(labels)}
    try:
        return [lookup[p] for p in measure.points]
    except KeyError as exc:
        raise DomainError(f"{what} has atom {exc.args[0]!r} outside its space", "lifting") from None


def lifted_value(sys, table, mu, refs, k=0):
    """Probability-space cost-to-go ``V_k(mu, rho_k, ..., rho_N)``.

    For a multi-reference table ``refs`` lists ``rho_k, ..., rho_N`` and the
    value is a multi-marginal transport problem with cost ``j_k``.  For the
    other table kinds ``refs`` is ``rho_N`` (or a one-element list) and the
    value is the two-marginal discrepancy with cost ``j_k(x, r_N)``.
    """
    refs = _as_list(refs)
    N = sys.horizon
    xi = _support_index(sys.states[k], mu, f"mu_{k}")
    if table.mode == MULTI:
        if len(refs) != N - k + 1:
            raise ModeError(f"multi mode at stage {k} needs {N - k + 1} references, "
                            f"got {len(refs)}", "lifting")
        axes = [xi] + [_support_index(sys.refs[k + i], r, f"rho_{k + i}")
                       for i, r in enumerate(refs)]
        C = table.values[k][np.ix_(*axes)]
        plan = mmot([mu] + refs, C)
        return LiftedValue(k, plan.value, plan, MULTI)
    if len(refs) != 1:
        raise ModeError(f"{table.mode} table takes only rho_N, got {len(refs)} references",
                        "lifting")
    ri = _support_index(sys.refs[N], refs[0], "rho_N")
    plan = ot2(mu, refs[0], table.values[k][np.ix_(xi, ri)])
    return LiftedValue(k, plan.value, plan, TWO)


def _cell_refs(plan, cell):
    rs = tuple(plan.axis_points[a][i] for a, i in enumerate(cell) if a > 0)
    return rs if len(rs) > 1 else rs[0]


def lift_input(plan, table, k=0):
    """State-input distribution ``(proj_x, u_k)#gamma`` from a plan.

    Each positive-mass cell ``(x, r...)`` sends its mass to
    ``(x, u_k(x, r...))`` with ``u_k`` the ground argmin.  The slack of the
    result is the plan's slack (ground minima are attained exactly).
    """
    if not plan.feasible:
        raise InfeasibleError("cannot lift an infinite-cost plan", "lifting", stage=k)
    pts, ws = [], []
    for cell, w in zip(plan.cells, plan.mass):
        x = plan.axis_points[0][cell[0]]
        refs = _cell_refs(plan, cell)
        if table.cost_to_go(k, x, refs) == INF:
            raise InfeasibleError(f"cost-to-go is infinite at {(x, refs)!r}", "lifting", stage=k)
        pts.append((x, table.input(k, x, refs)))
        ws.append(w)
    joint = DiscreteMeasure(pts, np.asarray(ws) / np.sum(ws), kind=LABELED)
    return StateInputDistribution(joint, plan.marginals[0], tol=1e-9)


def _stage_ref(table, refs, k):
    if table.mode == MULTI:
        return refs[k]
    return refs[-1]


def stage_discrepancy(sys, k, lam, rho):
    """``K_{g_k}(Lambda_k, rho)``: transport between (x, u) pairs and references."""
    xs = {p: i for i, p in enumerate(sys.states[k])}
    us = {p: i for i, p in enumerate(sys.inputs[k])}
    ri = _support_index(sys.refs[k], rho, f"rho_{k}")
    g = sys.stage_cost[k]
    C = np.array([[g[xs[x], us[u], r] for r in ri] for (x, u) in lam.joint.points])
    return ot2(lam.joint, rho, C)


def terminal_discrepancy(sys, mu, rho):
    N = sys.horizon
    xi = _support_index(sys.states[N], mu, "mu_N")
    ri = _support_index(sys.refs[N], rho, "rho_N")
    return ot2(mu, rho, sys.terminal_cost[np.ix_(xi, ri)])


def _advance(sys, k, lam):
    xs = {p: i for i, p in enumerate(sys.states[k])}
    us = {p: i for i, p in enumerate(sys.inputs[k])}
    f = sys.dynamics[k]
    return pushforward(lam.joint, lambda p: sys.states[k + 1][f[xs[p[0]], us[p[1]]]])


def _plan_integrand(sys, k, plan, lam_pts, table, refs):
    """``int g_k(x, u(x, r...), r_k) d gamma`` over the allocation plan."""
    xs = {p: i for i, p in enumerate(sys.states[k])}
    us = {p: i for i, p in enumerate(sys.inputs[k])}
    rk = {p: i for i, p in enumerate(sys.refs[k])}
    total = 0.0
    for cell, w in zip(plan.cells, plan.mass):
        x = plan.axis_points[0][cell[0]]
        cr = _cell_refs(plan, cell)
        u = table.input(k, x, cr)
        if table.mode == MULTI:
            r = plan.axis_points[1][cell[1]]
        elif table.mode == FROZEN:
            r = cr
        else:
            r = sys.refs[k][0]
        total = ext_add(total, w * sys.stage_cost[k][xs[x], us[u], rk[r]])
    return total


def rollout_feedback(sys, table, mu0, refs, plan_override=None):
    """Re-solve the allocation at every stage and apply the lifted input.

    ``refs`` is ``[rho_0, ..., rho_N]`` for a multi-reference table and
    ``rho_N`` otherwise (stage costs then see ``rho_N``).
    ``plan_override(k, plan)``, if given, may replace the optimal plan by
    a suboptimal one (its ``epsilon`` is then summed in ``slack``).
    """
    refs = _as_list(refs)
    N = sys.horizon
    if table.mode == STOCHASTIC:
        raise ModeError("feedback rollout needs a deterministic table", "lifting")
    if table.mode == MULTI and len(refs) != N + 1:
        raise ModeError(f"multi mode needs {N + 1} references", "lifting")
    mu = mu0
    out = FleetRollout([mu0], [], [], [], 0.0)
    for k in range(N):
        lv = lifted_value(sys, table, mu, refs[k:] if table.mode == MULTI else refs, k)
        if not lv.plan.feasible:
            raise InfeasibleError(f"fleet cost-to-go is infinite at stage {k}", "lifting", stage=k)
        plan = lv.plan if plan_override is None else plan_override(k, lv.plan)
        out.slack += plan.epsilon
        lam = lift_input(plan, table, k)
        sc = stage_discrepancy(sys, k, lam, _stage_ref(table, refs, k)).value
        pc = _plan_integrand(sys, k, plan, lam, table, refs)
        out.plans.append(plan)
        out.inputs.append(lam)
        out.stage_costs.append(sc)
        out.plan_stage_costs.append(pc)
        if not ext_equal(sc, pc):
            out.flags.append(k)
        mu = _advance(sys, k, lam)
        out.measures.append(mu)
    out.terminal_cost = terminal_discrepancy(sys, mu, refs[-1]).value
    return out


def rollout_openloop(sys, table, mu0, refs, particles=None):
    """Fix the stage-0 allocation and let every packet follow its references.

    Each positive-mass cell of the stage-0 plan is a packet that applies the
    ground argmin input for its own reference tuple until the horizon.

    Parameters
    ----------
    particles : int, optional
        Fleet size ``M`` of a uniform empirical ``mu0``.  Needed when the
        stage-0 plan splits an atom: every cell must then carry a multiple
        of ``1/M`` so packets are whole particles.
    """
    refs = _as_list(refs)
    N = sys.horizon
    if table.mode == STOCHASTIC:
        raise ModeError("open-loop rollout needs a deterministic table", "lifting")
    lv = lifted_value(sys, table, mu0, refs if table.mode == MULTI else refs[-1:], 0)
    plan = lv.plan
    if not plan.feasible:
        raise InfeasibleError("fleet cost-to-go is infinite at stage 0", "lifting", stage=0)
    if as_map(plan) is None:
        if particles is None:
            raise ModeError("stage-0 plan splits mass; pass the fleet size to track particles",
                            "lifting")
        units = plan.mass * particles
        if np.max(np.abs(units - np.round(units))) > 1e-9:
            raise ModeError("plan cells are not whole particles", "lifting")

    packets = []
    for cell, w in zip(plan.cells, plan.mass):
        packets.append([plan.axis_points[0][cell[0]], _cell_refs(plan, cell), float(w)])
    out = FleetRollout([mu0], [], [plan], [], 0.0)
    for k in range(N):
        pts, ws = [], []
        for pk in packets:
            x, cr, w = pk
            key = cr[k:] if table.mode == MULTI else cr
            u = table.input(k, x, key)
            pts.append((x, u))
            ws.append(w)
            pk[0] = sys.step(k, x, u)
        joint = DiscreteMeasure(pts, np.asarray(ws) / np.sum(ws), kind=LABELED)
        lam = StateInputDistribution(joint, out.measures[-1], tol=1e-9)
        out.inputs.append(lam)
        out.stage_costs.append(stage_discrepancy(sys, k, lam, _stage_ref(table, refs, k)).value)
        mu = _advance(sys, k, lam)
        out.measures.append(mu)
    out.terminal_cost = terminal_discrepancy(sys, out.measures[-1], refs[-1]).value
    return out


# -- continuous-state empirical fleets -------------------------------------------------

def rollout_feedback_continuous(x0, targets, N, cost_to_go, policy, dynamics, stage_cost,
                                terminal_cost=None):
    """Feedback rollout of ``M`` particles in R^d towards ``M`` targets.

    The ground problem is solved analytically: ``cost_to_go(k, x, r)``,
    ``policy(k, x, r)``, ``dynamics(k, x, u)`` and ``stage_cost(k, x, u, r)``
    act on numpy vectors.  The allocation at every stage is an assignment
    between particles and targets (uniform empirical measures of equal
    size), re-solved from the current positions.  Stage and terminal costs
    are discrepancies against the targets, also by assignment.
    ``terminal_cost(x, r)`` defaults to the hard constraint ``x == r``
    (within 1e-9).

    Returns
    -------
    (FleetRollout, values, positions)
        ``values[k]`` is the lifted value at stage ``k`` and
        ``positions[k]`` the ``(M, d)`` particle array.
    """
    xs = np.atleast_2d(np.asarray(x0, dtype=float))
    ys = np.atleast_2d(np.asarray(targets, dtype=float))
    if xs.shape[0] != ys.shape[0]:
        raise DomainError("need as many targets as particles", "lifting")
    if terminal_cost is None:
        def terminal_cost(x, r):
            return 0.0 if np.allclose(x, r, rtol=0.0, atol=1e-9) else INF
    M = xs.shape[0]
    out = FleetRollout([DiscreteMeasure(xs)], [], [], [], 0.0)
    values, positions = [], [xs]
    for k in range(N):
        C = np.array([[cost_to_go(k, x, y) for y in ys] for x in xs])
        value, perm = empirical_ot(C)
        if perm is None:
            raise InfeasibleError(f"fleet cost-to-go is infinite at stage {k}", "lifting", stage=k)
        values.append(value)
        us = np.array([np.atleast_1d(policy(k, xs[i], ys[perm[i]])) for i in range(M)])
        out.plans.append(perm)
        out.inputs.append(DiscreteMeasure(np.hstack([xs, us])))
        G = np.array([[stage_cost(k, x, u, y) for y in ys] for x, u in zip(xs, us)])
        out.stage_costs.append(empirical_ot(G)[0])
        out.plan_stage_costs.append(float(np.mean([G[i, perm[i]] for i in range(M)])))
        xs = np.array([dynamics(k, x, u) for x, u in zip(xs, us)])
        positions.append(xs)
        out.measures.append(DiscreteMeasure(xs))
    T = np.array([[terminal_cost(x, y) for y in ys] for x in xs])
    out.terminal_cost = empirical_ot(T)[0]
    return out, values, positions


def integrator_fleet(x0, targets, N):
    """Feedback rollout of the integrator fleet with a hard terminal target."""
    from .lqr import integrator_cost_to_go, integrator_input

    return rollout_feedback_continuous(
        x0, targets, N,
        lambda k, x, r: integrator_cost_to_go(N, k, x, r),
        lambda k, x, r: integrator_input(N, k, x, r),
        lambda k, x, u: x + u,
        lambda k, x, u, r: float(u @ u))


def w2_squared(xs, ys):
    """Squared 2-Wasserstein distance between equal-size uniform point clouds."""
    xs, ys = np.atleast_2d(xs), np.atleast_2d(ys)
    C = ((xs[:, None, :] - ys[None, :, :]) ** 2).sum(axis=2)
    value, _ = empirical_ot(C)
    return value


# -- noisy systems --------------------------------------------------------------------

#: Cap on the number of input allocations enumerated per measure.
NOISY_ENUM_CAP = 100_000
#: Finest mass lattice used to split atoms between inputs.
LATTICE_MAX = 64


def _noisy_stage(sys, k, pairs, weights, rho):
    """``K_{g_k}(Lambda (x) xi_k, rho)`` with the noise integrated exactly."""
    xi = sys.noise[k]
    ri = _support_index(sys.refs[k], rho, f"rho_{k}")
    pts, ws, rows = [], [], []
    for (x, u), w in zip(pairs, weights):
        for l, wl in enumerate(xi.weights):
            pts.append((x, u, l))
            ws.append(w * wl)
    joint = DiscreteMeasure(pts, ws, kind=LABELED)
    g = sys.stage_cost[k]
    for (x, u, l) in joint.points:
        rows.append([g[x, u, l, r] for r in ri])
    return ot2(joint, rho, np.array(rows)).value


def _lattice(weights, max_den=LATTICE_MAX):
    """Smallest ``q`` with every weight a multiple of ``1/q`` (``None`` if too fine)."""
    q = 1
    for w in weights:
        f = Fraction(float(w)).limit_denominator(max_den)
        if abs(float(f) - w) > 1e-12:
            return None
        q = math.lcm(q, f.denominator)
        if q > max_den:
            return None
    return q


def _splits(units, n):
    """All ways to share ``units`` indistinguishable units among ``n`` inputs."""
    for bars in itertools.combinations(range(units + n - 1), n - 1):
        prev, out = -1, []
        for b in bars + (units + n - 1,):
            out.append(b - prev - 1)
            prev = b
        yield tuple(out)


def _allocations(weights, nu, q):
    """Input allocations per atom: lists of ``(input, mass)``."""
    if q is None:
        per_atom = [[((u, w),) for u in range(nu)] for w in weights]
    else:
        per_atom = []
        for w in weights:
            units = int(round(w * q))
            opts = []
            for split in _splits(units, nu):
                opts.append(tuple((u, c / q) for u, c in enumerate(split) if c))
            per_atom.append(opts)
    count = 1
    for opts in per_atom:
        count *= len(opts)
    if count > NOISY_ENUM_CAP:
        raise CapacityError(f"{count} input allocations exceed {NOISY_ENUM_CAP}", "lifting")
    return itertools.product(*per_atom)


def _noisy_value(sys, refs, k, mu_idx, memo):
    """Probability-space DP over lattice-split inputs with exact noise."""
    key = (k, mu_idx)
    if key in memo:
        return memo[key]
    N = sys.horizon
    atoms = [a for a, _ in mu_idx]
    weights = [w for _, w in mu_idx]
    if k == N:
        mu = DiscreteMeasure([sys.states[N][a] for a in atoms], weights)
        ri = _support_index(sys.refs[N], refs[-1], "rho_N")
        val = ot2(mu, refs[-1], sys.terminal_cost[np.ix_(atoms, ri)]).value
        memo[key] = val
        return val
    rho_k = refs[k] if len(refs) == N + 1 else refs[-1]
    q = _lattice(list(weights) + [w for r in refs for w in r.weights])
    best = INF
    xi = sys.noise[k].weights
    for alloc in _allocations(weights, len(sys.inputs[k]), q):
        pairs, masses = [], []
        for x, shares in zip(atoms, alloc):
            for u, m in shares:
                pairs.append((x, u))
                masses.append(m)
        stage = _noisy_stage(sys, k, pairs, masses, rho_k)
        if stage == INF or stage >= best:
            continue
        nxt = {}
        for (x, u), w in zip(pairs, masses):
            for l, wl in enumerate(xi):
                y = int(sys.dynamics[k][x, u, l])
                nxt[y] = nxt.get(y, 0.0) + w * wl
        nxt_idx = tuple(sorted((y, round(m, 15)) for y, m in nxt.items()))
        best = min(best, ext_add(stage, _noisy_value(sys, refs, k + 1, nxt_idx, memo)))
    memo[key] = best
    return best


def naive_noisy_lift(sys, mu0, refs):
    """Naive two-marginal lifting vs. the fleet optimum for a noisy system.

    Returns ``(naive, true)``.  ``naive`` transports ``mu0`` to ``rho_N``
    with the expected-cost table of ``dpa_stochastic``.  ``true`` is the
    probability-space dynamic program with the noise propagated exactly
    (``mu_{k+1} = f_k # (Lambda_k x xi_k)``) and stage costs
    ``K_{g_k}(Lambda_k x xi_k, rho_k)``.  Each atom's mass may be shared
    between inputs in multiples of ``1/q``, ``q`` the common denominator of
    the current weights and the reference weights (at most
    ``LATTICE_MAX``; beyond that every atom takes a single input).  Any
    such restriction makes ``true`` an upper bound on the
    probability-space optimum.  It is exact when it meets the lower bound
    0, and for deterministic systems whose transport vertices sit on the
    lattice.

    ``refs`` is ``rho_N`` or ``[rho_0, ..., rho_N]``.
    """
    refs = _as_list(refs)
    N = sys.horizon
    if len(refs) not in (1, N + 1):
        raise ModeError(f"need rho_N or {N + 1} references", "lifting")
    table = dpa_stochastic(sys)
    naive = lifted_value(sys, table, mu0, refs[-1], 0).value
    mu_idx = tuple(sorted(
        (i, round(float(w), 15)) for i, w in zip(_support_index(sys.states[0], mu0, "mu_0"),
                                                  mu0.weights)))
    true = _noisy_value(sys, refs, 0, mu_idx, {})
    return naive, true
