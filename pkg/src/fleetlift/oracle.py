"""Brute-force fleet dynamic programming over particle configurations.

For ``M`` indistinguishable particles the fleet state is a multiset of
ground states, i.e. a uniform empirical measure with weights in
``{0, 1/M, ..., 1}``.  ``oracle_solve`` runs backward DP over those
configurations, enumerating every input vector, with stage and terminal
costs given by transport discrepancies against the references.  It is
exponential by design and only meant as ground truth for small cases.
"""

from dataclasses import dataclass, field
import itertools
import math
import sys as _sys

import numpy as np

from .errors import CapacityError, DomainError
from .extended import INF, ext_add
from .measures import LABELED, DiscreteMeasure
from .transport import ot2

#: Default size caps: particles, states per stage, inputs per stage, horizon.
CAPS = {"M": 4, "states": 4, "inputs": 3, "horizon": 4}


def config_count(M, n_states):
    """Number of ``M``-particle configurations over ``n_states`` states.

    Multisets of size ``M``: ``C(M + n - 1, M)``, as an exact integer.
    """
    if M < 0 or n_states < 1:
        raise DomainError("need M >= 0 and at least one state", "fleet-oracle")
    return math.comb(M + n_states - 1, M)


def count_overflows(count):
    """True when ``count`` exceeds the largest finite double."""
    return count > int(_sys.float_info.max)


def bench_counts(grid, ops_per_state_input=None):
    """Rows ``(M, n_states, configurations, ops_per_state_input, overflow)``.

    ``ops_per_state_input`` is the normalized cost of one ground-DP
    sweep, one operation per state and input pair; by default it is
    ``n_states``.
    """
    rows = []
    for M, n in grid:
        count = config_count(M, n)
        ops = n if ops_per_state_input is None else ops_per_state_input
        rows.append((int(M), int(n), count, ops, count_overflows(count)))
    return rows


def particles_of(mu, M):
    """Sorted particle labels of a uniform empirical measure with ``M`` atoms."""
    counts = np.asarray(mu.weights) * M
    if np.max(np.abs(counts - np.round(counts))) > 1e-9:
        raise DomainError(f"measure is not uniform empirical with {M} particles",
                          "fleet-oracle")
    out = []
    for p, c in zip(mu.points, np.round(counts).astype(int)):
        out.extend([p] * int(c))
    return tuple(out)


@dataclass
class OracleTable:
    """Memoized fleet values ``values[(k, config)]`` and argmin input vectors.

    A configuration is a sorted tuple of state indices into ``states[k]``;
    ``inputs[(k, config)]`` lists one input index per particle in that
    order.
    """

    M: int
    values: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    lp_calls: int = 0


def _check_caps(sys, M, caps):
    N = sys.horizon
    if M > caps["M"] or N > caps["horizon"]:
        raise CapacityError(f"oracle limited to M <= {caps['M']}, N <= {caps['horizon']}",
                            "fleet-oracle")
    if any(len(s) > caps["states"] for s in sys.states):
        raise CapacityError(f"oracle limited to {caps['states']} states", "fleet-oracle")
    if any(len(u) > caps["inputs"] for u in sys.inputs):
        raise CapacityError(f"oracle limited to {caps['inputs']} inputs", "fleet-oracle")


def oracle_solve(sys, M, mu0, refs, caps=None):
    """Optimal fleet cost by enumeration.

    Parameters
    ----------
    sys : GroundSystem
    M : int
        Number of particles.
    mu0 : DiscreteMeasure
        Uniform empirical initial fleet (weights multiples of ``1/M``).
    refs : sequence of DiscreteMeasure
        ``rho_0, ..., rho_N``.
    caps : dict, optional
        Overrides for ``CAPS``.

    Returns
    -------
    (value, OracleTable)
    """
    caps = {**CAPS, **(caps or {})}
    _check_caps(sys, M, caps)
    N = sys.horizon
    refs = list(refs)
    if len(refs) != N + 1:
        raise DomainError(f"need {N + 1} references", "fleet-oracle")
    table = OracleTable(M)
    ridx = [[sys.ref_index(k, r) for r in refs[k].points] for k in range(N + 1)]
    stage_memo = {}

    def stage_cost(k, pairs):
        key = (k, pairs)
        if key not in stage_memo:
            lam = DiscreteMeasure(list(pairs), kind=LABELED)
            g = sys.stage_cost[k]
            C = np.array([[g[x, u, r] for r in ridx[k]] for (x, u) in lam.points])
            stage_memo[key] = ot2(lam, refs[k], C).value
            table.lp_calls += 1
        return stage_memo[key]

    def value(k, config):
        key = (k, config)
        if key in table.values:
            return table.values[key]
        if k == N:
            mu = DiscreteMeasure(list(config), kind=LABELED)
            C = sys.terminal_cost[np.ix_(list(mu.points), ridx[N])]
            v = ot2(mu, refs[N], C).value
            table.lp_calls += 1
            table.values[key] = v
            return v
        best, arg = INF, None
        f = sys.dynamics[k]
        seen = set()
        for us in itertools.product(range(len(sys.inputs[k])), repeat=M):
            pairs = tuple(sorted(zip(config, us)))
            if pairs in seen:
                continue
            seen.add(pairs)
            sc = stage_cost(k, pairs)
            if sc == INF or sc >= best:
                continue
            nxt = tuple(sorted(int(f[x, u]) for x, u in pairs))
            total = ext_add(sc, value(k + 1, nxt))
            if total < best:
                best, arg = total, us
        table.values[key] = best
        table.inputs[key] = arg
        return best

    start = tuple(sorted(sys.state_index(0, p) for p in particles_of(mu0, M)))
    return value(0, start), table
