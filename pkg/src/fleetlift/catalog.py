"""Builders for the bundled scenario documents.

Each function returns a JSON-ready dict; the files in ``scenarios/`` are
``dump_json`` of these, and a test keeps the two in sync.
"""

from .scenario import INF_TOKEN


def _cost(v):
    return INF_TOKEN if v == float("inf") else v


def _measure(atoms):
    return {"support": "labeled",
            "atoms": [{"point": list(p) if isinstance(p, tuple) else p, "weight": w}
                      for p, w in atoms]}


def _finite(states, inputs, refs, f, g, g_N):
    def lab(x):
        return list(x) if isinstance(x, tuple) else x
    return {
        "states": [lab(x) for x in states],
        "inputs": [lab(u) for u in inputs],
        "references": [lab(r) for r in refs],
        "dynamics": [[lab(f(x, u)) for u in inputs] for x in states],
        "stage_cost": [[[_cost(g(x, u, r)) for r in refs] for u in inputs] for x in states],
        "terminal_cost": [[_cost(g_N(x, r)) for r in refs] for x in states],
    }


def counterexample_multimarginal():
    """Constant references still need every marginal.

    Particles on {-1, 0, 1} either flip sign (u = -1) or collapse to the
    origin (u = 0); every stage pays the squared distance to a reference
    ``rho = (d_-1 + d_1) / 2``.  Flipping keeps the fleet equal to ``rho``
    at zero cost, but a cost-to-go indexed by the final reference alone
    cannot see that.
    """
    X = (-1, 0, 1)
    rho = _measure([(-1, 0.5), (1, 0.5)])
    return {
        "name": "counterexample_multimarginal",
        "description": "Two marginals are not enough: multi-reference value 0, "
                       "final-reference value 2.",
        "kind": "finite", "horizon": 2,
        "system": _finite(X, (-1, 0), X, lambda x, u: x * u,
                          lambda x, u, r: float((x - r) ** 2),
                          lambda x, r: float((x - r) ** 2)),
        "mu0": rho, "refs": [rho, rho, rho],
        "options": {"mode": "both", "rollout": "feedback", "particles": 2, "oracle": True},
    }


def split_mass():
    """A single atom has to be split between two references."""
    X = (-1, 0, 1)
    return {
        "name": "split_mass",
        "description": "One-step steering of d_0 to (d_-1 + d_1) / 2 with free inputs.",
        "kind": "finite", "horizon": 1,
        "system": _finite(X, X, X, lambda x, u: u, lambda x, u, r: 0.0,
                          lambda x, r: float((x - r) ** 2)),
        "mu0": _measure([(0, 1.0)]),
        "refs": _measure([(-1, 0.5), (1, 0.5)]),
        "options": {"mode": "two", "rollout": "feedback"},
    }


def noise_counterexample():
    """Expected-cost tables hide an allocation that noise makes free."""
    X = (-2, -1, 1, 2)
    inf = float("inf")
    noise = _measure([(1, 0.5), (2, 0.5)])

    def f(x, u, w):
        return w if x < 0 else u

    def g(x, u, w, r):
        return 2.0 if x > 0 and u == -x else 0.0

    W = (1, 2)
    return {
        "name": "noise_counterexample",
        "description": "Noisy drift: naive final-reference lifting costs 1, the fleet optimum 0.",
        "kind": "noisy", "horizon": 2,
        "system": {
            "states": list(X), "inputs": list(X), "references": list(X),
            "noise": noise,
            "dynamics": [[[f(x, u, w) for w in W] for u in X] for x in X],
            "stage_cost": [[[[g(x, u, w, r) for r in X] for w in W] for u in X] for x in X],
            "terminal_cost": [[_cost(0.0 if x == r else inf) for r in X] for x in X],
        },
        "mu0": _measure([(-2, 0.5), (-1, 0.5)]),
        "refs": _measure([(-2, 0.5), (-1, 0.5)]),
    }


def robots_grid(alpha=0.5):
    """Robots on three cells split evenly between the two ends.

    Each robot flips its position (u = -1, costs ``alpha``) or parks at the
    origin for good (u = 0, free); the terminal cost is ``|x - r|``.
    """
    X = (-1, 0, 1)
    return {
        "name": "robots_grid",
        "description": "Robots in a three-cell grid, input effort plus terminal distance.",
        "kind": "finite", "horizon": 2,
        "system": _finite(X, (-1, 0), X, lambda x, u: x * u,
                          lambda x, u, r: alpha * abs(u),
                          lambda x, r: float(abs(x - r))),
        "mu0": _measure([(-1, 0.75), (1, 0.25)]),
        "refs": _measure([(-1, 0.5), (1, 0.5)]),
        "options": {"mode": "both", "rollout": "feedback", "particles": 4, "oracle": True},
    }


def integrator(M=6, dim=2, horizon=4):
    return {
        "name": "integrator",
        "description": "Integrator particles x+ = x + u with effort |u|^2 and a hard target; "
                       "positions drawn from the run seed.",
        "kind": "integrator", "horizon": horizon,
        "system": {"M": M, "dim": dim},
    }


LEFT, RIGHT, UP, DOWN, HOVER = "LEFT", "RIGHT", "UP", "DOWN", "HOVER"


def forest_ride(W=6, H=4, horizon=7, trees=((2, 0), (2, 1), (3, 3), (4, 1)),
                flags=((5, 0), (5, 2), (5, 3)), starts=((0, 0), (0, 1), (0, 3))):
    """Deterministic drone gridworld on a ``W x H`` torus.

    Moves cost 1 and hovering 0; entering a tree costs 100; leaving the
    grid through its left edge is forbidden.  The terminal cost is 1000
    times the Manhattan distance to the assigned flag.
    """
    states = [(h, v) for h in range(W) for v in range(H)]
    shift = {LEFT: (W - 1, 0), RIGHT: (1, 0), UP: (0, 1), DOWN: (0, H - 1), HOVER: (0, 0)}
    inputs = (LEFT, RIGHT, UP, DOWN, HOVER)

    def f(x, u):
        dh, dv = shift[u]
        return ((x[0] + dh) % W, (x[1] + dv) % H)

    def g(x, u, r):
        if x[0] == 0 and u == LEFT:
            return float("inf")
        if f(x, u) in trees:
            return 100.0
        return 0.0 if u == HOVER else 1.0

    def g_N(x, r):
        return 1000.0 * (abs(x[0] - r[0]) + abs(x[1] - r[1]))

    M = len(starts)
    return {
        "name": "forest_ride",
        "description": "Drone swarm through a periodic forest to unassigned flags.",
        "kind": "finite", "horizon": horizon,
        "system": _finite(states, inputs, flags, f, g, g_N),
        "mu0": _measure([(s, 1.0 / M) for s in starts]),
        "refs": _measure([(p, 1.0 / M) for p in flags]),
        "options": {"mode": "two", "rollout": "openloop", "particles": M},
    }


def lqr_pair():
    """Double-integrator fleet steered to targets with a soft terminal penalty."""
    return {
        "name": "lqr_pair",
        "description": "Linear particles, quadratic effort and terminal cost; "
                       "reference-pair cost-to-go lifted by assignment.",
        "kind": "lqr", "horizon": 5,
        "system": {
            "A": [[1.0, 0.5], [0.0, 1.0]], "B": [[0.125], [0.5]], "R": [[1.0]],
            "P_N": [[10.0, 0.0], [0.0, 1.0]],
            "particles": [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.5]],
            "targets": [[2.0, 0.0], [-2.0, 0.0], [0.5, 0.0]],
        },
    }


def zero_cost():
    X = ("a", "b")
    return {
        "name": "zero_cost",
        "description": "Every cost is zero.",
        "kind": "finite", "horizon": 2,
        "system": _finite(X, ("stay", "swap"), X,
                          lambda x, u: x if u == "stay" else ("b" if x == "a" else "a"),
                          lambda x, u, r: 0.0, lambda x, r: 0.0),
        "mu0": _measure([("a", 0.5), ("b", 0.5)]),
        "refs": [_measure([("a", 0.25), ("b", 0.75)])] * 3,
        "options": {"mode": "both", "rollout": "feedback"},
    }


def all_documents():
    return {fn().get("name"): fn() for fn in (
        counterexample_multimarginal, split_mass, noise_counterexample, robots_grid,
        integrator, forest_ride, lqr_pair, zero_cost)}
