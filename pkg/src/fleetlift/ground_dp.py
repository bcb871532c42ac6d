"""Backward dynamic programming for a single particle on finite spaces.

Three recursions are provided:

* ``dpa_multi``: cost-to-go ``j_k(x, r_k, ..., r_N)`` when stage costs
  depend on the reference at every stage;
* ``dpa_simple``: ``j_k(x, r_N)`` when only the terminal cost looks at the
  reference (or, with ``freeze_reference=True``, when every stage cost is
  evaluated at the final reference ``r_N``);
* ``dpa_stochastic``: the expected-cost recursion for noisy dynamics.

All tables are dense numpy arrays.  ``inf`` is a legal value everywhere;
argmin ties go to the lowest input index.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import CapacityError, DomainError, InfeasibleError, ModeError
from .measures import DiscreteMeasure

#: Default cap on cost-to-go table cells.
MEM_CAP = 1 << 26

MULTI = "multi"
SIMPLE = "simple"
FROZEN = "frozen"
STOCHASTIC = "stochastic"


def _index(labels):
    return {p: i for i, p in enumerate(labels)}


@dataclass
class GroundSystem:
    """Finite-horizon particle system given as lookup tables.

    ``states``, ``refs`` have ``N + 1`` entries and ``inputs`` has ``N``;
    each entry is a tuple of labels.  ``dynamics[k][x, u]`` is the index of
    the successor in ``states[k+1]``; ``stage_cost[k]`` has shape
    ``(|X_k|, |U_k|, |Y_k|)`` and ``terminal_cost`` shape ``(|X_N|, |Y_N|)``.
    """

    states: list
    inputs: list
    refs: list
    dynamics: list
    stage_cost: list
    terminal_cost: np.ndarray

    def __post_init__(self):
        N = len(self.inputs)
        if N < 1:
            raise DomainError("horizon must be positive", "ground-dp")
        if len(self.states) != N + 1 or len(self.refs) != N + 1:
            raise DomainError("states and refs need N + 1 stages", "ground-dp")
        if len(self.dynamics) != N or len(self.stage_cost) != N:
            raise DomainError("dynamics and stage costs need N stages", "ground-dp")
        self.states = [tuple(s) for s in self.states]
        self.inputs = [tuple(u) for u in self.inputs]
        self.refs = [tuple(r) for r in self.refs]
        self.dynamics = [np.asarray(f, dtype=int) for f in self.dynamics]
        self.stage_cost = [np.asarray(g, dtype=float) for g in self.stage_cost]
        self.terminal_cost = np.asarray(self.terminal_cost, dtype=float)
        for k in range(N):
            nx, nu, ny = len(self.states[k]), len(self.inputs[k]), len(self.refs[k])
            f = self.dynamics[k]
            if f.shape != (nx, nu):
                raise DomainError(f"dynamics[{k}] has shape {f.shape}, want {(nx, nu)}", "ground-dp")
            if f.size and (f.min() < 0 or f.max() >= len(self.states[k + 1])):
                raise DomainError(f"dynamics[{k}] leaves X_{k + 1}", "ground-dp")
            if self.stage_cost[k].shape != (nx, nu, ny):
                raise DomainError(f"stage_cost[{k}] has shape {self.stage_cost[k].shape}",
                                  "ground-dp")
            _check_costs(self.stage_cost[k], f"stage_cost[{k}]")
        if self.terminal_cost.shape != (len(self.states[N]), len(self.refs[N])):
            raise DomainError("terminal cost has the wrong shape", "ground-dp")
        _check_costs(self.terminal_cost, "terminal_cost")

    @property
    def horizon(self):
        return len(self.inputs)

    def state_index(self, k, x):
        try:
            return _index(self.states[k])[x]
        except KeyError:
            raise DomainError(f"{x!r} is not a state at stage {k}", "ground-dp") from None

    def ref_index(self, k, r):
        try:
            return _index(self.refs[k])[r]
        except KeyError:
            raise DomainError(f"{r!r} is not a reference at stage {k}", "ground-dp") from None

    def step(self, k, x, u):
        """Successor label of state ``x`` under input ``u`` at stage ``k``."""
        xi = self.state_index(k, x)
        ui = _index(self.inputs[k])[u]
        return self.states[k + 1][self.dynamics[k][xi, ui]]

    @classmethod
    def time_invariant(cls, states, inputs, refs, horizon, f, g, g_N):
        """Tabulate callables ``f(x, u)``, ``g(x, u, r)``, ``g_N(x, r)``."""
        states, inputs, refs = tuple(states), tuple(inputs), tuple(refs)
        sidx = _index(states)
        dyn = np.empty((len(states), len(inputs)), dtype=int)
        stage = np.empty((len(states), len(inputs), len(refs)))
        for i, x in enumerate(states):
            for j, u in enumerate(inputs):
                nxt = f(x, u)
                if nxt not in sidx:
                    raise DomainError(f"f({x!r}, {u!r}) = {nxt!r} is not a state", "ground-dp")
                dyn[i, j] = sidx[nxt]
                for l, r in enumerate(refs):
                    stage[i, j, l] = g(x, u, r)
        term = np.array([[g_N(x, r) for r in refs] for x in states], dtype=float)
        return cls([states] * (horizon + 1), [inputs] * horizon, [refs] * (horizon + 1),
                   [dyn] * horizon, [stage] * horizon, term)


def _check_costs(a, name):
    if np.any(np.isnan(a)) or np.any(a < 0):
        raise DomainError(f"{name} must lie in [0, +inf]", "ground-dp")


@dataclass
class NoisyGroundSystem:
    """Particle system with finite noise ``w_k ~ xi_k``.

    ``dynamics[k][x, u, w]`` indexes ``states[k+1]`` and
    ``stage_cost[k][x, u, w, r]`` may depend on the reference of stage
    ``k`` (the naive recursion freezes it at ``r_N``).  ``noise[k]`` is a
    DiscreteMeasure whose atom order fixes the ``w`` axis.
    """

    states: list
    inputs: list
    refs: list
    noise: list
    dynamics: list
    stage_cost: list
    terminal_cost: np.ndarray

    def __post_init__(self):
        N = len(self.inputs)
        if N < 1 or len(self.noise) != N:
            raise DomainError("need N >= 1 and one noise law per stage", "ground-dp")
        self.states = [tuple(s) for s in self.states]
        self.inputs = [tuple(u) for u in self.inputs]
        self.refs = [tuple(r) for r in self.refs]
        self.dynamics = [np.asarray(f, dtype=int) for f in self.dynamics]
        self.stage_cost = [np.asarray(g, dtype=float) for g in self.stage_cost]
        self.terminal_cost = np.asarray(self.terminal_cost, dtype=float)
        for k in range(N):
            if not isinstance(self.noise[k], DiscreteMeasure):
                raise DomainError(f"noise[{k}] must be a DiscreteMeasure", "ground-dp")
            shape = (len(self.states[k]), len(self.inputs[k]), len(self.noise[k]))
            if self.dynamics[k].shape != shape:
                raise DomainError(f"dynamics[{k}] has shape {self.dynamics[k].shape}", "ground-dp")
            if self.stage_cost[k].shape != shape + (len(self.refs[k]),):
                raise DomainError(f"stage_cost[{k}] has shape {self.stage_cost[k].shape}",
                                  "ground-dp")
            _check_costs(self.stage_cost[k], f"stage_cost[{k}]")
        _check_costs(self.terminal_cost, "terminal_cost")

    @property
    def horizon(self):
        return len(self.inputs)

    @classmethod
    def time_invariant(cls, states, inputs, refs, noise, horizon, f, g, g_N):
        """Tabulate ``f(x, u, w)``, ``g(x, u, w, r)`` and ``g_N(x, r)``."""
        states, inputs, refs = tuple(states), tuple(inputs), tuple(refs)
        sidx = _index(states)
        ws = noise.points
        dyn = np.empty((len(states), len(inputs), len(ws)), dtype=int)
        stage = np.empty(dyn.shape + (len(refs),))
        for i, x in enumerate(states):
            for j, u in enumerate(inputs):
                for l, w in enumerate(ws):
                    nxt = f(x, u, w)
                    if nxt not in sidx:
                        raise DomainError(f"f({x!r}, {u!r}, {w!r}) = {nxt!r} is not a state",
                                          "ground-dp")
                    dyn[i, j, l] = sidx[nxt]
                    for q, r in enumerate(refs):
                        stage[i, j, l, q] = g(x, u, w, r)
        term = np.array([[g_N(x, r) for r in refs] for x in states], dtype=float)
        return cls([states] * (horizon + 1), [inputs] * horizon, [refs] * (horizon + 1),
                   [noise] * horizon, [dyn] * horizon, [stage] * horizon, term)

    @classmethod
    def from_deterministic(cls, sys, noise_label=0):
        """Embed a GroundSystem with a single-atom noise law."""
        N = sys.horizon
        delta = DiscreteMeasure([noise_label], [1.0])
        return cls(sys.states, sys.inputs, sys.refs, [delta] * N,
                   [f[:, :, None] for f in sys.dynamics],
                   [g[:, :, None, :] for g in sys.stage_cost], sys.terminal_cost)

    def realize(self, noise_values):
        """Deterministic GroundSystem obtained by fixing ``w_k`` per stage."""
        dyn, stage = [], []
        for k, w in enumerate(noise_values):
            l = self.noise[k].index(w)
            dyn.append(self.dynamics[k][:, :, l])
            stage.append(self.stage_cost[k][:, :, l, :])
        return GroundSystem(self.states, self.inputs, self.refs, dyn, stage, self.terminal_cost)


@dataclass
class CostToGoTable:
    """Per-stage cost-to-go and argmin-input tables.

    ``mode == "multi"``: ``values[k]`` has axes ``(x, r_k, ..., r_N)``.
    Otherwise (``simple``, ``frozen``, ``stochastic``): axes ``(x, r_N)``.
    ``policy[k]`` holds input indices with the same indexing.
    """

    mode: str
    values: list
    policy: list
    system: object

    @property
    def horizon(self):
        return len(self.policy)

    def cost_to_go(self, k, x, refs):
        """Look up ``j_k`` at labels ``x`` and ``refs`` (a tuple or one label)."""
        idx = self._key(k, x, refs)
        return float(self.values[k][idx])

    def input(self, k, x, refs):
        """Argmin input label at stage ``k``."""
        idx = self._key(k, x, refs)
        return self.system.inputs[k][int(self.policy[k][idx])]

    def _key(self, k, x, refs):
        sys = self.system
        N = sys.horizon
        xi = _index(sys.states[k])[x]
        if self.mode == MULTI:
            refs = tuple(refs)
            if len(refs) != N - k + 1:
                raise ModeError(f"stage {k} needs {N - k + 1} references", "ground-dp")
            return (xi,) + tuple(_index(sys.refs[k + i])[r] for i, r in enumerate(refs))
        if isinstance(refs, tuple) and len(refs) == 1:
            refs = refs[0]
        return (xi, _index(sys.refs[N])[refs])


def _cells(sys, k, multi):
    n = len(sys.states[k])
    if multi:
        for i in range(k, sys.horizon + 1):
            n *= len(sys.refs[i])
    else:
        n *= len(sys.refs[sys.horizon])
    return n


def dpa_multi(sys, mem_cap=MEM_CAP):
    """Multi-reference ground recursion.

    ``j_N(x, r_N) = g_N(x, r_N)`` and
    ``j_k(x, r_k, ..., r_N) = min_u g_k(x, u, r_k) + j_{k+1}(f_k(x, u), r_{k+1}, ..., r_N)``.

    Raises
    ------
    CapacityError
        When a table (times the input count) would exceed ``mem_cap`` cells;
        ``dpa_simple`` avoids the product over references.
    """
    N = sys.horizon
    for k in range(N + 1):
        cells = _cells(sys, k, True) * (len(sys.inputs[k]) if k < N else 1)
        if cells > mem_cap:
            raise CapacityError(
                f"stage-{k} multi-reference table needs {cells} cells (cap {mem_cap}); "
                "use the simplified recursion if stage costs ignore the reference",
                "ground-dp")
    values = [None] * (N + 1)
    policy = [None] * N
    values[N] = sys.terminal_cost.copy()
    for k in range(N - 1, -1, -1):
        nxt = values[k + 1][sys.dynamics[k]]          # (x, u, r_{k+1}, ..., r_N)
        g = sys.stage_cost[k]                         # (x, u, r_k)
        extra = nxt.ndim - 2
        total = g.reshape(g.shape + (1,) * extra) + nxt[:, :, None, ...]
        policy[k] = np.argmin(total, axis=1)
        values[k] = np.take_along_axis(total, policy[k][:, None, ...], axis=1)[:, 0, ...]
    return CostToGoTable(MULTI, values, policy, sys)


def _reference_free(g):
    return bool(np.all(g == g[:, :, :1]))


def dpa_simple(sys, freeze_reference=False, mem_cap=MEM_CAP):
    """Ground recursion indexed by the final reference only.

    ``j_k(x, r_N) = min_u g_k(x, u) + j_{k+1}(f_k(x, u), r_N)``.

    Parameters
    ----------
    freeze_reference : bool
        Evaluate reference-dependent stage costs at ``r_k = r_N`` instead
        of rejecting them.  This is the constant-reference shortcut that
        two-marginal lifting relies on; the stage reference sets must then
        coincide with ``refs[N]``.

    Raises
    ------
    ModeError
        If a stage cost depends on the reference and ``freeze_reference``
        is off (use ``dpa_multi``).
    """
    N = sys.horizon
    for k in range(N + 1):
        if _cells(sys, k, False) > mem_cap:
            raise CapacityError(f"stage-{k} table exceeds {mem_cap} cells", "ground-dp")
    stage = []
    for k in range(N):
        g = sys.stage_cost[k]
        if freeze_reference:
            if sys.refs[k] != sys.refs[N]:
                raise ModeError(f"cannot freeze: refs[{k}] differs from refs[N]", "ground-dp")
            stage.append(g)                            # (x, u, r_N)
        else:
            if not _reference_free(g):
                raise ModeError(
                    f"stage cost {k} depends on the reference; use dpa_multi", "ground-dp")
            stage.append(g[:, :, :1])                  # broadcasts over r_N
    values = [None] * (N + 1)
    policy = [None] * N
    values[N] = sys.terminal_cost.copy()
    for k in range(N - 1, -1, -1):
        total = stage[k] + values[k + 1][sys.dynamics[k]]   # (x, u, r_N)
        policy[k] = np.argmin(total, axis=1)
        values[k] = np.take_along_axis(total, policy[k][:, None, :], axis=1)[:, 0, :]
    return CostToGoTable(FROZEN if freeze_reference else SIMPLE, values, policy, sys)


def dpa_stochastic(sys, mem_cap=MEM_CAP):
    """Expected-cost recursion for a NoisyGroundSystem.

    ``j_k(x, r_N) = min_u E_w[g_k(x, u, w) + j_{k+1}(f_k(x, u, w), r_N)]``,
    with reference-dependent stage costs evaluated at ``r_N``.
    """
    N = sys.horizon
    for k in range(N + 1):
        if _cells(sys, k, False) * len(sys.noise[min(k, N - 1)]) > mem_cap:
            raise CapacityError(f"stage-{k} table exceeds {mem_cap} cells", "ground-dp")
    values = [None] * (N + 1)
    policy = [None] * N
    values[N] = sys.terminal_cost.copy()
    for k in range(N - 1, -1, -1):
        g = sys.stage_cost[k]
        if g.shape[3] == 1 or _reference_free(g.reshape(g.shape[0], -1, g.shape[3])):
            g = g[..., :1]
        elif sys.refs[k] != sys.refs[N]:
            raise ModeError(f"cannot freeze: refs[{k}] differs from refs[N]", "ground-dp")
        per_w = g + values[k + 1][sys.dynamics[k]]          # (x, u, w, r_N)
        xi = sys.noise[k].weights
        total = np.tensordot(per_w, xi, axes=([2], [0]))      # weights are > 0
        policy[k] = np.argmin(total, axis=1)
        values[k] = np.take_along_axis(total, policy[k][:, None, :], axis=1)[:, 0, :]
    return CostToGoTable(STOCHASTIC, values, policy, sys)


def rollout_particle(sys, table, x0, refs):
    """Greedy rollout of one particle along the argmin table.

    Parameters
    ----------
    refs : tuple
        ``(r_0, ..., r_N)`` for a multi-reference table, ``r_N`` otherwise.

    Returns
    -------
    (trajectory, inputs, cost)
        State labels ``x_0..x_N``, input labels ``u_0..u_{N-1}`` and the
        realized cost, which equals ``j_0(x0, refs)``.

    Raises
    ------
    InfeasibleError
        If ``j_0(x0, refs)`` is infinite.
    """
    if table.mode == STOCHASTIC:
        raise ModeError("stochastic tables have no deterministic rollout", "ground-dp")
    N = sys.horizon
    if table.mode == MULTI:
        refs = tuple(refs)
        if len(refs) != N + 1:
            raise ModeError(f"need {N + 1} references", "ground-dp")
    else:
        if isinstance(refs, tuple) and len(refs) == 1:
            refs = refs[0]
    j0 = table.cost_to_go(0, x0, refs)
    if j0 == math.inf:
        raise InfeasibleError(f"no finite-cost trajectory from {x0!r}", "ground-dp", stage=0)
    traj, inputs, costs = [x0], [], []
    x = x0
    for k in range(N):
        key_refs = refs[k:] if table.mode == MULTI else refs
        u = table.input(k, x, key_refs)
        xi = sys.state_index(k, x)
        ui = _index(sys.inputs[k])[u]
        if table.mode == MULTI:
            ri = sys.ref_index(k, refs[k])
        elif table.mode == FROZEN:
            ri = sys.ref_index(k, refs)
        else:
            ri = 0
        costs.append(float(sys.stage_cost[k][xi, ui, ri]))
        x = sys.states[k + 1][sys.dynamics[k][xi, ui]]
        traj.append(x)
        inputs.append(u)
    rN = refs[N] if table.mode == MULTI else refs
    cost = float(sys.terminal_cost[sys.state_index(N, x), sys.ref_index(N, rN)])
    for g in reversed(costs):  # same association order as the recursion
        cost = g + cost
    return traj, inputs, cost
