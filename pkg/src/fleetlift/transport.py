"""Discrete optimal transport with extended-real costs.

Costs are dense numpy arrays indexed by the canonical atom order of each
marginal.  ``inf`` entries are hard constraints: those cells are removed
from the linear program, and if no finite-cost coupling remains the
discrepancy is ``inf``.
"""

from dataclasses import dataclass
import itertools
import math

import numpy as np

from .errors import CapacityError, DomainError, InfeasibleError
from .extended import INF, ext_dot
from .linprog import OPTIMAL, LpProblem, solve_assignment, solve_lp
from .measures import LABELED, DiscreteMeasure

#: Largest product support handed to the dense LP.
MAX_CELLS = 1 << 20
_MASS_DROP = 1e-14


@dataclass(frozen=True)
class TransportPlan:
    """Sparse coupling over the product of several supports.

    ``cells[s]`` holds one atom index per axis and ``mass[s]`` its weight.
    A free axis (no prescribed marginal) has ``None`` in ``marginals`` and
    its labels in ``axis_points``.  An infinite ``value`` comes with an
    empty plan.
    """

    marginals: tuple
    axis_points: tuple
    cells: np.ndarray
    mass: np.ndarray
    value: float
    epsilon: float = 0.0
    dual_value: float = math.nan
    iterations: int = 0

    @property
    def feasible(self):
        return self.value != INF

    @property
    def joint(self):
        """The plan as a measure over tuples of points (``None`` if empty)."""
        if not len(self.mass):
            return None
        pts = [tuple(self.axis_points[a][i] for a, i in enumerate(cell)) for cell in self.cells]
        return DiscreteMeasure(pts, self.mass / self.mass.sum(), kind=LABELED)

    def axis_mass(self, axis):
        """Mass per atom of ``axis`` as a dense vector."""
        out = np.zeros(len(self.axis_points[axis]))
        np.add.at(out, self.cells[:, axis], self.mass)
        return out

    def marginal_error(self):
        """Largest per-atom deviation from the prescribed marginals."""
        err = 0.0
        for a, m in enumerate(self.marginals):
            if m is not None:
                err = max(err, float(np.max(np.abs(self.axis_mass(a) - m.weights))))
        return err

    def with_slack(self, eps):
        """Same plan with ``eps`` added to its optimality slack."""
        return TransportPlan(self.marginals, self.axis_points, self.cells, self.mass,
                             self.value, self.epsilon + eps, self.dual_value, self.iterations)


def cost_tensor(measures, fn):
    """Evaluate ``fn(p_0, ..., p_K)`` over the product of the supports."""
    shape = tuple(len(m) for m in measures)
    out = np.empty(shape)
    for idx in itertools.product(*(range(s) for s in shape)):
        out[idx] = fn(*(m.points[i] for m, i in zip(measures, idx)))
    return out


def _check_cost(C, shape):
    C = np.asarray(C, dtype=float)
    if C.shape != shape:
        raise DomainError(f"cost shape {C.shape} does not match marginals {shape}", "transport")
    if np.any(np.isnan(C)) or np.any(C < 0):
        raise DomainError("transport costs must lie in [0, +inf]", "transport")
    return C


def _infinite(marginals, axis_points):
    k = len(axis_points)
    return TransportPlan(tuple(marginals), tuple(axis_points), np.zeros((0, k), dtype=int),
                         np.zeros(0), INF)


def _finish(marginals, axis_points, C, cells, x, sol):
    keep = x > _MASS_DROP
    cells, mass = cells[keep], x[keep]
    value = ext_dot(mass, C[tuple(cells.T)])
    dual = float(sol.dual_values @ _rhs(marginals))
    return TransportPlan(tuple(marginals), tuple(axis_points), cells, mass, value, 0.0,
                         dual, sol.iterations)


def _rhs(marginals):
    return np.concatenate([m.weights for m in marginals if m is not None])


def ot2(mu, nu, c):
    """Optimal transport discrepancy ``K_c(mu, nu)`` and an optimal plan.

    ``c[i, j]`` is the cost of moving atom ``i`` of ``mu`` to atom ``j`` of
    ``nu``.  Built as the classic transportation LP: one variable per
    finite cell in row-major order, row sums ``mu`` and column sums ``nu``.
    """
    n, m = len(mu), len(nu)
    C = _check_cost(c, (n, m))
    pts = (mu.points, nu.points)
    flat = C.ravel()
    live = np.nonzero(np.isfinite(flat))[0]
    rows, cols = np.divmod(live, m)
    if len(np.unique(rows)) < n or len(np.unique(cols)) < m:
        return _infinite((mu, nu), pts)
    A = np.zeros((n + m, len(live)))
    A[rows, np.arange(len(live))] = 1.0
    A[n + cols, np.arange(len(live))] = 1.0
    sol = solve_lp(LpProblem(flat[live], A, np.concatenate([mu.weights, nu.weights])))
    if sol.status != OPTIMAL:
        return _infinite((mu, nu), pts)
    cells = np.stack([rows, cols], axis=1)
    return _finish((mu, nu), pts, C, cells, sol.values, sol)


def mmot(marginals, c, free_points=None):
    """Multi-marginal optimal transport ``K_c(mu_1, ..., mu_K)``.

    Parameters
    ----------
    marginals : sequence of DiscreteMeasure or None
        ``None`` marks a free axis whose marginal is optimized over.
    c : array_like
        Cost tensor with one axis per marginal.
    free_points : dict, optional
        Labels for free axes, ``{axis: points}``; defaults to indices.
    """
    marginals = list(marginals)
    if len(marginals) < 2:
        raise DomainError("mmot needs at least two marginals", "transport")
    C = np.asarray(c, dtype=float)
    if C.ndim != len(marginals):
        raise DomainError(f"cost has {C.ndim} axes for {len(marginals)} marginals", "transport")
    free_points = free_points or {}
    axis_points = []
    for a, m in enumerate(marginals):
        if m is None:
            axis_points.append(tuple(free_points.get(a, range(C.shape[a]))))
        else:
            axis_points.append(m.points)
    shape = tuple(len(p) for p in axis_points)
    C = _check_cost(C, shape)
    if not any(m is not None for m in marginals):
        raise DomainError("at least one marginal must be prescribed", "transport")
    if C.size > MAX_CELLS:
        raise CapacityError(f"product support of {C.size} cells exceeds {MAX_CELLS}", "transport")

    cells = np.argwhere(np.isfinite(C))
    for a, m in enumerate(marginals):
        if m is not None and len(np.unique(cells[:, a])) < shape[a]:
            return _infinite(marginals, axis_points)
    offset = 0
    nrows = sum(shape[a] for a, m in enumerate(marginals) if m is not None)
    A = np.zeros((nrows, len(cells)))
    for a, m in enumerate(marginals):
        if m is None:
            continue
        A[offset + cells[:, a], np.arange(len(cells))] = 1.0
        offset += shape[a]
    sol = solve_lp(LpProblem(C[tuple(cells.T)], A, _rhs(marginals)))
    if sol.status != OPTIMAL:
        return _infinite(marginals, axis_points)
    return _finish(marginals, axis_points, C, cells, sol.values, sol)


def as_map(plan):
    """Transport map behind a plan, if the plan is concentrated on a graph.

    Returns a dict from first-axis points to the image (a point for two
    marginals, a tuple of points otherwise), or ``None`` when some atom
    of the first marginal is split.
    """
    if not plan.feasible or not len(plan.mass):
        return None
    out = {}
    for cell in plan.cells:
        src = plan.axis_points[0][cell[0]]
        img = tuple(plan.axis_points[a][i] for a, i in enumerate(cell) if a > 0)
        if len(img) == 1:
            img = img[0]
        if src in out:
            return None
        out[src] = img
    return out


def empirical_ot(cost):
    """OT between two uniform fleets of equal size ``M`` via assignment.

    ``cost[i, j]`` is the cost of pairing particle ``i`` with target ``j``.
    Returns ``(value, perm)``; the value is the mean matched cost, ``inf``
    when no finite pairing exists.
    """
    try:
        perm, value = solve_assignment(cost)
    except InfeasibleError:
        return INF, None
    return value, perm


def _psd_sqrt(S, name):
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape[0] != S.shape[1]:
        raise DomainError(f"{name} must be square", "transport")
    scale = max(1.0, float(np.max(np.abs(S))))
    if np.max(np.abs(S - S.T)) > 1e-10 * scale:
        raise DomainError(f"{name} is not symmetric", "transport")
    vals, vecs = np.linalg.eigh((S + S.T) / 2)
    if vals.min() < -1e-10 * scale:
        raise DomainError(f"{name} is not positive semidefinite", "transport")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def gaussian_w2_sq(m, S, m_star, S_star):
    """Squared 2-Wasserstein distance between two Gaussian laws.

    ``|m - m*|^2 + tr(S + S* - 2 (S^1/2 S* S^1/2)^1/2)`` with ``S`` and
    ``S*`` covariance matrices.  Scalars are read as 1-D variances, so
    the result is ``(m - m*)^2 + (sd - sd*)^2``.
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    m_star = np.atleast_1d(np.asarray(m_star, dtype=float))
    root = _psd_sqrt(S, "S")
    root_star = _psd_sqrt(S_star, "S*")
    if root.shape != root_star.shape or m.shape != m_star.shape or m.shape[0] != root.shape[0]:
        raise DomainError("Gaussian parameters have mismatched dimensions", "transport")
    S = root @ root
    S_star = root_star @ root_star
    inner = root @ S_star @ root
    cross = _psd_sqrt((inner + inner.T) / 2, "cross term")
    val = float(np.sum((m - m_star) ** 2) + np.trace(S + S_star - 2 * cross))
    return max(val, 0.0)


def blend(plan, other, t):
    """Convex combination ``(1 - t) plan + t other`` of two plans.

    Both plans must share marginals and axis labels.  The result carries
    its excess over ``plan.value`` as ``epsilon``.
    """
    if not 0.0 <= t <= 1.0:
        raise DomainError("blend weight must lie in [0, 1]", "transport")
    if plan.axis_points != other.axis_points:
        raise DomainError("plans live on different supports", "transport")
    cells = np.vstack([plan.cells, other.cells])
    mass = np.concatenate([(1 - t) * plan.mass, t * other.mass])
    uniq, inv = np.unique(cells, axis=0, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inv.ravel(), mass)
    keep = merged > _MASS_DROP
    value = ext_dot(np.array([1 - t, t]), np.array([plan.value, other.value]))
    eps = max(0.0, value - plan.value) if value != INF else INF
    return TransportPlan(plan.marginals, plan.axis_points, uniq[keep], merged[keep], value,
                         plan.epsilon + eps, plan.dual_value, plan.iterations)
