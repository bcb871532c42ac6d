"""Dense linear programming and square assignment.

``solve_lp`` is a two-phase primal simplex on a dense tableau with
Bland's rule (lowest-index entering and leaving variable), which cannot
cycle.  It targets desk-scale problems: a few dozen rows and at most a few
thousand columns, all coefficients finite.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError, InfeasibleError, SolverError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_PIVOT_TOL = 1e-11
_COST_TOL = 1e-11


@dataclass(frozen=True)
class LpProblem:
    """``min c@x  s.t.  A@x == b,  x >= 0``."""

    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        A = np.atleast_2d(np.asarray(self.eq_matrix, dtype=float))
        b = np.asarray(self.eq_rhs, dtype=float)
        if A.shape[0] != b.shape[0] or A.shape[1] != c.shape[0]:
            raise DomainError(
                f"inconsistent LP shapes: A {A.shape}, b {b.shape}, c {c.shape}", "linprog")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise DomainError("LP coefficients must be finite", "linprog")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "eq_matrix", A)
        object.__setattr__(self, "eq_rhs", b)


@dataclass
class LpSolution:
    values: np.ndarray
    objective_value: float
    dual_values: np.ndarray
    status: str
    iterations: int = 0
    basis: list = field(default_factory=list)

    def certify(self, problem):
        """Return ``(primal_residual, duality_gap, min_reduced_cost)``."""
        A, b, c = problem.eq_matrix, problem.eq_rhs, problem.objective
        resid = float(np.max(np.abs(A @ self.values - b))) if len(b) else 0.0
        gap = float(c @ self.values - b @ self.dual_values)
        red = c - A.T @ self.dual_values
        return resid, gap, float(red.min()) if len(red) else 0.0


def _pivot(T, r, j):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    nz = np.nonzero(col)[0]
    if len(nz):
        T[nz] -= np.outer(col[nz], T[r])


def _bland(T, basis, ncols, cap, iters):
    """Run Bland's rule on tableau ``T`` whose last row holds reduced costs.

    Returns ``(status, iterations)`` with status optimal or unbounded.
    """
    m = T.shape[0] - 1
    while True:
        d = T[-1, :ncols]
        entering = np.nonzero(d < -_COST_TOL)[0]
        if len(entering) == 0:
            return OPTIMAL, iters
        if iters >= cap:
            raise SolverError(f"simplex exceeded {cap} pivots", "linprog")
        j = int(entering[0])
        col = T[:m, j]
        rows = np.nonzero(col > _PIVOT_TOL)[0]
        if len(rows) == 0:
            return UNBOUNDED, iters
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(tied, key=lambda i: basis[i]))
        _pivot(T, r, j)
        basis[r] = j
        iters += 1


def solve_lp(p, tol=1e-9):
    """Solve an equality-form LP with nonnegative variables.

    Parameters
    ----------
    p : LpProblem
    tol : float
        Phase-I infeasibility threshold (scaled by ``max(1, |b|)``).

    Returns
    -------
    LpSolution
        ``values`` and ``dual_values`` are meaningful only when
        ``status == "optimal"``; dual values ``y`` satisfy
        ``c - A.T @ y >= 0`` and ``c@x == b@y`` up to roundoff.

    Raises
    ------
    SolverError
        If a phase exceeds ``50 * (rows + cols)`` pivots.
    """
    A, b, c = p.eq_matrix, p.eq_rhs, p.objective
    m, n = A.shape
    cap = 50 * (m + n)
    sign = np.where(b < 0, -1.0, 1.0)
    As = A * sign[:, None]
    bs = b * sign

    if m == 0:
        if np.any(c < -_COST_TOL):
            return LpSolution(np.zeros(n), -math.inf, np.zeros(0), UNBOUNDED)
        return LpSolution(np.zeros(n), 0.0, np.zeros(0), OPTIMAL)

    # Phase I: artificials n..n+m-1 start in the basis.
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = As
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = bs
    T[-1, :n] = -As.sum(axis=0)
    T[-1, -1] = -bs.sum()
    basis = list(range(n, n + m))
    _, iters = _bland(T, basis, n + m, cap, 0)
    if -T[-1, -1] > tol * max(1.0, float(np.abs(bs).max())):
        return LpSolution(np.zeros(n), math.inf, np.zeros(m), INFEASIBLE, iters)

    # Drive zero-level artificials out; rows where that fails are redundant.
    keep = []
    for r in range(m):
        if basis[r] >= n:
            cand = np.nonzero(np.abs(T[r, :n]) > 1e-9)[0]
            if len(cand) == 0:
                continue
            j = int(cand[0])
            _pivot(T, r, j)
            basis[r] = j
        keep.append(r)
    T = np.vstack([T[keep][:, list(range(n)) + [n + m]], np.zeros((1, n + 1))])
    basis = [basis[r] for r in keep]
    k = len(keep)

    # Phase II reduced costs.
    cB = c[basis]
    T[-1, :n] = c - cB @ T[:k, :n]
    T[-1, -1] = -cB @ T[:k, -1]
    status, iters2 = _bland(T, basis, n, cap, 0)
    iters += iters2
    if status == UNBOUNDED:
        return LpSolution(np.zeros(n), -math.inf, np.zeros(m), UNBOUNDED, iters, basis)

    # Re-solve the final basis directly to shed accumulated pivot error.
    B = As[keep][:, basis]
    cB = c[basis]
    try:
        xB = np.linalg.solve(B, bs[keep])
        y_keep = np.linalg.solve(B.T, cB)
    except np.linalg.LinAlgError as exc:
        raise SolverError("singular final basis", "linprog") from exc
    x = np.zeros(n)
    x[basis] = np.where(np.abs(xB) < 1e-13, 0.0, xB)
    x = np.maximum(x, 0.0)
    y = np.zeros(m)
    y[keep] = y_keep
    y *= sign
    return LpSolution(x, float(c @ x), y, OPTIMAL, iters, basis)


def _lsa_total(C):
    if C.shape[0] == 0:
        return 0.0
    try:
        r, s = linear_sum_assignment(C)
    except ValueError:
        return math.inf
    return float(C[r, s].sum())


def solve_assignment(cost):
    """Minimum-cost perfect matching on an ``n x n`` extended-real matrix.

    Returns
    -------
    perm : tuple of int
        ``perm[i]`` is the column matched to row ``i``.  Among optimal
        matchings the lexicographically smallest is returned.
    value : float
        Mean cost ``sum_i cost[i, perm[i]] / n``: the optimum of the
        doubly-stochastic relaxation with uniform ``1/n`` marginals.

    Raises
    ------
    InfeasibleError
        When every permutation hits an infinite entry.
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DomainError(f"assignment needs a square matrix, got {C.shape}", "linprog")
    if np.any(np.isnan(C)) or np.any(C == -math.inf):
        raise DomainError("assignment costs must be finite or +inf", "linprog")
    n = C.shape[0]
    if n == 0:
        return (), 0.0
    opt = _lsa_total(C)
    if opt == math.inf:
        raise InfeasibleError("no finite-cost permutation", "linprog")
    slack = 1e-9 * max(1.0, abs(opt))
    perm, free, spent = [], list(range(n)), 0.0
    for i in range(n):
        for j in free:
            if C[i, j] == math.inf:
                continue
            rest_cols = [q for q in free if q != j]
            rest = _lsa_total(C[i + 1:][:, rest_cols])
            if spent + C[i, j] + rest <= opt + slack:
                perm.append(j)
                free = rest_cols
                spent += C[i, j]
                break
        else:  # pragma: no cover - guarded by the optimum existing
            raise SolverError("lexicographic assignment repair failed", "linprog")
    total = float(sum(C[i, perm[i]] for i in range(n)))
    return tuple(perm), total / n
