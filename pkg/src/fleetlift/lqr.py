"""Closed-form ground-space solutions for linear-quadratic particles.

Conventions: quadratic forms are ``|v|_M^2 = v' M v``.  The pair
cost-to-go is

    c_k(x, y) = x' Px x + y' Py y + 2 x' Pxy y  (+ x' cx + y' cy + cw)

with ``y`` the terminal reference, so ``Pxy`` maps reference space into
state space.  Every ``P`` update is symmetrized after it is formed; the
asymmetry measured just before symmetrization is kept in ``drift``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import DomainError, SolverError


def _mat(a, name):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} has non-finite entries", "lqr-ground")
    return a


def _per_stage(a, N, name):
    """One matrix per stage: a list of 2-D matrices, or one matrix repeated."""
    if isinstance(a, (list, tuple)) and all(np.ndim(x) == 2 for x in a):
        if len(a) != N:
            raise DomainError(f"{name} needs {N} stages", "lqr-ground")
        return [_mat(x, name) for x in a]
    return [_mat(a, name)] * N


def _sym(P):
    return (P + P.T) / 2


def _check_psd(M, name, strict=False):
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(M))):
        raise DomainError(f"{name} is not symmetric", "lqr-ground")
    ev = np.linalg.eigvalsh(_sym(M))
    lo = 1e-12 if strict else -1e-10 * max(1.0, np.max(np.abs(ev)))
    if ev.min() < lo:
        raise DomainError(f"{name} is not positive {'' if strict else 'semi'}definite",
                          "lqr-ground")


def _solve(M, rhs):
    """Solve ``M X = rhs`` with a pivoted LU factorization."""
    try:
        lu = lu_factor(M, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:  # pragma: no cover
        raise SolverError(str(exc), "lqr-ground") from exc
    if np.min(np.abs(np.diag(lu[0]))) <= 1e-14 * max(1.0, np.max(np.abs(M))):
        raise SolverError("singular R + B'PB", "lqr-ground")
    return lu_solve(lu, rhs)


@dataclass
class LqrSystem:
    """Time-varying linear system ``x+ = A_k x + B_k u`` with effort ``u'R_k u``.

    Matrices may be given once (time-invariant) or as length-``N`` lists.
    ``Q`` is optional; its meaning depends on the recursion using it.
    """

    N: int
    A: list
    B: list
    R: list
    P_N: np.ndarray
    Q: list = None

    def __post_init__(self):
        if int(self.N) < 1:
            raise DomainError("horizon must be positive", "lqr-ground")
        self.N = int(self.N)
        self.A = _per_stage(self.A, self.N, "A")
        self.B = _per_stage(self.B, self.N, "B")
        self.R = _per_stage(self.R, self.N, "R")
        self.P_N = _mat(self.P_N, "P_N")
        self.Q = None if self.Q is None else _per_stage(self.Q, self.N, "Q")
        n = self.A[0].shape[0]
        for k in range(self.N):
            A, B, R = self.A[k], self.B[k], self.R[k]
            if A.shape != (n, n) or B.shape[0] != n or R.shape != (B.shape[1], B.shape[1]):
                raise DomainError(f"inconsistent shapes at stage {k}", "lqr-ground")
            _check_psd(R, f"R[{k}]", strict=True)
            if self.Q is not None:
                _check_psd(self.Q[k], f"Q[{k}]")
        if self.P_N.shape != (n, n):
            raise DomainError("P_N has the wrong shape", "lqr-ground")
        _check_psd(self.P_N, "P_N")

    @property
    def n(self):
        return self.A[0].shape[0]

    @property
    def p(self):
        return self.B[0].shape[1]


@dataclass
class QuadraticCostToGo:
    """Stage-indexed coefficients of the pair cost-to-go and its feedback.

    ``Kx[k]``, ``Ky[k]``, ``kw[k]`` define ``u_k(x, y) = -Kx x - Ky y - kw``
    for ``k < N``; coefficient lists have ``N + 1`` entries.
    """

    Px: list
    Py: list
    Pxy: list
    Kx: list
    Ky: list
    cx: list
    cy: list
    cw: list
    kw: list
    drift: list = field(default_factory=list)
    heart: list = field(default_factory=list)

    def cost(self, k, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return float(x @ self.Px[k] @ x + y @ self.Py[k] @ y + 2 * x @ self.Pxy[k] @ y
                     + x @ self.cx[k] + y @ self.cy[k] + self.cw[k])

    def input(self, k, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return -(self.Kx[k] @ x) - (self.Ky[k] @ y) - self.kw[k]


def integrator_cost_to_go(N, k, x, r):
    """Closed-form integrator value ``((N-k)/N^2) |r - x|^2``.

    Dynamics ``x+ = x + u``, effort ``|u|^2`` and the hard terminal
    constraint ``x_N = r``.  At ``k = 0`` this is the optimal cost
    ``|r - x|^2 / N``.  For ``k >= 1`` it is the optimal remaining cost of
    a particle that started at ``x_0`` with ``r - x_0 = N (r - x) / (N - k)``,
    i.e. its value along the optimal straight-line trajectory; the optimal
    cost from an arbitrary ``x`` at stage ``k`` is
    ``integrator_exact_cost_to_go``.  Both give the same argmin
    allocation at every stage, since they differ by a positive factor.
    """
    if not 0 <= k < N:
        raise DomainError(f"stage {k} outside [0, {N})", "lqr-ground")
    d = np.atleast_1d(np.asarray(r, dtype=float) - np.asarray(x, dtype=float))
    return (N - k) / N ** 2 * float(d @ d)


def integrator_exact_cost_to_go(N, k, x, r):
    """Optimal remaining cost ``|r - x|^2 / (N - k)`` from ``x`` at stage ``k``."""
    if not 0 <= k < N:
        raise DomainError(f"stage {k} outside [0, {N})", "lqr-ground")
    d = np.atleast_1d(np.asarray(r, dtype=float) - np.asarray(x, dtype=float))
    return float(d @ d) / (N - k)


def integrator_input(N, k, x, r):
    """Optimal input ``(r - x) / (N - k)``."""
    if not 0 <= k < N:
        raise DomainError(f"stage {k} outside [0, {N})", "lqr-ground")
    return (np.asarray(r, dtype=float) - np.asarray(x, dtype=float)) / (N - k)


def lqr_pair_recursion(sys, noise_mean=None, noise_cov=None, tracking=None):
    """Cost-to-go ``c_k(x, y)`` of steering ``x`` towards reference ``y``.

    Without extra arguments this is the effort-only recursion initialized
    at ``Px = Py = -Pxy = P_N``::

        K   = (R + B'Px+B)^-1 B'
        Kx  = K Px+ A,   Ky = K Pxy+
        Px  = A'Px+A - A'Px+B Kx
        Py  = Py+ - (B Ky)' Pxy+
        Pxy = (A - B Kx)' Pxy+

    Parameters
    ----------
    noise_mean, noise_cov : array_like, optional
        Mean and covariance of additive noise ``x+ = Ax + Bu + w``; enables
        the affine terms ``cx``, ``cy``, ``cw`` and the offset ``kw``.
    tracking : array_like or list, optional
        Stage weight ``Q`` of an extra tracking term ``|x - y|_Q^2``, which
        adds ``Q`` to ``Px`` and ``Py`` and subtracts it from ``Pxy``.
    """
    N, n = sys.N, sys.n
    Qt = None if tracking is None else _per_stage(tracking, N, "tracking")
    noisy = noise_mean is not None or noise_cov is not None
    m_w = np.zeros(n) if noise_mean is None else np.atleast_1d(np.asarray(noise_mean, float))
    S_w = np.zeros((n, n)) if noise_cov is None else _mat(noise_cov, "noise_cov")
    if m_w.shape != (n,) or S_w.shape != (n, n):
        raise DomainError("noise moments have the wrong dimension", "lqr-ground")

    Px = [None] * (N + 1)
    Py = [None] * (N + 1)
    Pxy = [None] * (N + 1)
    cx = [None] * (N + 1)
    cy = [None] * (N + 1)
    cw = [0.0] * (N + 1)
    Kx, Ky, kw = [None] * N, [None] * N, [None] * N
    drift, heart = [], []
    Px[N] = sys.P_N.copy()
    Py[N] = sys.P_N.copy()
    Pxy[N] = -sys.P_N
    cx[N] = np.zeros(n)
    cy[N] = np.zeros(n)
    for k in range(N - 1, -1, -1):
        A, B, R = sys.A[k], sys.B[k], sys.R[k]
        Pxp, Pyp, Pxyp = Px[k + 1], Py[k + 1], Pxy[k + 1]
        H = R + B.T @ Pxp @ B
        K = _solve(H, B.T)
        Kx[k] = K @ Pxp @ A
        Ky[k] = K @ Pxyp
        Acl = A - B @ Kx[k]
        heart.append(float(np.max(np.abs(-A.T @ Pxp @ B @ Ky[k] + Kx[k].T @ H @ Ky[k]),
                                  initial=0.0)))
        new_x = A.T @ Pxp @ A - A.T @ Pxp @ B @ Kx[k]
        new_y = Pyp - (B @ Ky[k]).T @ Pxyp
        new_xy = Acl.T @ Pxyp
        if Qt is not None:
            new_x = new_x + Qt[k]
            new_y = new_y + Qt[k]
            new_xy = new_xy - Qt[k]
        drift.append(max(float(np.max(np.abs(new_x - new_x.T), initial=0.0)),
                         float(np.max(np.abs(new_y - new_y.T), initial=0.0))))
        Px[k], Py[k], Pxy[k] = _sym(new_x), _sym(new_y), new_xy
        h = cx[k + 1] + 2 * Pxp @ m_w
        kw[k] = 0.5 * (K @ h)
        cx[k] = Acl.T @ h
        cy[k] = cy[k + 1] - (B @ Ky[k]).T @ h + 2 * Pxyp.T @ m_w
        cw[k] = float(cw[k + 1] + m_w @ cx[k + 1] + m_w @ Pxp @ m_w
                      + np.trace(Pxp @ S_w) - 0.5 * kw[k] @ (B.T @ h))
    if not noisy:
        kw = [np.zeros(sys.p) for _ in range(N)]
    heart.reverse()
    drift.reverse()
    return QuadraticCostToGo(Px, Py, Pxy, Kx, Ky, cx, cy, cw, kw, drift, heart)


def _riccati_step(A, B, R, Q, P_next):
    H = R + B.T @ P_next @ B
    G = _solve(H, B.T @ P_next @ A)
    P = Q + A.T @ P_next @ A - (A.T @ P_next @ B) @ G
    return _sym(P), -G, float(np.max(np.abs(P - P.T), initial=0.0))


def lqr_classic(sys):
    """Finite-horizon Riccati recursion with state weight ``Q_k``.

    Returns ``(P, K)`` with ``P[0..N]`` and gains ``K[0..N-1]`` such that
    ``u_k = K_k x`` (sign included) and ``x' P_k x`` is the optimal
    cost-to-go.  A missing ``Q`` is read as zero.
    """
    n, N = sys.n, sys.N
    Q = sys.Q or [np.zeros((n, n))] * N
    P = [None] * (N + 1)
    K = [None] * N
    P[N] = _sym(sys.P_N)
    for k in range(N - 1, -1, -1):
        P[k], K[k], _ = _riccati_step(sys.A[k], sys.B[k], sys.R[k], Q[k], P[k + 1])
    return P, K


def lqr_variance_aware(sys, Q1, Q2, P1_N, P2_N):
    """Two decoupled Riccati recursions for mean and deviation.

    The mean evolves under gain ``K1`` and the deviation from the mean under
    ``K2``; the optimal affine law is ``u = K2 (x - m) + K1 m``.

    Returns
    -------
    (P1, P2, K1, K2) : lists indexed by stage
    """
    N = sys.N
    Q1 = _per_stage(Q1, N, "Q1")
    Q2 = _per_stage(Q2, N, "Q2")
    P1_N, P2_N = _mat(P1_N, "P1_N"), _mat(P2_N, "P2_N")
    for name, M in (("P1_N", P1_N), ("P2_N", P2_N)):
        _check_psd(M, name)
    P1, P2 = [None] * (N + 1), [None] * (N + 1)
    K1, K2 = [None] * N, [None] * N
    P1[N], P2[N] = _sym(P1_N), _sym(P2_N)
    for k in range(N - 1, -1, -1):
        A, B, R = sys.A[k], sys.B[k], sys.R[k]
        P1[k], K1[k], _ = _riccati_step(A, B, R, Q1[k], P1[k + 1])
        P2[k], K2[k], _ = _riccati_step(A, B, R, Q2[k], P2[k + 1])
    return P1, P2, K1, K2
