"""Arithmetic on the nonnegative extended reals [0, +inf].

Infinity is IEEE ``inf``, which already saturates under addition
(``inf + a == inf``) and never rounds.  The only IEEE behaviours that
disagree with measure-theoretic conventions are ``0 * inf`` and
``inf - inf``; the helpers below pin those down.
"""

import math

import numpy as np

INF = math.inf

#: Values within this distance are reported as equal after rounding.
ROUND_TOL = 1e-9


def is_finite(a):
    return a != INF


def ext_add(*terms):
    """Saturating sum of nonnegative extended reals."""
    total = 0.0
    for t in terms:
        if t == INF:
            return INF
        total += t
    return total


def ext_dot(weights, values):
    """Integral of ``values`` against ``weights`` with ``0 * inf = 0``.

    Any strictly positive weight on an infinite value gives ``inf``.
    """
    w = np.asarray(weights, dtype=float)
    v = np.asarray(values, dtype=float)
    pos = w > 0
    if not np.any(pos):
        return 0.0
    vp = v[pos]
    if np.any(np.isinf(vp)):
        return INF
    return float(np.dot(w[pos], vp))


def ext_scale(a, s):
    """``s * a`` for ``s >= 0`` with ``0 * inf = 0``."""
    if s == 0:
        return 0.0
    return a * s


def ext_round(a, tol=ROUND_TOL):
    """Snap ``a`` to the nearest multiple of ``tol`` (keeps ``inf``).

    Used when comparing values computed along different numerical paths.
    """
    if a == INF:
        return INF
    r = round(a / tol) * tol
    return 0.0 if r == 0 else r


def ext_equal(a, b, tol=ROUND_TOL):
    if a == INF or b == INF:
        return a == b
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def ext_min(values):
    """Index and value of the first minimum (lowest index wins ties)."""
    arr = np.asarray(values, dtype=float)
    i = int(np.argmin(arr))
    return i, float(arr[i])
