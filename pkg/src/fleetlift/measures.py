"""Discrete probability measures on finite supports.

A support is either *labeled* (points are hashable labels, compared
exactly; tuples of labels are used for joint measures) or *euclidean*
(points are real vectors stored as tuples of floats, compared
componentwise within ``POINT_TOL``).  Atoms are kept in a canonical
sorted order and duplicate points are merged on construction, so two
measures built from the same mass are equal atom for atom.
"""

import math
from collections.abc import Mapping

import numpy as np

from .errors import DomainError
from .extended import ext_dot

POINT_TOL = 1e-12
MASS_TOL = 1e-9
PRUNE_TOL = 1e-15

LABELED = "labeled"
EUCLIDEAN = "euclidean"


def sort_key(p):
    """Total order over mixed labels: numbers < strings < tuples < rest."""
    if isinstance(p, (bool, int, float, np.integer, np.floating)):
        return (0, float(p))
    if isinstance(p, str):
        return (1, p)
    if isinstance(p, tuple):
        return (2, tuple(sort_key(q) for q in p))
    return (3, repr(p))


def _as_vector(p):
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.ndim != 1:
        raise DomainError(f"euclidean point must be a vector, got shape {arr.shape}", "measures")
    return tuple(float(v) for v in arr)


def _merge_euclidean(points, weights):
    order = sorted(range(len(points)), key=lambda i: points[i])
    reps, mass = [], []
    for i in order:
        p = points[i]
        for j, q in enumerate(reps):
            if len(q) == len(p) and all(abs(a - b) <= POINT_TOL for a, b in zip(p, q)):
                mass[j] += weights[i]
                break
        else:
            reps.append(p)
            mass.append(weights[i])
    return reps, mass


def _merge_labeled(points, weights):
    acc = {}
    for p, w in zip(points, weights):
        acc[p] = acc.get(p, 0.0) + w
    reps = sorted(acc, key=sort_key)
    return reps, [acc[p] for p in reps]


class DiscreteMeasure:
    """Probability measure ``sum_i w_i delta_{x_i}`` on a finite support.

    Parameters
    ----------
    points : sequence
        Atom locations.  Repeated points are merged.
    weights : sequence of float, optional
        Nonnegative masses summing to one (within ``MASS_TOL``).  When
        omitted every listed point gets mass ``1/len(points)``, i.e. the
        empirical measure of a fleet.
    kind : {"labeled", "euclidean"}, optional
        Defaults to ``"euclidean"`` for 2-D array input, ``"labeled"``
        otherwise.
    """

    __slots__ = ("_points", "_weights", "_kind", "_index")

    def __init__(self, points, weights=None, kind=None):
        if kind is None:
            kind = EUCLIDEAN if isinstance(points, np.ndarray) and points.ndim == 2 else LABELED
        if kind not in (LABELED, EUCLIDEAN):
            raise DomainError(f"unknown support kind {kind!r}", "measures")
        points = list(points)
        if not points:
            raise DomainError("a probability measure needs at least one atom", "measures")
        if weights is None:
            weights = [1.0 / len(points)] * len(points)
        weights = [float(w) for w in weights]
        if len(weights) != len(points):
            raise DomainError(f"{len(points)} points but {len(weights)} weights", "measures")
        for w in weights:
            if not math.isfinite(w) or w < -PRUNE_TOL:
                raise DomainError(f"invalid atom weight {w!r}", "measures")
        total = math.fsum(weights)
        if abs(total - 1.0) > MASS_TOL:
            raise DomainError(f"weights sum to {total!r}, not 1", "measures")

        if kind == EUCLIDEAN:
            pts = [_as_vector(p) for p in points]
            dims = {len(p) for p in pts}
            if len(dims) != 1:
                raise DomainError(f"euclidean points of mixed dimension {sorted(dims)}", "measures")
            pts, mass = _merge_euclidean(pts, weights)
        else:
            pts, mass = _merge_labeled(points, weights)

        keep = [i for i, w in enumerate(mass) if w >= PRUNE_TOL]
        if not keep:
            raise DomainError("all atoms were pruned", "measures")
        pts = [pts[i] for i in keep]
        w = np.array([mass[i] for i in keep], dtype=float)
        w /= w.sum()
        w.setflags(write=False)
        self._points = tuple(pts)
        self._weights = w
        self._kind = kind
        self._index = None

    # -- accessors -------------------------------------------------------
    @property
    def points(self):
        return self._points

    @property
    def weights(self):
        return self._weights

    @property
    def kind(self):
        return self._kind

    @property
    def dim(self):
        """Dimension of a euclidean support (``None`` when labeled)."""
        return len(self._points[0]) if self._kind == EUCLIDEAN else None

    def __len__(self):
        return len(self._points)

    def __iter__(self):
        return iter(zip(self._points, self._weights))

    def index(self, point):
        """Position of ``point`` in the canonical atom order."""
        if self._index is None:
            self._index = {p: i for i, p in enumerate(self._points)}
        if self._kind == EUCLIDEAN:
            point = _as_vector(point)
            hit = self._index.get(point)
            if hit is not None:
                return hit
            for i, q in enumerate(self._points):
                if all(abs(a - b) <= POINT_TOL for a, b in zip(point, q)):
                    return i
            raise KeyError(point)
        return self._index[point]

    def weight(self, point):
        """Mass at ``point``; zero off the support."""
        try:
            return float(self._weights[self.index(point)])
        except KeyError:
            return 0.0

    def as_array(self):
        """Euclidean atoms as an ``(n, d)`` array."""
        if self._kind != EUCLIDEAN:
            raise DomainError("as_array needs a euclidean support", "measures")
        return np.array(self._points, dtype=float)

    def allclose(self, other, tol=1e-12):
        """Same support and per-atom weights within ``tol``."""
        if len(self) != len(other):
            return False
        for (p, w) in self:
            try:
                j = other.index(p)
            except KeyError:
                return False
            if abs(other.weights[j] - w) > tol:
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return self._kind == other._kind and self.allclose(other)

    __hash__ = None

    def __repr__(self):
        body = " + ".join(f"{w:.6g}*d{p!r}" for p, w in self)
        return f"DiscreteMeasure({body})"

    # -- serialization ---------------------------------------------------
    def to_dict(self):
        return {
            "support": self._kind,
            "atoms": [{"point": _point_to_json(p), "weight": float(w)} for p, w in self],
        }

    @classmethod
    def from_dict(cls, data):
        kind = data.get("support", LABELED)
        atoms = data["atoms"]
        pts = [_point_from_json(a["point"]) for a in atoms]
        return cls(pts, [a["weight"] for a in atoms], kind=kind)


def _point_to_json(p):
    if isinstance(p, tuple):
        return [_point_to_json(q) for q in p]
    if isinstance(p, np.generic):
        return p.item()
    return p


def _point_from_json(p):
    if isinstance(p, list):
        return tuple(_point_from_json(q) for q in p)
    return p


def dirac(point, kind=LABELED):
    return DiscreteMeasure([point], [1.0], kind=kind)


def uniform(points, kind=None):
    """Empirical measure ``(1/M) sum_i delta_{x_i}`` of ``M`` particles."""
    return DiscreteMeasure(points, None, kind=kind)


def _call(fn, p):
    if isinstance(fn, Mapping):
        if p not in fn:
            raise DomainError(f"map undefined at atom {p!r}", "measures")
        return fn[p]
    try:
        return fn(p)
    except (KeyError, IndexError) as exc:
        raise DomainError(f"map undefined at atom {p!r}", "measures") from exc


def pushforward(m, fn, kind=None):
    """Image measure of ``m`` under ``fn`` (a callable or a mapping).

    Atoms that land on the same point are merged.
    """
    images = [_call(fn, p) for p in m.points]
    return DiscreteMeasure(images, m.weights, kind=kind or m.kind)


def marginal(joint, axis, kind=LABELED):
    """Projection of a measure over tuples onto one coordinate."""
    width = len(joint.points[0])
    if not 0 <= axis < width:
        raise DomainError(f"axis {axis} out of range for {width}-tuples", "measures")
    return pushforward(joint, lambda p: p[axis], kind=kind)


def product(*measures):
    """Independent coupling of the given measures (points are tuples)."""
    pts, ws = [()], [1.0]
    for m in measures:
        pts = [p + (q,) for p in pts for q in m.points]
        ws = [w * v for w in ws for v in m.weights]
    return DiscreteMeasure(pts, ws, kind=LABELED)


def expected_value(m, v):
    """``int v dm`` over the extended reals; positive mass on ``inf`` gives ``inf``."""
    vals = [float(_call(v, p)) for p in m.points]
    for x in vals:
        if math.isnan(x) or x < 0 and math.isinf(x):
            raise DomainError(f"value {x!r} outside [0, +inf]", "measures")
    return ext_dot(m.weights, vals)


class StateInputDistribution:
    """Joint law over ``(state, input)`` pairs whose state marginal is ``mu``."""

    __slots__ = ("joint", "state_measure")

    def __init__(self, joint, state_measure, tol=1e-12):
        proj = marginal(joint, 0, kind=state_measure.kind)
        if not proj.allclose(state_measure, tol):
            raise DomainError("state marginal of the state-input distribution differs from mu", "measures")
        self.joint = joint
        self.state_measure = state_measure

    @property
    def input_marginal(self):
        return marginal(self.joint, 1)

    def is_deterministic(self):
        """True when every state applies a single input."""
        states = [p[0] for p in self.joint.points]
        return len(states) == len(set(states))

    def __repr__(self):
        return f"StateInputDistribution({self.joint!r})"
