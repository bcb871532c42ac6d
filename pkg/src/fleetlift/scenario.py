"""Scenario files, solver dispatch and reports.

A scenario is a JSON document (schema in ``schema/scenario.schema.json``)
describing a ground system, the initial fleet, the references and solver
options.  ``run`` dispatches it to the right solvers and returns a
``Report`` whose JSON form is deterministic for a fixed seed.
"""

from dataclasses import dataclass, field
import hashlib
import importlib.resources
import json
import math
import time

import jsonschema
import numpy as np

from .errors import FleetLiftError, InfeasibleError, SchemaError
from .extended import INF
from .ground_dp import (MEM_CAP, GroundSystem, NoisyGroundSystem, dpa_multi, dpa_simple,
                        _reference_free)
from .lifting import (lifted_value, naive_noisy_lift, rollout_feedback, rollout_openloop,
                      rollout_feedback_continuous, integrator_fleet, w2_squared)
from .lqr import LqrSystem, lqr_pair_recursion
from .measures import DiscreteMeasure, MASS_TOL
from .oracle import oracle_solve
from .transport import empirical_ot

INF_TOKEN = "+inf"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2

BUNDLED = ("counterexample_multimarginal", "split_mass", "noise_counterexample",
           "robots_grid", "integrator", "forest_ride", "lqr_pair", "zero_cost")


# -- JSON ------------------------------------------------------------------------------

def to_jsonable(obj):
    """Replace infinities by ``"+inf"`` and numpy scalars/arrays by Python values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float):
        if obj == INF:
            return INF_TOKEN
        if math.isnan(obj) or obj == -INF:
            raise ValueError(f"{obj} has no JSON form")
    return obj


def dump_json(obj):
    """Canonical JSON text: sorted keys, two-space indent, shortest round-trip floats."""
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _cost(v):
    return INF if v == INF_TOKEN else float(v)


def _label(v):
    return tuple(v) if isinstance(v, list) else v


# -- scenario --------------------------------------------------------------------------

def _schema():
    ref = importlib.resources.files("fleetlift") / "schema" / "scenario.schema.json"
    return json.loads(ref.read_text())


def bundled_path(name):
    """Path of a bundled scenario by name (without ``.json``)."""
    return importlib.resources.files("fleetlift") / "scenarios" / f"{name}.json"


@dataclass
class Scenario:
    """A validated scenario.

    ``system`` is a GroundSystem, NoisyGroundSystem, LqrSystem or, for the
    integrator, a dict with ``particles``/``targets`` or ``M``/``dim``.
    ``refs`` is the list of reference measures as given (one entry means
    ``rho_N`` held constant).  ``document`` is the source JSON.
    """

    name: str
    kind: str
    horizon: int
    system: object
    mu0: object
    refs: list
    options: dict
    document: dict = field(repr=False)

    @property
    def digest(self):
        return hashlib.sha256(dump_json(self.document).encode()).hexdigest()


def _measure(doc, pointer):
    weights = [a["weight"] for a in doc["atoms"]]
    total = math.fsum(weights)
    if abs(total - 1.0) > MASS_TOL:
        raise SchemaError(f"weights sum to {total:.12g}, not 1", pointer)
    try:
        return DiscreteMeasure.from_dict(doc)
    except FleetLiftError as exc:
        raise SchemaError(str(exc), pointer) from None


def _check_len(seq, n, what, pointer):
    if len(seq) != n:
        raise SchemaError(f"{what} has {len(seq)} entries, expected {n}", pointer)


def _finite_system(doc, N):
    X = [_label(x) for x in doc["states"]]
    U = [_label(u) for u in doc["inputs"]]
    Y = [_label(r) for r in doc["references"]]
    for labels, key in ((X, "states"), (U, "inputs"), (Y, "references")):
        if len(set(labels)) != len(labels):
            raise SchemaError("labels must be distinct", f"/system/{key}")
    sidx = {x: i for i, x in enumerate(X)}
    _check_len(doc["dynamics"], len(X), "dynamics", "/system/dynamics")
    dyn = np.empty((len(X), len(U)), dtype=int)
    for i, row in enumerate(doc["dynamics"]):
        _check_len(row, len(U), "dynamics row", f"/system/dynamics/{i}")
        for j, nxt in enumerate(row):
            if _label(nxt) not in sidx:
                raise SchemaError(f"successor {nxt!r} is not a state", f"/system/dynamics/{i}/{j}")
            dyn[i, j] = sidx[_label(nxt)]
    stage = _cost_array(doc["stage_cost"], (len(X), len(U), len(Y)), "/system/stage_cost")
    term = _cost_array(doc["terminal_cost"], (len(X), len(Y)), "/system/terminal_cost")
    return GroundSystem([X] * (N + 1), [U] * N, [Y] * (N + 1), [dyn] * N, [stage] * N, term)


def _cost_array(nested, shape, pointer):
    def walk(node, depth, ptr):
        _check_len(node, shape[depth], "cost table", ptr)
        if depth == len(shape) - 1:
            return [_cost(v) for v in node]
        return [walk(v, depth + 1, f"{ptr}/{i}") for i, v in enumerate(node)]
    return np.array(walk(nested, 0, pointer), dtype=float).reshape(shape)


def _noisy_system(doc, N):
    X = [_label(x) for x in doc["states"]]
    U = [_label(u) for u in doc["inputs"]]
    Y = [_label(r) for r in doc["references"]]
    noise = _measure(doc["noise"], "/system/noise")
    sidx = {x: i for i, x in enumerate(X)}
    shape = (len(X), len(U), len(noise))
    dyn = np.empty(shape, dtype=int)
    _check_len(doc["dynamics"], len(X), "dynamics", "/system/dynamics")
    for i, row in enumerate(doc["dynamics"]):
        _check_len(row, len(U), "dynamics row", f"/system/dynamics/{i}")
        for j, cell in enumerate(row):
            _check_len(cell, len(noise), "dynamics cell", f"/system/dynamics/{i}/{j}")
            for l, nxt in enumerate(cell):
                if _label(nxt) not in sidx:
                    raise SchemaError(f"successor {nxt!r} is not a state",
                                      f"/system/dynamics/{i}/{j}/{l}")
                dyn[i, j, l] = sidx[_label(nxt)]
    stage = _cost_array(doc["stage_cost"], shape + (len(Y),), "/system/stage_cost")
    term = _cost_array(doc["terminal_cost"], (len(X), len(Y)), "/system/terminal_cost")
    return NoisyGroundSystem([X] * (N + 1), [U] * N, [Y] * (N + 1), [noise] * N, [dyn] * N,
                             [stage] * N, term)


def _lqr_system(doc, N):
    try:
        return LqrSystem(N, doc["A"], doc["B"], doc["R"], doc["P_N"])
    except FleetLiftError as exc:
        raise SchemaError(str(exc), "/system") from None


def parse_scenario(doc):
    """Validate a scenario document and build the Scenario."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        pointer = "".join(f"/{p}" for p in err.absolute_path)
        raise SchemaError(err.message, pointer)
    kind, N = doc["kind"], doc["horizon"]
    mu0 = _measure(doc["mu0"], "/mu0") if "mu0" in doc else None
    refs = []
    if "refs" in doc:
        raw = doc["refs"]
        if isinstance(raw, dict):
            refs = [_measure(raw, "/refs")]
        else:
            refs = [_measure(r, f"/refs/{i}") for i, r in enumerate(raw)]
            if len(refs) not in (1, N + 1):
                raise SchemaError(f"need 1 or {N + 1} references, got {len(refs)}", "/refs")
    sysdoc = doc["system"]
    if kind == "finite":
        system = _finite_system(sysdoc, N)
    elif kind == "noisy":
        system = _noisy_system(sysdoc, N)
    elif kind == "lqr":
        system = _lqr_system(sysdoc, N)
        if np.shape(sysdoc["particles"]) != np.shape(sysdoc["targets"]):
            raise SchemaError("particles and targets differ in shape", "/system/targets")
        if np.shape(sysdoc["particles"])[1] != system.n:
            raise SchemaError("particle dimension does not match A", "/system/particles")
    else:
        system = sysdoc
        if "particles" in sysdoc and np.shape(sysdoc["particles"]) != np.shape(sysdoc["targets"]):
            raise SchemaError("particles and targets differ in shape", "/system/targets")
    for i, r in enumerate(refs):
        if kind in ("finite", "noisy"):
            space = set(system.refs[0])
            bad = [p for p in r.points if p not in space]
            if bad:
                raise SchemaError(f"atom {bad[0]!r} is not a reference label",
                                  "/refs" if isinstance(doc["refs"], dict) else f"/refs/{i}")
    if mu0 is not None and kind in ("finite", "noisy"):
        bad = [p for p in mu0.points if p not in set(system.states[0])]
        if bad:
            raise SchemaError(f"atom {bad[0]!r} is not a state", "/mu0")
    return Scenario(doc["name"], kind, N, system, mu0, refs, dict(doc.get("options", {})), doc)


def load_scenario(path):
    """Read and validate a scenario file."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    return parse_scenario(doc)


def save_scenario(scenario_or_doc, path):
    doc = getattr(scenario_or_doc, "document", scenario_or_doc)
    with open(path, "w") as fh:
        fh.write(dump_json(doc))


# -- reports ---------------------------------------------------------------------------

@dataclass
class Report:
    scenario: str
    digest: str
    status: str = "ok"
    values: dict = field(default_factory=dict)
    rollout: dict = field(default_factory=dict)
    plans: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    error: str = ""

    @property
    def exit_code(self):
        return {"ok": EXIT_OK, "infeasible": EXIT_INFEASIBLE}.get(self.status, EXIT_ERROR)

    def to_dict(self, timings=False):
        out = {"scenario": self.scenario, "scenario_sha256": self.digest,
               "status": self.status, "exit_code": self.exit_code,
               "values": self.values, "rollout": self.rollout, "plans": self.plans,
               "stats": self.stats}
        if self.error:
            out["error"] = self.error
        if timings:
            out["timings"] = self.timings
        return out

    def to_json(self, timings=False):
        return dump_json(self.to_dict(timings))


def _plan_dict(plan):
    return {"cells": [[p for p in (plan.axis_points[a][i] for a, i in enumerate(cell))]
                      for cell in plan.cells],
            "mass": [float(m) for m in plan.mass], "value": plan.value}


def _measure_dict(m):
    return [[p, float(w)] for p, w in m]


def _rollout_dict(r, mode):
    return {"mode": mode,
            "stage_costs": list(r.stage_costs),
            "plan_stage_costs": list(r.plan_stage_costs),
            "flagged_stages": list(r.flags),
            "terminal_cost": r.terminal_cost,
            "total": r.total,
            "measures": [_measure_dict(m) for m in r.measures]}


def run(scenario, mode=None, rollout=None, seed=0, mem_cap=None):
    """Solve a scenario and return a Report (never raises FleetLiftError)."""
    opts = scenario.options
    mode = mode or opts.get("mode", "both")
    rollout = rollout or opts.get("rollout", "feedback")
    mem_cap = mem_cap or opts.get("mem_cap", MEM_CAP)
    report = Report(scenario.name, scenario.digest)
    t0 = time.perf_counter()
    try:
        if scenario.kind == "finite":
            _run_finite(scenario, report, mode, rollout, mem_cap)
        elif scenario.kind == "noisy":
            naive, true = naive_noisy_lift(scenario.system, scenario.mu0, scenario.refs)
            report.values = {"naive": naive, "true": true}
            if true == INF:
                report.status = "infeasible"
        elif scenario.kind == "integrator":
            _run_integrator(scenario, report, seed)
        else:
            _run_lqr(scenario, report)
    except InfeasibleError as exc:
        report.status = "infeasible"
        report.error = f"[{exc.module}] stage {exc.stage}: {exc}"
    except FleetLiftError as exc:
        report.status = "error"
        report.error = f"[{exc.module}] {exc}"
    report.timings["total_s"] = time.perf_counter() - t0
    return report


def _run_finite(sc, report, mode, rollout, mem_cap):
    sys, N = sc.system, sc.horizon
    refs = sc.refs if len(sc.refs) == N + 1 else sc.refs * (N + 1)
    tables = {}
    if mode in ("multi", "both"):
        tables["multi"] = dpa_multi(sys, mem_cap=mem_cap)
        lv = lifted_value(sys, tables["multi"], sc.mu0, refs, 0)
        report.values["V0"] = lv.value
        report.plans.append({"stage": 0, "mode": "multi", **_plan_dict(lv.plan)})
        report.stats["lp_iterations"] = lv.plan.iterations
    if mode in ("two", "both"):
        frozen = not all(_reference_free(g) for g in sys.stage_cost)
        tables["two"] = dpa_simple(sys, freeze_reference=frozen, mem_cap=mem_cap)
        lv = lifted_value(sys, tables["two"], sc.mu0, refs[-1], 0)
        report.values["V0_two"] = lv.value
        report.values["two_marginal_frozen_reference"] = frozen
        report.plans.append({"stage": 0, "mode": "two", **_plan_dict(lv.plan)})
    if sc.options.get("oracle"):
        M = sc.options.get("particles")
        value, table = oracle_solve(sys, M, sc.mu0, refs)
        report.values["oracle"] = value
        report.stats["oracle_configurations"] = len(table.values)
    main = report.values.get("V0", report.values.get("V0_two"))
    if main == INF:
        report.status = "infeasible"
        return
    if rollout != "none":
        key = "multi" if "multi" in tables else "two"
        table = tables[key]
        rrefs = refs if key == "multi" else refs[-1]
        if rollout == "feedback":
            r = rollout_feedback(sys, table, sc.mu0, rrefs)
        else:
            r = rollout_openloop(sys, table, sc.mu0, rrefs, sc.options.get("particles"))
        report.rollout = _rollout_dict(r, rollout)


def _integrator_points(sc, seed):
    d = sc.system
    if "particles" in d:
        return np.array(d["particles"], float), np.array(d["targets"], float)
    rng = np.random.default_rng(seed)
    return rng.normal(size=(d["M"], d["dim"])), rng.normal(size=(d["M"], d["dim"]))


def _run_integrator(sc, report, seed):
    N = sc.horizon
    xs, ys = _integrator_points(sc, seed)
    r, values, positions = integrator_fleet(xs, ys, N)
    report.values = {"V0": values[0], "W2sq": w2_squared(xs, ys),
                     "formula_V0": w2_squared(xs, ys) / N}
    report.rollout = {"mode": "feedback", "stage_costs": r.stage_costs,
                      "terminal_cost": r.terminal_cost, "total": r.total,
                      "stage_values": values, "final_positions": positions[-1]}


def _run_lqr(sc, report):
    d, sys, N = sc.document["system"], sc.system, sc.horizon
    noise_mean = d.get("noise_mean")
    noise_cov = d.get("noise_cov")
    Q = d.get("Q")
    c = lqr_pair_recursion(sys, noise_mean, noise_cov, Q)
    xs = np.array(d["particles"], float)
    ys = np.array(d["targets"], float)
    C = np.array([[c.cost(0, x, y) for y in ys] for x in xs])
    V0, _ = empirical_ot(C)
    report.values = {"V0": V0}
    report.stats["heart_residual"] = max(c.heart, default=0.0)
    if noise_mean is not None or noise_cov is not None:
        return
    Qm = np.zeros((sys.n, sys.n)) if Q is None else np.atleast_2d(np.asarray(Q, float))
    r, values, positions = rollout_feedback_continuous(
        xs, ys, N,
        c.cost,
        c.input,
        lambda k, x, u: sys.A[k] @ x + sys.B[k] @ u,
        lambda k, x, u, y: float(u @ sys.R[k] @ u + (x - y) @ Qm @ (x - y)),
        terminal_cost=lambda x, y: float((x - y) @ sys.P_N @ (x - y)))
    report.rollout = {"mode": "feedback", "stage_costs": r.stage_costs,
                      "terminal_cost": r.terminal_cost, "total": r.total,
                      "stage_values": values, "final_positions": positions[-1]}
