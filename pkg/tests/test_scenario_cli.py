import copy
import json

import pytest

from fleetlift import catalog
from fleetlift.cli import bench_csv, main
from fleetlift.errors import SchemaError
from fleetlift.extended import INF
from fleetlift.scenario import (BUNDLED, INF_TOKEN, bundled_path, dump_json, load_scenario,
                                parse_scenario, run, save_scenario)


def doc(name):
    return json.loads(bundled_path(name).read_text())


def test_bundled_files_match_catalog():
    docs = catalog.all_documents()
    assert sorted(docs) == sorted(BUNDLED)
    for name, d in docs.items():
        assert bundled_path(name).read_text() == dump_json(d)


@pytest.mark.parametrize("name", BUNDLED)
def test_round_trip_is_byte_identical(name, tmp_path):
    sc = load_scenario(bundled_path(name))
    out = tmp_path / "copy.json"
    save_scenario(sc, out)
    assert out.read_text() == bundled_path(name).read_text()
    assert load_scenario(out).digest == sc.digest


def test_infinity_sentinel():
    d = doc("forest_ride")
    assert INF_TOKEN in bundled_path("forest_ride").read_text()
    sc = parse_scenario(d)
    assert INF in sc.system.stage_cost[0]


def test_bad_weights_rejected():
    d = doc("split_mass")
    d["mu0"]["atoms"] = [{"point": 0, "weight": 0.9}]
    with pytest.raises(SchemaError) as err:
        parse_scenario(d)
    assert err.value.pointer == "/mu0"


def test_schema_pointer():
    d = doc("counterexample_multimarginal")
    d["horizon"] = "two"
    with pytest.raises(SchemaError) as err:
        parse_scenario(d)
    assert err.value.pointer == "/horizon"
    d = doc("counterexample_multimarginal")
    d["system"]["stage_cost"][0][0][0] = -1
    with pytest.raises(SchemaError) as err:
        parse_scenario(d)
    assert err.value.pointer.startswith("/system/stage_cost/0/0/0")


def test_unknown_label_rejected():
    d = doc("split_mass")
    d["refs"]["atoms"][0]["point"] = 7
    with pytest.raises(SchemaError):
        parse_scenario(d)


def test_run_values():
    r = run(load_scenario(bundled_path("counterexample_multimarginal")), mode="both")
    assert (r.values["V0"], r.values["V0_two"], r.values["oracle"]) == (0.0, 2.0, 0.0)
    assert r.rollout["total"] == 0.0
    r = run(load_scenario(bundled_path("noise_counterexample")))
    assert r.values == {"naive": 1.0, "true": 0.0}
    r = run(load_scenario(bundled_path("zero_cost")))
    assert r.values["V0"] == r.values["V0_two"] == 0.0 and r.rollout["total"] == 0.0


def test_forest_ride():
    r = run(load_scenario(bundled_path("forest_ride")))
    assert r.status == "ok"
    assert r.rollout["terminal_cost"] == 0.0
    assert r.rollout["total"] == r.values["V0_two"]


def test_integrator_and_lqr():
    r = run(load_scenario(bundled_path("integrator")), seed=3)
    assert abs(r.values["V0"] - r.values["formula_V0"]) <= 1e-9
    assert abs(r.rollout["total"] - r.values["V0"]) <= 1e-9
    r = run(load_scenario(bundled_path("lqr_pair")))
    assert abs(r.rollout["total"] - r.values["V0"]) <= 1e-9
    assert r.stats["heart_residual"] <= 1e-10


def test_infeasible_exit_code():
    d = doc("split_mass")
    d["system"]["dynamics"] = [[-1, -1, -1]] * 3
    d["system"]["terminal_cost"] = [[0 if x == r else INF_TOKEN for r in (-1, 0, 1)]
                                    for x in (-1, 0, 1)]
    r = run(parse_scenario(d))
    assert r.status == "infeasible" and r.exit_code == 2


def test_error_status_on_capacity():
    r = run(load_scenario(bundled_path("counterexample_multimarginal")), mem_cap=10)
    assert r.status == "error" and r.exit_code == 1 and "ground-dp" in r.error


def test_reports_deterministic():
    for name in BUNDLED:
        sc = load_scenario(bundled_path(name))
        assert run(sc, seed=5).to_json() == run(sc, seed=5).to_json()
    timed = run(load_scenario(bundled_path("zero_cost"))).to_dict(timings=True)
    assert "timings" in timed


def test_mode_both_dominance_on_bundled():
    for name in ("counterexample_multimarginal", "robots_grid", "zero_cost"):
        r = run(load_scenario(bundled_path(name)), mode="both")
        assert r.values["V0_two"] >= r.values["V0"]


def test_cli_solve(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["solve", "counterexample_multimarginal", "--mode", "both",
                 "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["values"]["V0"] == 0.0 and rep["values"]["V0_two"] == 2.0
    assert "timings" not in rep
    assert main(["solve", str(bundled_path("split_mass")), "--timings"]) == 0
    assert "timings" in json.loads(capsys.readouterr().out)


def test_cli_solve_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    d = doc("split_mass")
    d["mu0"]["atoms"][0]["weight"] = 0.9
    bad.write_text(json.dumps(d))
    assert main(["solve", str(bad)]) == 1
    assert "/mu0" in capsys.readouterr().err
    d = copy.deepcopy(doc("split_mass"))
    d["system"]["dynamics"] = [[-1, -1, -1]] * 3
    d["system"]["terminal_cost"] = [[0 if x == r else INF_TOKEN for r in (-1, 0, 1)]
                                    for x in (-1, 0, 1)]
    bad.write_text(json.dumps(d))
    assert main(["solve", str(bad)]) == 2


def test_cli_bench(capsys):
    assert main(["bench", "--grid", "1:10,10:10,1000:1e7"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "M,n_states,configurations,ops_per_state_input,overflow"
    assert lines[1] == "1,10,10,10,0"
    assert lines[2] == "10,10,92378,10,0"
    assert lines[3].startswith("1000,10000000,") and lines[3].endswith(",1")
    assert bench_csv([(1, 10)]) == "M,n_states,configurations,ops_per_state_input,overflow\n1,10,10,10,0\n"


def test_cli_verify(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert main(["verify", "paper-values", "--seed", "7", "--out", str(out)]) == 0
    assert "FAIL" not in capsys.readouterr().out
    assert json.loads(out.read_text())["passed"] is True
