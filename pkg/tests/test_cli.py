import json
import math

import pytest

from attractor import cli
from attractor.cli import (ExperimentConfig, load_batch, load_config, main, run_batch, run_experiment,
                           save_config, validate_experiment)
from attractor.errors import ConfigSemanticError, ConfigSyntaxError
from attractor.iterate import HALPERN_STOP_TOL, MANN_STOP_TOL

EXAMPLE_GENS = [0.5, -0.5, 1, -1, 2, -2]


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return p


def paper_mann(**extra):
    cfg = {"name": "paper-mann", "mapping": "paper_example", "generators": EXAMPLE_GENS,
           "scheme": {"type": "mann", "x1": 3, "alpha": 0.5}}
    cfg.update(extra)
    return cfg


# -- loading -------------------------------------------------------------


def test_minimal_config(tmp_path):
    raw = {"mapping": "paper_example", "generators": [0.5, -0.5],
           "scheme": {"type": "mann", "x1": 3, "alpha": {"family": "constant", "value": 0.5}}}
    cfg = load_config(write(tmp_path, raw))
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.mapping == {"name": "paper_example", "params": {}}
    assert cfg.scheme["x1"] == [3.0]
    assert cfg.tolerances["stop_tol"] == MANN_STOP_TOL


def test_defaults_per_scheme(tmp_path):
    raw = {"mapping": "rotation_2d(pi/3)", "generators": [[1, 0], [0, 1]],
           "scheme": {"type": "halpern", "u": [2, 0], "x1": [1, 1],
                      "alpha": {"family": "power"}, "beta": 0.5}}
    cfg = load_config(write(tmp_path, raw))
    assert cfg.tolerances["stop_tol"] == HALPERN_STOP_TOL
    assert cfg.tolerances["max_steps"] == 200_000
    assert cfg.scheme["alpha"] == {"family": "power", "scale": 1.0, "exponent": 1.0, "shift": 0.0}
    assert cfg.mapping["params"]["theta"] == pytest.approx(math.pi / 3)


@pytest.mark.parametrize("raw, field", [
    ({"mapping": "nonexistent", "generators": [1]}, "mapping"),
    ({"mapping": "paper_example", "generators": [0.0]}, "generators[0]"),
    ({"mapping": "paper_example", "generators": [1], "bogus": 1}, "experiment.bogus"),
    ({"mapping": "paper_example", "generators": [1], "scheme": {"type": "mann", "x1": [1, 2], "alpha": 0.5}},
     "scheme.x1"),
    ({"mapping": "paper_example", "generators": [1], "scheme": {"type": "newton"}}, "scheme.type"),
    ({"mapping": "paper_example", "generators": [1], "tolerances": {"stop": 1}}, "tolerances.stop"),
    ({"mapping": "paper_example", "generators": [1], "checks": [{"kind": "gh"}]}, "checks[0].kind"),
    ({"mapping": "paper_example", "generators": [1],
      "checks": [{"kind": "wmgh", "coefficients": [1, 0]}]}, "checks[0].coefficients"),
    ({"generators": [1]}, "mapping"),
])
def test_semantic_errors_name_the_field(tmp_path, raw, field):
    with pytest.raises(ConfigSemanticError) as info:
        load_config(write(tmp_path, raw))
    assert info.value.field == field


def test_syntax_error_position(tmp_path):
    p = write(tmp_path, '{\n  "mapping": "paper_example",\n  "generators": [1,]\n}')
    with pytest.raises(ConfigSyntaxError) as info:
        load_config(p)
    assert info.value.line == 3
    assert info.value.column is not None


@pytest.mark.parametrize("raw", [
    paper_mann(),
    {"mapping": {"name": "contraction", "params": {"c": 0.5, "p": [0.25, -0.5]}},
     "generators": {"seed": 4, "count": 12},
     "scheme": {"type": "halpern", "u": [1, 1], "x1": [0, 2], "alpha": {"family": "power", "exponent": 0.8},
                "beta": 0.25},
     "checks": [{"kind": "generalized_hybrid", "coefficients": [1, 0], "samples": 100}],
     "scan": {"lo": -1, "hi": 1, "step": 0.5}, "tolerances": {"stop_tol": 1e-5}},
])
def test_round_trip(tmp_path, raw):
    cfg = load_config(write(tmp_path, raw))
    save_config(cfg, tmp_path / "again.json")
    assert load_config(tmp_path / "again.json") == cfg


def test_batch_forms(tmp_path):
    one = paper_mann()
    two = dict(paper_mann(), name="other")
    assert len(load_batch(write(tmp_path, one))) == 1
    assert [c.name for c in load_batch(write(tmp_path, [one, two]))] == ["paper-mann", "other"]
    assert len(load_batch(write(tmp_path, {"experiments": [one, two]}))) == 2
    with pytest.raises(ConfigSemanticError):
        load_batch(write(tmp_path, [one, one]))
    with pytest.raises(ConfigSemanticError):
        load_config(write(tmp_path, [one]))


# -- running -------------------------------------------------------------


def test_run_paper_mann(tmp_path):
    cfg = validate_experiment(paper_mann())
    e = run_experiment(cfg, tmp_path)
    assert e["status"] == "ok"
    it = e["iteration"]
    assert it["verdict"]["converged"]
    assert abs(it["limit"][0]) < 1e-10
    assert it["member_of_attractor"] is True
    assert e["attractor"]["constraints"] == 5
    d = tmp_path / "paper-mann"
    assert {p.name for p in d.iterdir()} == {"trace.csv", "attractor.json", "report.json"}
    assert json.loads((d / "report.json").read_text())["status"] == "ok"
    assert json.loads((d / "attractor.json").read_text())["dimension"] == 1


def test_run_paper_scan(tmp_path):
    cfg = validate_experiment({"name": "scan", "mapping": "paper_example", "generators": EXAMPLE_GENS,
                               "scan": {"lo": -2, "hi": 2, "step": 0.015625}})
    e = run_experiment(cfg, tmp_path)
    assert e["fixed_point_scan"]["fixed_points"] == [[0.0], [1.0]]
    e = run_experiment(cfg, tmp_path, overwrite=True, mode="scan")
    assert e["fixed_point_scan"]["fixed_points"] == [[0.0], [1.0]]


def test_halpern_theta_two_records_failure(tmp_path):
    cfg = validate_experiment({"name": "h2", "mapping": "paper_example", "generators": EXAMPLE_GENS,
                               "scheme": {"type": "halpern", "u": 2, "x1": 2,
                                          "alpha": {"family": "power", "exponent": 2}, "beta": 0.5},
                               "tolerances": {"max_steps": 500}})
    e = run_experiment(cfg, tmp_path)
    it = e["iteration"]
    assert it["iterates"] > 1
    assert it["schedule_conditions_met"] is False
    failed = {d["condition"] for d in it["diagnostics"] if d["passed"] is False}
    assert failed == {"alpha_divergent_sum"}


def test_negative_check_is_a_pass(tmp_path):
    cfg = validate_experiment({"name": "neg", "mapping": "paper_example", "generators": EXAMPLE_GENS,
                               "checks": [{"kind": "generalized_hybrid", "coefficients": [1, 0],
                                           "expect": "violated", "samples": 2000},
                                          {"kind": "quasinonexpansive_wrt", "points": [0],
                                           "target": "extension", "samples": 500}]})
    e = run_experiment(cfg, tmp_path, mode="check")
    assert [c["passed"] for c in e["checks"]] == [True, True]
    assert e["status"] == "ok"
    assert e["checks"][0]["verdict"]["witness"] is not None


def test_byte_identical_reruns(tmp_path):
    raw = {"name": "rot", "mapping": "rotation_2d(pi/3)", "generators": {"seed": 1, "count": 20},
           "scheme": {"type": "halpern", "u": [2, 0], "x1": [1, 1], "alpha": {"family": "power"}, "beta": 0.5},
           "tolerances": {"max_steps": 2000}}
    cfg = validate_experiment(raw)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    a = (tmp_path / "a" / "rot" / "trace.csv").read_bytes()
    assert a == (tmp_path / "b" / "rot" / "trace.csv").read_bytes()
    assert a.startswith(b"n,x_1,x_2,residual,step_norm,alpha_n,beta_n\n")


def test_seed_env_override(tmp_path, monkeypatch):
    cfg = validate_experiment({"name": "s", "mapping": "rotation_2d(1)", "generators": {"seed": 1, "count": 6}})
    run_experiment(cfg, tmp_path / "a")
    monkeypatch.setenv("ATTRACTOR_SEED", "99")
    run_experiment(cfg, tmp_path / "b")
    run_experiment(cfg, tmp_path / "c")
    ga, gb, gc = (json.loads((tmp_path / k / "s" / "attractor.json").read_text())["generators"] for k in "abc")
    assert ga != gb and gb == gc


def test_exit_codes():
    assert cli.exit_code([{"status": "ok"}]) == 0
    assert cli.exit_code([{"status": "ok"}, {"status": "verdict_failure"}]) == 1
    assert cli.exit_code([{"status": "error"}, {"status": "divergence"}]) == 3


def test_batch_refuses_existing_output(tmp_path):
    cfgs = [validate_experiment(paper_mann())]
    entries, code = run_batch(cfgs, tmp_path)
    assert code == 0
    assert json.loads((tmp_path / "summary.json").read_text())["experiments"][0]["name"] == "paper-mann"
    with pytest.raises(ConfigSemanticError):
        run_batch(cfgs, tmp_path)
    _, code = run_batch(cfgs, tmp_path, overwrite=True)
    assert code == 0


def test_batch_parallel_matches_serial(tmp_path):
    cfgs = [validate_experiment(paper_mann()),
            validate_experiment(dict(paper_mann(), name="neg", mapping="negation_d(1)"))]
    serial, _ = run_batch(cfgs, tmp_path / "s")
    par, _ = run_batch(cfgs, tmp_path / "p", jobs=2)
    strip = [{k: v for k, v in e.items() if k != "wall_time"} for e in serial]
    assert strip == [{k: v for k, v in e.items() if k != "wall_time"} for e in par]


def test_main(tmp_path, capsys):
    p = write(tmp_path, {"experiments": [paper_mann()]})
    out = tmp_path / "out"
    assert main(["run", str(p), "--out", str(out)]) == 0
    assert "paper-mann: ok" in capsys.readouterr().out
    assert main(["run", str(p), "--out", str(out)]) == 2
    assert main(["scan", str(p), "--out", str(out), "--overwrite"]) == 0
    assert main(["run", str(write(tmp_path, "{", "bad.json"))]) == 2
    slow = dict(paper_mann(), scheme={"type": "halpern", "u": 2, "x1": 2, "alpha": {"family": "power"},
                                      "beta": 0.5}, tolerances={"max_steps": 50})
    assert main(["run", str(write(tmp_path, slow, "slow.json")), "--out", str(tmp_path / "o2")]) == 1
