import json

import pytest

from radiomap.cli import main


def _metrics(path):
    doc = json.loads(path.read_text())
    assert doc["schema"] == "radiomap.metrics" and doc["schema_version"] == 1
    return doc


def test_simulate_estimate_eval(tmp_path):
    assert main(["--seed", "5", "--out", str(tmp_path), "simulate", "--measurements"]) == 0
    assert (tmp_path / "truth.json").exists() and (tmp_path / "measurements.csv").exists()
    est = tmp_path / "est"
    assert main(["--seed", "5", "--out", str(est), "estimate",
                 "--measurements", str(tmp_path / "measurements.csv")]) == 0
    doc = _metrics(est / "estimate_metrics.json")
    assert doc["command"] == "estimate" and doc["seed"] == 5
    ev = tmp_path / "ev"
    assert main(["--out", str(ev), "eval", "--truth", str(tmp_path / "truth.json"),
                 "--estimate", str(est / "estimate.json")]) == 0
    assert _metrics(ev / "eval_metrics.json")["mse"] >= 0


@pytest.mark.parametrize("name", ["krr", "ls", "lasso", "completion"])
def test_estimators(tmp_path, name):
    sc = tmp_path / "sc.json"
    sc.write_text(json.dumps({"grid": [10, 10], "estimator": {"name": name}}))
    code = main(["--out", str(tmp_path), "--scenario", str(sc), "estimate"])
    assert code in (0, 3)
    _metrics(tmp_path / "estimate_metrics.json")


def test_survey_and_admm(tmp_path):
    sc = tmp_path / "sc.json"
    sc.write_text(json.dumps({"grid": [8, 8], "survey": {"budget": 10}}))
    assert main(["--out", str(tmp_path), "--scenario", str(sc), "survey"]) == 0
    assert (tmp_path / "trajectory.csv").exists() and (tmp_path / "baseline_trajectory.csv").exists()
    _metrics(tmp_path / "survey_metrics.json")
    assert main(["--out", str(tmp_path), "admm"]) == 0
    assert _metrics(tmp_path / "admm_metrics.json")["converged"] is True


def test_admm_nonconvergence_exit_code(tmp_path):
    sc = tmp_path / "sc.json"
    sc.write_text(json.dumps({"admm": {"max_rounds": 1}}))
    assert main(["--out", str(tmp_path), "--scenario", str(sc), "admm"]) == 3
    assert (tmp_path / "convergence.csv").exists()


def test_figures(tmp_path):
    assert main(["--seed", "2", "--out", str(tmp_path), "figures", "fig4"]) == 0
    assert (tmp_path / "fig4.svg").exists()
    assert main(["--out", str(tmp_path), "figures", "fig9"]) == 2


@pytest.mark.parametrize("argv", [
    ["--seed", "-1", "simulate"],
    ["--seed", "abc", "simulate"],
    ["--scenario", "/nonexistent.json", "simulate"],
    ["eval", "--truth", "/nonexistent.json", "--estimate", "/nonexistent.json"],
    ["bogus"],
])
def test_validation_errors(tmp_path, argv, capsys):
    assert main(["--out", str(tmp_path)] + argv) == 2


def test_bad_scenario_values(tmp_path):
    sc = tmp_path / "sc.json"
    sc.write_text(json.dumps({"estimator": {"name": "magic"}}))
    assert main(["--out", str(tmp_path), "--scenario", str(sc), "estimate"]) == 2
    sc.write_text("{not json")
    assert main(["--out", str(tmp_path), "--scenario", str(sc), "simulate"]) == 2
