import json
import subprocess
import sys

import pytest

from admitfair.cli import run
from conftest import FIXTURES

POP = str(FIXTURES / "population.json")


def load(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_validate_fixture(capsys):
    assert run(["validate", "--population", POP]) == 0
    assert json.loads(capsys.readouterr().out)["all_hold"] is True


def test_validate_failure_reports_on_stderr(tmp_path, capsys):
    doc = json.loads((FIXTURES / "population.json").read_text(encoding="utf-8"))
    doc["regions"][0]["scale_param"], doc["regions"][1]["scale_param"] = 0.15, 0.3
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    assert run(["validate", "--population", str(path), "--out", str(tmp_path / "v.json")]) == 1
    diag = json.loads(capsys.readouterr().err)
    assert diag["violations"][0]["code"] == "cdf_dominance"


def test_check_theorem3(tmp_path):
    out = tmp_path / "c.json"
    assert run(["check", "--population", POP, "--theorem", "3", "--out", str(out)]) == 0
    witness = load(out)["theorem"]["witness"]
    assert abs(witness["conservation_residual"]) < 1e-8 * 100


def test_check_indeterminate_exits_one(tmp_path, capsys):
    assert run(["check", "--population", POP, "--theorem", "1", "--eta", "1", "--out", str(tmp_path / "c.json")]) == 1
    assert json.loads(capsys.readouterr().err)["status"] == "indeterminate"


def test_quota_eta_one_matches_top_percentage(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["solve", "--population", POP, "--procedure", "quota", "--eta", "1", "--out", str(a)]) == 0
    assert run(["solve", "--population", POP, "--procedure", "top-percentage", "--out", str(b)]) == 0
    qa = {(c["group"], c["region"]): c["threshold"] for c in load(a)["outcome"]["cells"]}
    qb = {(c["group"], c["region"]): c["threshold"] for c in load(b)["outcome"]["cells"]}
    assert qa.keys() == qb.keys()
    assert all(abs(qa[k] - qb[k]) <= 1e-10 for k in qa)


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--population", POP, "--procedure", "quota", "--out", "-"],
        ["solve", "--population", POP, "--procedure", "default", "--eta", "1", "--out", "-"],
        ["check", "--population", POP, "--theorem", "2", "--out", "-"],
        ["check", "--population", POP, "--theorem", "3", "--eta", "1", "--out", "-"],
        ["solve", "--population", POP, "--procedure", "default", "--bogus", "--out", "-"],
        ["frobnicate"],
        [],
    ],
)
def test_usage_errors(argv):
    assert run(argv) == 2


def test_domain_error_exit_one(tmp_path, capsys):
    code = run(["solve", "--population", POP, "--procedure", "quota", "--eta", "9", "--out", str(tmp_path / "o.json")])
    assert code == 1
    assert "eta_quota" in json.loads(capsys.readouterr().err)["message"]


def test_missing_file(tmp_path, capsys):
    assert run(["validate", "--population", str(tmp_path / "nope.json")]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "FileNotFoundError"


def test_simulate_and_report_deterministic(tmp_path):
    outs = []
    for i in range(2):
        sim = tmp_path / f"s{i}.json"
        rep = tmp_path / f"r{i}.json"
        argv = ["simulate", "--population", POP, "--procedure", "plus-factor", "--eta", "0.8",
                "--seed", "5", "--replication", "200", "--threads", str(i + 1), "--out", str(sim)]
        assert run(argv) == 0
        assert run(["report", "--in", str(sim), "--out", str(rep)]) == 0
        outs.append((sim.read_bytes(), rep.read_bytes()))
    assert outs[0] == outs[1]
    assert load(tmp_path / "s0.json")["simulation"]["all_within"] is True


def test_fit_fixture(tmp_path):
    truth = load(FIXTURES / "synthetic_truth.json")
    results = []
    for i in range(2):
        out = tmp_path / f"fit{i}.json"
        argv = ["fit", "--stats-groups", str(FIXTURES / "synthetic_groups.csv"),
                "--stats-quantiles", str(FIXTURES / "synthetic_quantiles.csv"),
                "--regions", "3", "--restarts", "4", "--seed", "0", "--threads", "1", "--out", str(out)]
        assert run(argv) == 0
        results.append(out.read_bytes())
    assert results[0] == results[1]
    sol = json.loads(results[0])["solution"]
    assert sol["loss"] < truth["fit_loss_threshold"]
    rep = tmp_path / "rep.json"
    assert run(["report", "--in", str(tmp_path / "fit0.json"), "--out", str(rep)]) == 0
    assert load(rep)["fit_loss"] == sol["loss"]


def test_console_script_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "admitfair.cli", "solve", "--population", POP, "--procedure", "default", "--out", "-"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["outcome"]["procedure"] == "default"
