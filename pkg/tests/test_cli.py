import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from costly_recognition import cli
from costly_recognition.solver import NoCrossingError

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_writes_csv_that_verifies(capsys, tmp_path):
    sol = tmp_path / "sol.csv"
    code, out, _ = run(capsys, "solve", "--scenario", SCENARIOS / "example1_k2.json", "--csv", sol)
    assert code == 0
    assert "verification: PASS" in out
    assert "0.2322" in out and "3.0011" in out
    with open(sol, newline="") as fh:
        header = next(csv.reader(fh))
    assert header == ["agent", "x", "p", "mu", "v", "group", "psi_1", "psi_2", "psi_3", "psi_4", "Y", "V_delta", "V_L"]
    code, out, _ = run(capsys, "verify", "--scenario", SCENARIOS / "example1_k2.json", "--csv", sol)
    assert code == 0
    assert "verification: PASS" in out


def test_verify_rejects_a_tampered_solution(capsys, tmp_path):
    sol = tmp_path / "sol.csv"
    run(capsys, "solve", "--scenario", SCENARIOS / "example2.json", "--csv", sol)
    rows = list(csv.DictReader(open(sol, newline="")))
    rows[0]["x"] = str(float(rows[0]["x"]) * 1.01)
    with open(sol, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        wr.writerows(rows)
    code, out, _ = run(capsys, "verify", "--scenario", SCENARIOS / "example2.json", "--csv", sol)
    assert code == 3
    assert "verification: FAIL" in out


def test_verify_rejects_a_solution_for_another_game(capsys, tmp_path):
    sol = tmp_path / "sol.csv"
    run(capsys, "solve", "--scenario", SCENARIOS / "example2.json", "--csv", sol)
    code, _, err = run(capsys, "verify", "--scenario", SCENARIOS / "example1_k2.json", "--csv", sol)
    assert code == 1
    assert "3 rows for 4 agents" in err


def test_solve_all_roots(capsys):
    code, out, _ = run(capsys, "solve", "--scenario", SCENARIOS / "example1_k3.json", "--roots", "all", "--grid", 128)
    assert code == 0
    assert "2.8072" in out


def test_bad_scenario_exits_with_input_error(capsys, tmp_path):
    path = tmp_path / "bad.json"
    doc = json.loads((SCENARIOS / "example1_k2.json").read_text())
    doc["agents"][1]["bias"] = 2.0
    path.write_text(json.dumps(doc, indent=2))
    code, _, err = run(capsys, "solve", "--scenario", path)
    assert code == 1
    assert f"{path}:" in err and "'bias'" in err


def test_bad_tolerance_and_grid_exit_with_input_error(capsys):
    assert run(capsys, "solve", "--scenario", SCENARIOS / "example1_k2.json", "--tol", "-1")[0] == 1
    assert run(capsys, "solve", "--scenario", SCENARIOS / "example1_k2.json", "--grid", "4")[0] == 1


def test_solver_failure_exit_code(capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise NoCrossingError("no vote price found")

    monkeypatch.setattr(cli, "solve", boom)
    code, _, err = run(capsys, "solve", "--scenario", SCENARIOS / "example1_k2.json")
    assert code == 2
    assert "solver failure" in err


def test_design_locked_table(capsys, tmp_path):
    out_csv = tmp_path / "design.csv"
    code, out, _ = run(capsys, "design", "--scenario", SCENARIOS / "example1_design.json", "--csv", out_csv)
    assert code == 0
    for value in ("3.0000", "3.0011", "2.8072", "2.5116"):
        assert value in out
    assert "best k = 2" in out
    rows = list(csv.DictReader(open(out_csv, newline="")))
    assert [int(r["k"]) for r in rows] == [1, 2, 3, 4]


def test_simulate(capsys, tmp_path):
    out_csv = tmp_path / "sim.csv"
    code, out, _ = run(capsys, "simulate", "--scenario", SCENARIOS / "example2.json", "--rounds", 100000, "--seed", 4,
                       "--csv", out_csv)
    assert code == 0
    assert "within 3 standard errors: p=yes, mu=yes, v=yes" in out
    assert "agreement period histogram: 0: 100000" in out
    assert out_csv.exists()


def test_simulate_rejects_seed_zero(capsys):
    code, _, err = run(capsys, "simulate", "--scenario", SCENARIOS / "example2.json", "--seed", 0)
    assert code == 1
    assert "seed 0" in err


def test_reproduce_three_agent_construction(capsys):
    code, out, _ = run(capsys, "reproduce", "ex2")
    assert code == 0
    lines = out.strip().splitlines()
    assert all(line.startswith(("CHECK ex2 ", "SUMMARY ex2 ")) for line in lines)
    assert lines[-1].startswith("SUMMARY ex2 PASS")


def test_reproduce_four_agent_table_reports_the_k3_column(capsys):
    code, out, _ = run(capsys, "reproduce", "ex1")
    assert code == 3
    assert "CHECK ex1 table_k3 FAIL" in out
    assert "CHECK ex1 table_k2 PASS" in out
    assert "SUMMARY ex1 FAIL 8/9" in out


def test_reproduce_unknown_id(capsys):
    code, _, err = run(capsys, "reproduce", "ex9")
    assert code == 1
    assert "unknown reproduction" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "costly_recognition", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("solve", "design", "verify", "simulate", "reproduce"):
        assert cmd in res.stdout


def test_missing_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as err:
        cli.main([])
    assert err.value.code == 2


@pytest.mark.parametrize("rid", ["ex3", "thm3-signs"])
def test_reproduce_passing_ids(capsys, rid):
    code, out, _ = run(capsys, "reproduce", rid)
    assert code == 0
    assert f"SUMMARY {rid} PASS" in out
