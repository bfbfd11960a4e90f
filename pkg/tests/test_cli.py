import csv
import io
import json
import shutil
import subprocess
import sys
from fractions import Fraction as F

import pytest

from dvfsched import cli
from dvfsched.bundled import data_dir
from dvfsched.power import PowerModel, active_power

TS = data_dir("tasksets")
PROC = data_dir("processors")


def run(args, capsys):
    rc = cli.main([str(a) for a in args])
    out = capsys.readouterr()
    return rc, out.out, out.err


def solve(tmp_path, capsys, alg, taskset="d04", proc="xscale", extra=()):
    return run(["solve", "--alg", alg, "--taskset", TS / f"{taskset}.json",
                "--proc", PROC / f"{proc}.json", "-m", 2, "--out-dir", tmp_path, "-q", *extra],
               capsys)


def test_solve_writes_artifacts(tmp_path, capsys):
    rc, _, _ = solve(tmp_path, capsys, "lp-dvfs", extra=["--certify"])
    assert rc == 0
    summary = json.loads((tmp_path / "d04_lp-dvfs.summary.json").read_text())
    assert summary["certificate"]["ok"]
    assert summary["total_energy"] == pytest.approx(summary["objective_energy"] + 2 * 10 * 40)
    assert len(summary["intervals"]) == 2
    assert (tmp_path / "d04_lp-dvfs.gantt.csv").read_text().startswith("proc,task,job")
    rc, _, _ = solve(tmp_path, capsys, "gp-nodvfs")
    base = json.loads((tmp_path / "d04_gp-nodvfs.summary.json").read_text())
    assert summary["formulation_objective"] <= base["formulation_objective"]
    assert summary["objective_energy"] <= base["objective_energy"]


def test_solve_every_algorithm_validates(tmp_path, capsys):
    for alg in cli.ALGORITHMS:
        rc, _, _ = solve(tmp_path, capsys, alg, taskset="d14", proc="powerpc405lp")
        assert rc == 0
        rc, out, _ = run(["validate", tmp_path / f"d14_{alg}.schedule.json",
                          "--taskset", TS / "d14.json", "--proc", PROC / "powerpc405lp.json"],
                         capsys)
        assert rc == 0 and out.strip() == "valid"


def test_certify_note_for_static_baselines(tmp_path, capsys):
    solve(tmp_path, capsys, "gp-svfs", extra=["--certify"])
    summary = json.loads((tmp_path / "d04_gp-svfs.summary.json").read_text())
    assert summary["certificate"] is None and "certificate_note" in summary


def test_infeasible_exit_code(tmp_path, capsys):
    rc, _, err = run(["solve", "--alg", "lp-dvfs", "--taskset", TS / "d20.json",
                      "--proc", PROC / "xscale.json", "-m", 1, "--out-dir", tmp_path], capsys)
    assert rc == 2 and "D ≤ m" in err


def test_usage_errors(tmp_path, capsys):
    rc, _, _ = run(["solve", "--alg", "nope"], capsys)
    assert rc == 1
    rc, _, err = run(["solve", "--alg", "lp-dvfs", "--taskset", tmp_path / "missing.json",
                      "--proc", PROC / "xscale.json", "-m", 2], capsys)
    assert rc == 1 and "missing.json" in err
    bad = tmp_path / "bad.json"
    bad.write_text('{"tasks": [{"id": "a", "work": 1, "period": 2}]}')
    rc, _, err = run(["solve", "--alg", "lp-dvfs", "--taskset", bad,
                      "--proc", PROC / "xscale.json", "-m", 2], capsys)
    assert rc == 1 and "bad.json" in err and "deadline" in err
    rc, _, _ = run(["solve", "--alg", "lp-dvfs", "--taskset", TS / "d04.json",
                    "--proc", PROC / "xscale.json", "-m", 0], capsys)
    assert rc == 1


def test_discrete_algorithm_needs_levels(tmp_path, capsys):
    doc = json.loads((PROC / "xscale.json").read_text())
    doc["levels"] = []
    doc["s_min"] = 0.15
    p = tmp_path / "nolevels.json"
    p.write_text(json.dumps(doc))
    rc, _, err = run(["solve", "--alg", "gp-sdiscrete", "--taskset", TS / "d04.json",
                      "--proc", p, "-m", 2], capsys)
    assert rc == 1 and "levels" in err


def _table(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_compare_discrete_ordering(capsys):
    rc, out, _ = run(["compare", "--proc", PROC / "xscale.json", "-m", 2, "--mode", "discrete"],
                     capsys)
    assert rc == 0
    rows = _table(out)
    assert [r["taskset"] for r in rows] == [f"D={x / 10:.1f}" for x in range(4, 21, 2)]
    for r in rows:
        assert r["gp-nodvfs"] == "1.000000"
        assert float(r["lp-dvfs"]) <= float(r["gp-sdiscrete"]) <= 1.0


def test_compare_powerpc_shape(capsys):
    rc, out, _ = run(["compare", "--proc", PROC / "powerpc405lp.json", "--mode", "discrete"],
                     capsys)
    rows = _table(out)
    lp = [float(r["lp-dvfs"]) for r in rows]
    assert max(lp) - min(lp) > 0.05
    assert any(float(r["lp-dvfs"]) < float(r["gp-sdiscrete"]) for r in rows)


def test_compare_reports_failed_cells(tmp_path, capsys):
    d = tmp_path / "sets"
    d.mkdir()
    shutil.copy(TS / "d04.json", d / "a.json")
    shutil.copy(TS / "d20.json", d / "b.json")
    rc, out, err = run(["compare", "--tasksets", d, "--proc", PROC / "xscale.json", "-m", 1,
                        "--mode", "continuous"], capsys)
    assert rc == 0
    rows = _table(out)
    assert rows[1]["nlp-dvfs"] == "FAILED" and rows[0]["gp-nodvfs"] == "1.000000"
    assert "failed cell" in err


def test_compare_total_basis_is_milder(capsys):
    _, obj, _ = run(["compare", "--proc", PROC / "xscale.json", "--mode", "continuous"], capsys)
    _, tot, _ = run(["compare", "--proc", PROC / "xscale.json", "--mode", "continuous",
                     "--basis", "total"], capsys)
    for a, b in zip(_table(obj), _table(tot)):
        assert float(a["nlp-dvfs"]) <= float(b["nlp-dvfs"]) <= 1.0


def test_compare_deterministic(tmp_path, capsys):
    outs = []
    for k, jobs in enumerate((1, 2)):
        path = tmp_path / f"c{k}.csv"
        run(["compare", "--proc", PROC / "powerpc405lp.json", "--jobs", jobs, "--out", path],
            capsys)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_fit_bundled_and_synthetic(tmp_path, capsys):
    for name, limit in (("xscale", 1.23), ("powerpc405lp", 5.33)):
        out = tmp_path / f"{name}.json"
        rc, _, _ = run(["fit", PROC / f"{name}.json", "--out", out], capsys)
        assert rc == 0
        assert json.loads(out.read_text())["fitted"]["mape"] <= limit
    truth = PowerModel(800, 2.5, 40, 10)
    doc = {"name": "synthetic", "f_max_mhz": 1000, "p_idle_mw": 10, "s_min": 0.2,
           "levels": [{"speed": s, "active_power_mw": active_power(truth, s)}
                      for s in (0.2, 0.4, 0.6, 0.8, 1.0)]}
    src = tmp_path / "syn.json"
    src.write_text(json.dumps(doc))
    rc, out, _ = run(["fit", src], capsys)
    assert rc == 0 and json.loads(out)["fitted"]["mape"] < 0.01
    doc["levels"] = doc["levels"][:2]
    src.write_text(json.dumps(doc))
    assert run(["fit", src], capsys)[0] == 1


def test_validate_detects_tampering(tmp_path, capsys):
    solve(tmp_path, capsys, "lp-dvfs")
    sched = tmp_path / "d04_lp-dvfs.schedule.json"
    args = ["--taskset", TS / "d04.json", "--proc", PROC / "xscale.json"]
    assert run(["validate", sched, *args], capsys)[0] == 0
    doc = json.loads(sched.read_text())
    seg = next(s for s in doc["segments"] if s["task"] == "T1")
    seg["end"] = "6"
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(doc))
    rc, out, _ = run(["validate", tampered, *args], capsys)
    assert rc == 3 and "[deadline]" in out
    rc, out, _ = run(["validate", sched, "--taskset", TS / "d10.json",
                      "--proc", PROC / "xscale.json"], capsys)
    assert rc == 3 and "[work-completion]" in out


def test_gantt_command(tmp_path, capsys):
    solve(tmp_path, capsys, "nlp-dvfs")
    rc, out, _ = run(["gantt", tmp_path / "d04_nlp-dvfs.schedule.json"], capsys)
    assert rc == 0
    assert out == (tmp_path / "d04_nlp-dvfs.gantt.csv").read_text()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "dvfsched", "gantt", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "schedule" in res.stdout
