import json

import numpy as np
import pytest

from dosplatoon.cli import LOCUS_HEADER, main

SMALL_TUNING = """
[tuning]
n_k1 = 5
n_k2 = 2
delta_grid = geom 0.1 100 31
Delta_max = 6
"""

SIM_SCENARIO = """
[platoon]
m = 3

[attack]
kind = worst_case
Delta = 2

[sim]
t_end = 4
substeps = 6
"""


def scen(tmp_path, text, name="scen.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_gain_locus_reference_csv(tmp_path):
    out = tmp_path / "locus.csv"
    assert main(["gain-locus", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == LOCUS_HEADER
    assert len(lines) == 176
    assert lines[1] == "C1,0.124802827,0.6935933,-0.367,1"
    branches = [ln.split(",")[0] for ln in lines[1:]]
    assert branches.count("C1") == 162
    assert branches.count("C2") == 13
    for ln in lines[1:]:
        fields = ln.split(",")
        assert len(fields) == 5
        # every candidate pins the slowest pole and meets the damping floor
        assert float(fields[3]) == pytest.approx(-0.367, abs=6e-3)
        assert float(fields[4]) >= 0.7 - 6e-3


def test_gain_locus_condition_failure_leaves_no_file(tmp_path, capsys):
    cfg = scen(tmp_path, "[performance]\nlambda_M = -4\n")
    out = tmp_path / "locus.csv"
    assert main(["gain-locus", "--scenario", cfg, "--out", str(out)]) == 1
    assert not out.exists()
    assert "lambda_M" in capsys.readouterr().err


def test_unknown_scenario_key_is_input_error(tmp_path, capsys):
    cfg = scen(tmp_path, "[platoon]\ntaud = 0.1\n")
    assert main(["gain-locus", "--scenario", cfg]) == 2
    assert "unknown key 'taud'" in capsys.readouterr().err


def test_mansd_baseline_json(tmp_path, capsys):
    assert main(["mansd", "--kp", "0.2", "--kd", "0.7"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["Delta"] == 1
    assert report["kp"] == 0.2 and report["kd"] == 0.7
    assert report["delta_star"] == pytest.approx(13.593563908785255, rel=1e-15)
    assert report["theta"] == pytest.approx(np.sqrt(1.01), rel=1e-15)
    cert = report["certificate"]
    assert len(cert["P1"]) == 16
    assert cert["p2"] > 0 and cert["Delta"] == 1
    ver = report["verification"]
    assert ver["lambda_max_M0"] < 0 and ver["lambda_max_Mend"] < 0


def test_mansd_output_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["mansd", "--kp", "0.82", "--kd", "2.6", "--out", str(a)]) == 0
    assert main(["mansd", "--kp", "0.82", "--kd", "2.6", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["Delta"] == 5


def test_mansd_requires_both_gains(capsys):
    assert main(["mansd", "--kp", "0.2"]) == 2
    assert "--kp and --kd" in capsys.readouterr().err


def test_mansd_infeasible_gains(tmp_path, capsys):
    cfg = scen(tmp_path, SMALL_TUNING)
    assert main(["mansd", "--scenario", cfg, "--kp", "10", "--kd", "0.05"]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["Delta"] == -1
    assert report["certificate"] is None
    assert report["delta_star"] is None


def test_tune_small_grid(tmp_path, capsys):
    cfg = scen(tmp_path, SMALL_TUNING)
    locus_out = tmp_path / "locus.csv"
    assert main(["tune", "--scenario", cfg, "--locus-out", str(locus_out)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["Delta"] >= 1
    assert report["best"] is not None
    assert report["branch"] in ("C1", "C2")
    assert len(report["table"]) == 7
    assert {row["status"] for row in report["table"]} <= {"ok", "infeasible", "inconclusive"}
    assert report["certificate"]["Delta"] == report["Delta"]
    assert report["timings"]["total_seconds"] > 0
    lines = locus_out.read_text().splitlines()
    assert lines[0] == LOCUS_HEADER
    assert len(lines) == 8


def test_simulate_writes_three_files(tmp_path):
    cfg = scen(tmp_path, SIM_SCENARIO)
    out = tmp_path / "run.csv"
    assert main(["simulate", "--scenario", cfg, "--kp", "0.82", "--kd", "2.6",
                 "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0]
    cols = header.split(",")
    assert cols[0] == "t"
    assert cols[1:7] == ["q_0", "v_0", "a_0", "u_0", "e_0", "omega_0"]
    assert len(cols) == 1 + 6 * 4

    events = (tmp_path / "run.events.csv").read_text().splitlines()
    assert events[0] == "t,link,delivered"
    n_tx = int(4.0 / 0.05)
    assert len(events) == 1 + n_tx * 3
    first = events[1].split(",")
    assert first[0] == "0.05" and first[2] in ("0", "1")

    metrics = json.loads((tmp_path / "run.metrics.json").read_text())
    assert set(metrics) == {"l2_ratio", "max_overshoot", "final_abs_error"}
    assert len(metrics["l2_ratio"]) == 3
    assert all(r is None or r > 0 for r in metrics["l2_ratio"])


def test_simulate_requires_out(capsys):
    assert main(["simulate", "--kp", "0.82", "--kd", "2.6"]) == 2
    assert "--out" in capsys.readouterr().err


def test_simulate_equilibrium_is_all_zero(tmp_path):
    cfg = scen(tmp_path, "[platoon]\nm = 2\n\n[leader]\nsegments = 0:0\n\n[sim]\nt_end = 2\nsubsteps = 4\n")
    out = tmp_path / "eq.csv"
    assert main(["simulate", "--scenario", cfg, "--kp", "0.82", "--kd", "2.6",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    cols = lines[0].split(",")
    e_idx = [i for i, c in enumerate(cols) if c.startswith("e_")]
    w_idx = [i for i, c in enumerate(cols) if c.startswith("omega_")]
    for ln in lines[1:]:
        fields = ln.split(",")
        for i in e_idx + w_idx:
            assert fields[i] == "0"
    metrics = json.loads((tmp_path / "eq.metrics.json").read_text())
    assert all(r is None for r in metrics["l2_ratio"])
    # recomputed from absolute positions, so only clean to float dust
    assert all(v < 1e-12 for v in metrics["final_abs_error"])


def test_simulate_seed_override(tmp_path):
    cfg = scen(tmp_path, "[platoon]\nm = 2\n\n[attack]\nkind = random\nDelta = 3\nseed = 1\n\n[sim]\nt_end = 3\nsubsteps = 4\n")
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    for path, seed in ((a, None), (b, "1"), (c, "2")):
        argv = ["simulate", "--scenario", cfg, "--kp", "0.82", "--kd", "2.6",
                "--out", str(path)]
        if seed is not None:
            argv += ["--seed", seed]
        assert main(argv) == 0
    read = lambda p: (p.parent / (p.stem + ".events.csv")).read_bytes()
    assert read(a) == read(b)  # explicit seed 1 matches the scenario's seed
    assert read(a) != read(c)


def test_verify_round_trip(tmp_path, capsys):
    cert_path = tmp_path / "cert.json"
    assert main(["mansd", "--kp", "0.2", "--kd", "0.7", "--out", str(cert_path)]) == 0
    assert main(["verify", "--kp", "0.2", "--kd", "0.7", str(cert_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True
    assert report["Delta_checked"] == 1
    assert report["failures"] == []


def test_verify_rechecks_at_scenario_delta(tmp_path, capsys):
    cert_path = tmp_path / "cert.json"
    assert main(["mansd", "--kp", "0.2", "--kd", "0.7", "--out", str(cert_path)]) == 0
    cfg = scen(tmp_path, "[attack]\nkind = worst_case\nDelta = 4\n")
    assert main(["verify", "--scenario", cfg, "--kp", "0.2", "--kd", "0.7",
                 str(cert_path)]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is False
    assert report["Delta_checked"] == 4
    assert any("not negative definite" in f for f in report["failures"])


def test_verify_rejects_corrupt_certificate(tmp_path, capsys):
    cert = {"P1": list(np.eye(4).flatten()), "p2": -1.0, "delta": 5.0,
            "theta": 1.005, "Delta": 2}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cert))
    assert main(["verify", "--kp", "0.2", "--kd", "0.7", str(path)]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is False
    assert any("p2" in f for f in report["failures"])


def test_verify_input_errors(tmp_path, capsys):
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"P1": [1.0] * 16}))
    assert main(["verify", "--kp", "0.2", "--kd", "0.7", str(missing)]) == 2
    assert "missing fields" in capsys.readouterr().err

    broken = tmp_path / "broken.json"
    broken.write_text("{\n  ][")
    assert main(["verify", "--kp", "0.2", "--kd", "0.7", str(broken)]) == 2
    assert "line 2" in capsys.readouterr().err

    assert main(["verify", "--kp", "0.2", "--kd", "0.7", str(tmp_path / "nope.json")]) == 2
    assert "cannot read" in capsys.readouterr().err
