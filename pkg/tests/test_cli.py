import json
import subprocess
import sys

import numpy as np
import pytest

from hawkes_lob import EffectiveCoefficients, HawkesSpec, MesoConfig, MicroConfig
from hawkes_lob.cli import projected_walk_mean, reflected_bm_mean, run

HAWKES = HawkesSpec([0.5, 0.3], [[0.3, 0.2], [0.1, 0.4]], [[1.0, 1.5], [1.2, 1.0]]).to_dict()


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def summary(out):
    return json.loads((out / "summary.json").read_text())


def test_simulate_hawkes(tmp_path):
    out = tmp_path / "h"
    cfg = write(tmp_path, "h.json", dict(HAWKES, run={"horizon": 50.0}))
    assert run(["simulate-hawkes", "--config", cfg, "--out", str(out), "--replicates", "4", "--threads", "2"]) == 0
    s = summary(out)
    assert s["subcommand"] == "simulate-hawkes" and s["passed"] and s["outputs"] == ["events.csv", "counts.csv"]
    assert s["config"]["run"]["horizon"] == 50.0 and s["config"]["run"]["seed"] == 0xC0FFEE
    assert (out / "events.csv").read_text().startswith("time,type\n")
    assert len((out / "counts.csv").read_text().splitlines()) == 5


def test_simulate_micro(tmp_path):
    out = tmp_path / "m"
    cfg = MicroConfig.hawkes(3, [3, 2], arrival=(1.0, 0.0), removal=(0.2, 0.2), alpha={"11": 0.2}, beta=1.0,
                             eta=0.1).to_dict()
    path = write(tmp_path, "m.json", cfg)
    assert run(["simulate-micro", "--config", path, "--out", str(out), "--horizon", "5", "--replicates", "3"]) == 0
    s = summary(out)
    assert s["passed"] and s["metrics"]["negative_volumes"] == 0
    for f in ("events.csv", "snapshots_bid.csv", "snapshots_ask.csv", "terminal.csv"):
        assert (out / f).exists()


def test_simulate_meso(tmp_path):
    out = tmp_path / "s"
    cfg = MesoConfig(EffectiveCoefficients.uniform(3, 1.0, 0.0, 0.2, 0.5), [1.0, 0.5], 1e-3).to_dict()
    path = write(tmp_path, "s.json", dict(cfg, run={"horizon": 0.2, "replicates": 30}))
    assert run(["simulate-meso", "--config", path, "--out", str(out)]) == 0
    s = summary(out)
    assert s["passed"] and s["metrics"]["violations"]["negative_x"] == 0
    assert (out / "moments.csv").read_text().startswith("t,level,mean,var\n")


def test_covariance_both_config_forms(tmp_path):
    out = tmp_path / "c"
    cfg = {"hawkes": HAWKES, "taxonomy": {"depth": 3, "types": [["up", 1], ["migrate_out", 1]]}}
    assert run(["covariance", "--config", write(tmp_path, "c.json", cfg), "--out", str(out)]) == 0
    d = json.loads((out / "covariance.json").read_text())
    assert d["C"] == [[1, -1], [0, 1]]
    micro = MicroConfig.hawkes(3, [2, 2], arrival=(1.0, 0.0), removal=(0.5, 0.0), eta=0.1).to_dict()
    out2 = tmp_path / "c2"
    path = write(tmp_path, "c2.json", {"micro": micro, "reference_level": 3.0})
    assert run(["covariance", "--config", path, "--out", str(out2)]) == 0
    assert "notes" in json.loads((out2 / "covariance.json").read_text())


def test_verify_generator_passes_with_defaults(tmp_path):
    out = tmp_path / "g"
    assert run(["verify-generator", "--out", str(out)]) == 0
    s = summary(out)
    assert s["passed"] and len(s["metrics"]["ratios_per_factor_4"]) == 2
    assert (out / "decay.csv").read_text().startswith("n,probe_sup_error\n")


def test_verify_failure_exit_code(tmp_path):
    cfg = write(tmp_path, "g.json", {"run": {"band": [100.0, 200.0]}})
    assert run(["verify-generator", "--config", cfg, "--out", str(tmp_path / "g")]) == 3
    assert summary(tmp_path / "g")["passed"] is False


def test_verify_fclt_small(tmp_path):
    out = tmp_path / "f"
    cfg = write(tmp_path, "f.json", {"M": 1, "mu": [1.0], "alpha": [[0.0]], "beta": [[1.0]]})
    assert run(["verify-fclt", "--config", cfg, "--out", str(out), "--n", "100", "--replicates", "2000"]) == 0
    assert len((out / "covariance.csv").read_text().splitlines()) == 2


def test_invalid_input_exit_codes(tmp_path, capsys):
    assert run([]) == 1
    assert run(["no-such-command"]) == 1
    assert run(["simulate-hawkes", "--out", str(tmp_path / "x")]) == 1  # missing --config
    bad = write(tmp_path, "bad.json", dict(HAWKES, surprise=1, run={"horizon": 1.0}))
    assert run(["simulate-hawkes", "--config", bad, "--out", str(tmp_path / "x")]) == 1
    bad_run = write(tmp_path, "badrun.json", dict(HAWKES, run={"horizon": 1.0, "speed": 2}))
    assert run(["simulate-hawkes", "--config", bad_run, "--out", str(tmp_path / "x")]) == 1
    ok = write(tmp_path, "ok.json", dict(HAWKES, run={"horizon": 1.0}))
    assert run(["simulate-hawkes", "--config", ok, "--out", str(tmp_path / "x"), "--dt", "0.1"]) == 1
    assert run(["simulate-hawkes", "--config", ok, "--out", str(tmp_path / "x"), "--seed", "-3"]) == 1
    unstable = write(tmp_path, "u.json", {"M": 1, "mu": [1.0], "alpha": [[1.5]], "beta": [[1.0]],
                                          "run": {"horizon": 1.0}})
    assert run(["simulate-hawkes", "--config", unstable, "--out", str(tmp_path / "x")]) == 1
    assert "invalid input" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path):
    cfg = MesoConfig(EffectiveCoefficients(3, 0.0, [0.0, 1.5e308], 0.0), [1.0, 1.0], 2.0).to_dict()
    path = write(tmp_path, "n.json", dict(cfg, run={"horizon": 10.0, "replicates": 2}))
    assert run(["simulate-meso", "--config", path, "--out", str(tmp_path / "n")]) == 2


def test_seed_accepts_hex_and_changes_output(tmp_path):
    cfg = write(tmp_path, "h.json", dict(HAWKES, run={"horizon": 30.0}))
    run(["simulate-hawkes", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "0x10"])
    run(["simulate-hawkes", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "16"])
    run(["simulate-hawkes", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "17"])
    a, b, c = ((tmp_path / d / "events.csv").read_bytes() for d in "abc")
    assert a == b and a != c


@pytest.mark.parametrize("command,extra", [
    ("verify-generator", []),
    ("verify-converge", ["--n", "16,64", "--replicates", "20", "--horizon", "0.1"]),
    ("verify-reflection", ["--replicates", "200"]),
])
def test_verify_outputs_byte_identical_across_runs_and_threads(tmp_path, command, extra):
    outs = []
    for k, threads in enumerate((1, 1, 3)):
        out = tmp_path / f"r{k}"
        run([command, "--out", str(out), "--threads", str(threads), *extra])
        outs.append(out)
    files = summary(outs[0])["outputs"]
    for f in files:
        data = [(o / f).read_bytes() for o in outs]
        assert data[0] == data[1] == data[2]
        assert b"\r" not in data[0]


def test_verify_reflection_metrics(tmp_path):
    out = tmp_path / "r"
    run(["verify-reflection", "--out", str(out), "--replicates", "500"])
    m = summary(out)["metrics"]
    assert m["deterministic"]["passed"]
    assert m["deterministic"]["max_abs_error_x"] <= 2e-3
    assert m["brownian"]["projected_scheme_mean"] == pytest.approx(projected_walk_mean(1.0, 1e-3, 1000))


def test_reference_means():
    assert reflected_bm_mean(0.0, 1.0, 1.0) == pytest.approx(np.sqrt(2 / np.pi))
    assert reflected_bm_mean(50.0, 1.0, 1.0) == pytest.approx(50.0)
    assert reflected_bm_mean(0.7, 0.0, 1.0) == 0.7
    # projected walk: one step from 0 gives E[max(Z, 0)] sqrt(dt)
    assert projected_walk_mean(1.0, 0.04, 1) == pytest.approx(0.2 / np.sqrt(2 * np.pi))
    assert projected_walk_mean(1.0, 1e-3, 1000) == pytest.approx(0.779661, abs=1e-6)


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "hawkes_lob", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "0.1.0" in r.stdout
    r = subprocess.run([sys.executable, "-m", "hawkes_lob", "bogus"], capture_output=True, text=True)
    assert r.returncode == 1
