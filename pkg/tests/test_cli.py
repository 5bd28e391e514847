import json
import os

import numpy as np
import pytest

from purodyn import scenarios
from purodyn.cli import main
from purodyn.errors import ConfigInvalid


def small_decay_config():
    cfg = scenarios.default_config("tls-decay")
    cfg["t_c"] = 5.0
    cfg["grid_dt"] = 0.05
    cfg["envelopes"] = cfg["envelopes"][:1]
    cfg["envelopes"][0]["max_step"] = 0.05
    cfg["optimizer"]["max_iterations"] = 30
    cfg["optimizer"]["restarts"] = 1
    return cfg


@pytest.mark.parametrize("name", scenarios.SCENARIOS)
def test_default_configs_validate(name):
    assert scenarios.validate(scenarios.default_config(name)) == []


def test_negative_width_names_pulse():
    cfg = scenarios.default_config("tls-network")
    cfg["network"]["edge_envelopes"][1]["pulses"][2][2] = -3.0
    diags = scenarios.validate(cfg)
    assert len(diags) == 1
    assert "edge_envelopes[1].pulses[2]" in diags[0]


def test_missing_seed_and_all_problems_reported():
    cfg = scenarios.default_config("lindblad-match")
    del cfg["seed"]
    cfg["grid"]["dt"] = -1
    cfg["probes"][0] = scenarios.encode_matrix(np.diag([0.5, 0.6]))
    diags = scenarios.validate(cfg)
    assert any(d.startswith("seed:") for d in diags)
    assert any(d.startswith("grid.dt") for d in diags)
    assert any(d.startswith("probes[0]") for d in diags)
    with pytest.raises(ConfigInvalid) as e:
        scenarios.run(cfg)
    assert len(e.value.diagnostics) == len(diags)


def test_unknown_scenario():
    assert scenarios.validate({"schema_version": 1, "scenario": "nope", "seed": 0})


def test_matrix_round_trip():
    m = np.array([[1, 2 - 1j], [2 + 1j, 0.5]])
    assert np.array_equal(scenarios.decode_matrix(json.loads(json.dumps(scenarios.encode_matrix(m)))), m)


def test_noncp_run_outputs(tmp_path):
    s = scenarios.run(scenarios.default_config("noncp-disc"), out_dir=str(tmp_path))
    assert s.exit_code == 0
    lines = (tmp_path / "noncp_disc_samples.csv").read_text().splitlines()
    assert lines[0] == "x,y,z,x_out,y_out,z_out,unitarity_residual"
    rows = np.loadtxt(tmp_path / "noncp_disc_samples.csv", delimiter=",", skiprows=1)
    assert rows.shape == (200, 7)
    assert np.abs(rows[:, 5]).max() < 1e-10
    summary = json.loads((tmp_path / "summary.json").read_text())
    for key in ("trace", "norm", "positivity"):
        assert summary["invariants"][key]["ok"]
    assert abs(summary["objective_values"]["map_min_choi_eigenvalue"] + 0.5) < 1e-10
    assert "wall_clock" not in summary


def test_every_artifact_has_digest(tmp_path):
    import hashlib

    s = scenarios.run(small_decay_config(), out_dir=str(tmp_path))
    assert s.artifacts
    for a in s.artifacts:
        data = (tmp_path / a["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == a["sha256"]


def test_determinism_byte_identical(tmp_path):
    cfg = small_decay_config()
    scenarios.run(cfg, out_dir=str(tmp_path / "a"))
    scenarios.run(cfg, out_dir=str(tmp_path / "b"))
    names = sorted(os.listdir(tmp_path / "a"))
    assert names == sorted(os.listdir(tmp_path / "b"))
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_csv_format_and_columns(tmp_path):
    scenarios.run(small_decay_config(), out_dir=str(tmp_path))
    text = (tmp_path / "tls_decay_0_exponential.csv").read_text()
    header, first = text.splitlines()[:2]
    assert header == "t,gamma,rho00,rho11,re_rho01,im_rho01"
    assert first.split(",")[0] == "0"
    assert scenarios.csv_text(["a"], [[0.1]]) == "a\n0.10000000000000001\n"


def test_non_convergence_exit_code(tmp_path):
    cfg = small_decay_config()
    cfg["optimizer"]["max_iterations"] = 1
    cfg["envelopes"][0]["min_ground_population"] = 1.0
    s = scenarios.run(cfg, out_dir=str(tmp_path))
    assert s.exit_code == scenarios.EXIT_NOT_CONVERGED
    assert (tmp_path / "tls_decay_0_exponential.csv").exists()


def test_seed_override_is_recorded(tmp_path):
    s = scenarios.run(scenarios.default_config("noncp-disc"), out_dir=str(tmp_path), seed=5)
    assert s.config["seed"] == 5


def test_cli_commands(tmp_path, capsys):
    assert main(["scenarios"]) == 0
    assert "tls-network" in capsys.readouterr().out
    assert main(["scenarios", "noncp-disc"]) == 0
    cfg_text = capsys.readouterr().out
    path = tmp_path / "cfg.json"
    path.write_text(cfg_text)
    assert main(["validate", "--config", str(path)]) == 0
    out = tmp_path / "out"
    assert main(["run", "--config", str(path), "--out", str(out), "--seed", "3"]) == 0
    assert (out / "summary.json").exists()
    bad = json.loads(cfg_text)
    del bad["seed"]
    path.write_text(json.dumps(bad))
    assert main(["validate", "--config", str(path)]) == scenarios.EXIT_CONFIG
    assert "seed" in capsys.readouterr().out
    assert main(["run", "--config", str(path)]) == scenarios.EXIT_CONFIG


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("PURODYN_THREADS", "3")
    assert scenarios.thread_cap() == 3
    monkeypatch.setenv("PURODYN_THREADS", "zero")
    assert scenarios.thread_cap() == 1
