import json
import subprocess
import sys

import pytest

from cpwm import cli

CFG = """
scheme = constant_velocity
energy = 400 cm-1
n_points = 13
dt = 0.5
x_left = -2.0
x_right = 2.0
t_max = 3000
edge_samples = 3
tol_refl = 5e-3

[potential]
type = eckart
v0 = 400 cm-1
alpha = 3.0

[bench]
label = small Eckart
p_refl = 0.283358
tol_refl = 5e-3
p_trans = oracle
tol_trans = 5e-3
unitarity_tol = 1e-2
"""


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(CFG)
    return path


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_run_with_oracle(cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--oracle", "--out", str(out)]) == 0
    doc = _json(capsys)
    assert doc["p_refl"] == pytest.approx(0.2834, abs=5e-3)
    assert doc["oracle"]["p_refl"] == pytest.approx(0.283358, abs=1e-6)
    assert doc["params_echo"]["n_points"] == 13
    assert json.loads((out / "result.json").read_text())["p_refl"] == doc["p_refl"]


def test_run_is_deterministic_apart_from_timing(cfg, capsys):
    docs = []
    for _ in range(2):
        cli.main(["run", "--config", str(cfg)])
        doc = _json(capsys)
        doc.pop("wall_time_s")
        docs.append(doc)
    assert docs[0] == docs[1]


def test_comparison_failure_exit_code(cfg, capsys):
    cfg.write_text(CFG.replace("tol_refl = 5e-3\n\n[potential]", "tol_refl = 1e-12\n\n[potential]"))
    assert cli.main(["run", "--config", str(cfg), "--oracle"]) == cli.EXIT_COMPARISON
    assert _json(capsys)["comparison_failures"]


def test_snapshots_written(cfg, tmp_path, capsys):
    out = tmp_path / "snap"
    assert cli.main(["run", "--config", str(cfg), "--snapshot-stride", "10", "--out", str(out),
                     "--quiet"]) == 0
    assert capsys.readouterr().out == ""
    files = sorted((out / "snapshots").glob("snapshot_*.csv"))
    assert files and files[0].name == "snapshot_000010.csv"
    assert files[0].read_text().startswith("t,component")


def test_missing_key_reports_validation_error(cfg, tmp_path, capsys):
    cfg.write_text(CFG.replace("dt = 0.5\n", ""))
    out = tmp_path / "err"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == cli.EXIT_VALIDATION
    doc = _json(capsys)
    assert doc["error"] == "config" and doc["key"] == "dt" and doc["exit_code"] == 1
    assert json.loads((out / "error.json").read_text())["key"] == "dt"


def test_divergence_exit_code(cfg, capsys, monkeypatch):
    monkeypatch.setattr("cpwm.propagators.DIVERGENCE_LIMIT", 0.5)
    assert cli.main(["run", "--config", str(cfg)]) == cli.EXIT_DIVERGENCE
    assert _json(capsys)["error"] == "divergence"


def test_converge_non_convergence_exit_code(cfg, tmp_path, capsys):
    cfg.write_text(CFG.replace("t_max = 3000", "t_max = 200"))
    out = tmp_path / "conv"
    code = cli.main(["converge", "--config", str(cfg), "--tol-refl", "1e-15", "--max-trials", "6",
                     "--out", str(out), "--quiet"])
    assert code == cli.EXIT_NONCONVERGENCE
    doc = json.loads((out / "convergence.json").read_text())
    assert not doc["converged"] and len(doc["trials"]) == 6
    assert doc["trials"][0]["param"] == "base"


def test_bench_suite(cfg, tmp_path, capsys, monkeypatch):
    monkeypatch.setitem(cli.SUITES, "eckartB", (cfg.name,))
    monkeypatch.setattr(cli, "benchmark_path", lambda name: cfg.parent / name)
    out = tmp_path / "bench"
    assert cli.main(["bench", "eckartB", "--out", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and all(line.startswith("PASS") for line in lines)
    report = json.loads((out / "bench_eckartB.json").read_text())
    assert report["passed"]
    sources = {r["quantity"]: r["source"] for r in report["rows"]}
    assert sources == {"p_refl": "reference", "p_trans": "oracle", "unitarity": "exact"}


def test_bench_records_diverged_runs(cfg, tmp_path, capsys, monkeypatch):
    monkeypatch.setitem(cli.SUITES, "eckartB", (cfg.name,))
    monkeypatch.setattr(cli, "benchmark_path", lambda name: cfg.parent / name)
    monkeypatch.setattr("cpwm.propagators.DIVERGENCE_LIMIT", 0.5)
    assert cli.main(["bench", "eckartB"]) == cli.EXIT_COMPARISON
    out = capsys.readouterr().out
    assert out.count("FAIL") >= 2 and "DivergenceError" in out


def test_shipped_benchmarks_parse():
    for names in cli.SUITES.values():
        for name in names:
            config = cli.load_config(cli.benchmark_path(name))
            assert config.bench.get("label")


def test_module_entry_point(cfg):
    proc = subprocess.run([sys.executable, "-m", "cpwm", "run", "--config", str(cfg)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "p_refl" in json.loads(proc.stdout)


def test_unknown_verb_is_rejected():
    with pytest.raises(SystemExit):
        cli.main(["launch"])
