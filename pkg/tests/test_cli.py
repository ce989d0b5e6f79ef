import json
import os
import subprocess
import sys

import numpy as np
import pytest

from hdcop.cli import main

RNG = np.random.default_rng(2718)


@pytest.fixture()
def data_csv(tmp_path):
    path = tmp_path / "data.csv"
    np.savetxt(path, RNG.normal(size=(60, 4)), delimiter=",")
    return path


def run_cli(*argv):
    return main(list(argv))


def test_pairs_json(data_csv, capsys):
    assert run_cli("pairs", str(data_csv), "--output", "json") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["schema"] == "hdcop/pairs/v1"
    assert payload["d"] == 4


def test_pairs_csv_output(data_csv, capsys):
    assert run_cli("pairs", str(data_csv), "--output", "csv", "--measures", "rho") == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "pair_i,pair_j,rho"
    assert len(out.splitlines()) == 7


def test_maxtest_end_to_end(data_csv, capsys):
    assert run_cli("maxtest", "--measure", "tau", "--alpha", "0.05", str(data_csv), "--output", "json") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["gamma"] == "tau"
    assert 0.0 <= payload["p_value"] <= 1.0
    assert payload["reject"] == (payload["p_value"] < 0.05)


def test_maxtest_detects_seeded_signal(tmp_path, capsys):
    # seeded synthetic file with one strongly dependent pair among noise
    from hdcop.models import GaussianCopula

    corr = np.eye(5)
    corr[0, 1] = corr[1, 0] = 0.7
    sample = GaussianCopula(corr).sample(400, seed=6)
    path = tmp_path / "signal.csv"
    np.savetxt(path, sample, delimiter=",")
    assert run_cli("maxtest", "--measure", "tau", "--alpha", "0.05", str(path), "--output", "json") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["reject"] is True
    assert sorted(payload["argmax_pair"]) == [0, 1]


def test_stepdown_cli(data_csv, capsys):
    assert run_cli("stepdown", "--alpha", "0.05", "--boot", "200", "--seed", "4", str(data_csv), "--output", "json") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["B"] == 200
    assert payload["seed"] == 4


def test_moebius_cli(data_csv, capsys):
    assert run_cli("moebius", "--alpha", "0.1", str(data_csv), "--output", "json") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["alpha"] == 0.1


def test_ties_exit_code_and_message(tmp_path, capsys):
    values = RNG.normal(size=(30, 3))
    values[0, 2] = values[1, 2]
    path = tmp_path / "tied.csv"
    np.savetxt(path, values, delimiter=",")
    assert run_cli("pairs", str(path)) == 3
    err = capsys.readouterr().err
    assert "column 2" in err

    assert run_cli("pairs", str(path), "--jitter") == 0


def test_malformed_csv_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("1.0,2.0\nx,3.0\n")
    assert run_cli("pairs", str(path)) == 3


def test_usage_error_exit_code(capsys):
    assert run_cli("pairs") == 2  # missing positional
    assert run_cli("maxtest", "--measure", "zeta", "x.csv") == 2


def test_missing_file_is_usage_error(capsys):
    assert run_cli("pairs", "/nonexistent/data.csv") == 2


def test_seed_reproducibility(data_csv, capsys):
    run_cli("stepdown", "--boot", "150", "--seed", "9", str(data_csv), "--output", "json")
    first = capsys.readouterr().out
    run_cli("stepdown", "--boot", "150", "--seed", "9", str(data_csv), "--output", "json")
    second = capsys.readouterr().out
    assert first == second


def test_hdcop_seed_env(data_csv, capsys, monkeypatch):
    monkeypatch.setenv("HDCOP_SEED", "77")
    run_cli("stepdown", "--boot", "150", str(data_csv), "--output", "json")
    payload = json.loads(capsys.readouterr().out)
    assert payload["seed"] == 77
    # flag overrides env
    run_cli("stepdown", "--boot", "150", "--seed", "5", str(data_csv), "--output", "json")
    payload = json.loads(capsys.readouterr().out)
    assert payload["seed"] == 5


def test_harness_run_summarize_report(tmp_path, capsys):
    cfg = {
        "kind": "stute_decay",
        "model": {"family": "independence", "d": 3},
        "n_grid": [40, 80],
        "reps": 2,
        "seed": 3,
        "grid_resolution": 16,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    log = tmp_path / "results.jsonl"

    assert run_cli("harness", "run", str(cfg_path), "-o", str(log), "--threads", "1") == 0
    out1 = json.loads(capsys.readouterr().out)
    assert out1["kind"] == "stute_decay"

    assert run_cli("harness", "summarize", str(log)) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["cells"] == out1["cells"]

    assert run_cli("harness", "summarize", str(log), "--output", "csv") == 0
    csv_text = capsys.readouterr().out
    assert csv_text.startswith("cell,n,reps_done")

    report_dir = tmp_path / "report"
    assert run_cli("report", str(log), "-o", str(report_dir)) == 0
    capsys.readouterr()
    assert (report_dir / "summary.csv").exists()
    assert (report_dir / "stute_decay.png").exists()


def test_pairs_report_dir(data_csv, tmp_path, capsys):
    out_dir = tmp_path / "pairs_report"
    assert run_cli("pairs", str(data_csv), "--report-dir", str(out_dir), "--output", "csv") == 0
    capsys.readouterr()
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == ["pairs.csv", "pairs_beta.png", "pairs_rho.png", "pairs_tau.png"]


def test_console_script_entry_point(data_csv):
    proc = subprocess.run(
        [sys.executable, "-m", "hdcop.cli", "pairs", str(data_csv), "--output", "json"],
        capture_output=True,
        text=True,
        env={**os.environ, "MPLBACKEND": "Agg"},
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["schema"] == "hdcop/pairs/v1"
