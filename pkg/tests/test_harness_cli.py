import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from current_lab.battery import single_edge, triangle
from current_lab.cli import main
from current_lab.errors import ValidationError
from current_lab.harness import ExperimentConfig, run_experiment
from current_lab.network import save_network

REPO = Path(__file__).resolve().parent.parent


@pytest.fixture()
def triangle_path(tmp_path):
    path = tmp_path / "triangle.json"
    save_network(triangle((0.5, 0.5, 0.5), pinned=True), path)
    return str(path)


@pytest.fixture()
def edge_path(tmp_path):
    path = tmp_path / "edge.json"
    save_network(single_edge((1.0,), pinned=True), path)
    return str(path)


def test_run_experiment_verify_coupling(triangle_path, tmp_path):
    config = ExperimentConfig(
        network=triangle_path, suite="verify-coupling", replicas=2000,
        seed=4, out_dir=str(tmp_path / "out"), figures=False,
    )
    report = run_experiment(config)
    assert report.passed
    names = [c.name for c in report.checks]
    assert "coupling-identity-tv" in names
    assert "trace-reconstruction-tv" in names
    data = json.loads((tmp_path / "out" / "report.json").read_text())
    assert data["verdict"] == "pass"
    assert data["config"]["replicas"] == 2000
    assert (tmp_path / "out" / "coupling_tables.csv").exists()


def test_run_experiment_requires_enough_replicas(triangle_path, tmp_path):
    config = ExperimentConfig(
        network=triangle_path, suite="verify-coupling", replicas=10,
        out_dir=str(tmp_path / "out"),
    )
    with pytest.raises(ValidationError, match="replicas"):
        run_experiment(config)


def test_run_experiment_unknown_suite(triangle_path, tmp_path):
    config = ExperimentConfig(
        network=triangle_path, suite="nope", out_dir=str(tmp_path / "out"))
    with pytest.raises(ValidationError, match="unknown suite"):
        run_experiment(config)


def test_cli_pass_and_figures(edge_path, tmp_path):
    out = tmp_path / "cli_out"
    code = main([
        "gff-check", "--network", edge_path, "--seed", "3",
        "--replicas", "5000", "--out", str(out),
    ])
    assert code == 0
    assert (out / "report.json").exists()
    assert (out / "sign_cells.csv").exists()
    pngs = list(out.glob("*.png"))
    assert pngs, "figures should be rendered by default"


def test_cli_no_figures(edge_path, tmp_path):
    out = tmp_path / "nofig"
    code = main([
        "loopsoup-check", "--network", edge_path, "--replicas", "2000",
        "--out", str(out), "--no-figures",
    ])
    assert code == 0
    assert not list(out.glob("*.png"))


def test_cli_malformed_network(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"vertices": 2, "edges": [[0, 1]]}')
    code = main(["verify-coupling", "--network", str(bad),
                 "--replicas", "200", "--out", str(tmp_path / "o")])
    assert code == 2


def test_cli_missing_pinning_is_input_error(tmp_path):
    unpinned = tmp_path / "unpinned.json"
    save_network(single_edge((1.0,)), unpinned)
    code = main(["gff-check", "--network", str(unpinned),
                 "--replicas", "200", "--out", str(tmp_path / "o")])
    assert code == 2


def test_cli_check_failure_exit_code(triangle_path, tmp_path):
    # an impossible exact tolerance forces a deterministic check failure
    code = main([
        "verify-coupling", "--network", triangle_path, "--replicas", "200",
        "--out", str(tmp_path / "o"), "--tv-exact", "0", "--no-figures",
    ])
    assert code == 1


def test_cli_bad_order_tokens(triangle_path, tmp_path):
    code = main(["vrjp-check", "--network", triangle_path, "--order", "a,b",
                 "--replicas", "200", "--out", str(tmp_path / "o")])
    assert code == 2


def test_cli_entry_point_subprocess(edge_path, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "current_lab.cli", "reconstruct-check",
         "--network", edge_path, "--replicas", "1500",
         "--out", str(tmp_path / "sub"), "--no-figures"],
        capture_output=True, text=True, cwd=REPO,
    )
    assert proc.returncode == 0, proc.stderr
    assert "verdict: pass" in proc.stdout


def test_thread_count_does_not_change_csv_bytes(triangle_path, tmp_path):
    digests = []
    for threads in (1, 2, 8):
        out = tmp_path / f"t{threads}"
        config = ExperimentConfig(
            network=triangle_path, suite="vrjp-check", replicas=150,
            seed=13, out_dir=str(out), figures=False, threads=threads,
        )
        run_experiment(config)
        digests.append({
            p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))
        })
    assert digests[0] == digests[1] == digests[2]


def test_env_var_sets_threads(monkeypatch, triangle_path):
    monkeypatch.setenv("CURRENT_LAB_THREADS", "7")
    config = ExperimentConfig(network=triangle_path, suite="verify-coupling")
    assert config.resolved_threads() == 7
    monkeypatch.delenv("CURRENT_LAB_THREADS")
    config2 = ExperimentConfig(network=triangle_path, suite="verify-coupling",
                               threads=2)
    assert config2.resolved_threads() == 2


def test_report_is_self_describing(edge_path, tmp_path):
    config = ExperimentConfig(
        network=edge_path, suite="vrjp-check", replicas=120, seed=99,
        out_dir=str(tmp_path / "o"), figures=False,
    )
    report = run_experiment(config)
    data = report.as_dict()
    # every config field is written back, defaults included
    for key in ("replicas", "seed", "alpha", "cutoff", "tv_exact", "sigma_level"):
        assert key in data["config"]
    assert data["environment"]["version"]
    assert all("verdict" in c for c in data["checks"])
