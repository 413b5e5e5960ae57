"""Acceptance for the figure pipeline, driven end to end through the
simulator's command-line interface and its CSV artifacts."""

import json
import subprocess
import sys

import pytest

from admm_plots.render import FigureSpec, render


def run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "consensus_admm.cli", *args],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise AssertionError(f"CLI failed ({proc.returncode}): {proc.stderr}")
    return proc.stdout


@pytest.fixture(scope="module")
def simulator_available():
    proc = subprocess.run(
        [sys.executable, "-c", "import consensus_admm"], capture_output=True
    )
    if proc.returncode != 0:
        pytest.skip("consensus-admm simulator not installed")


@pytest.fixture(scope="module")
def linear_convergence_csvs(simulator_available, tmp_path_factory):
    out = tmp_path_factory.mktemp("lincov")
    cfg = {
        "experiment": "linear_convergence",
        "L": 200,
        "N": 3,
        "topology": {"kind": "random", "p": [0.01, 0.02, 0.04, 0.08, 1.0]},
        "c": "c_t",
        "seeds": [0],
        "max_iter": 1500,
        "tol": 1e-12,
    }
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    run_cli("sweep", "--config", str(cfg_path), "--out", str(out / "csv"))
    trajs = sorted((out / "csv").glob("traj_*.csv"))
    assert len(trajs) == 5
    return out, trajs


@pytest.fixture(scope="module")
def topology_study_csv(simulator_available, tmp_path_factory):
    out = tmp_path_factory.mktemp("topo")
    cfg = {
        "experiment": "topology_study",
        "L": 30,
        "N": 3,
        "topology": {"kind": "random"},
        "c": "c_t",
        "seeds": list(range(40)),
        "max_iter": 3000,
        "tol": 1e-10,
    }
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    run_cli("sweep", "--config", str(cfg_path), "--out", str(out / "csv"))
    results = sorted((out / "csv").glob("results_*.csv"))
    assert len(results) == 1
    return out, results[0]


class TestSecondaryAcceptance:
    def test_error_figure_has_five_curves(self, linear_convergence_csvs):
        out, trajs = linear_convergence_csvs
        fig = out / "error_vs_k.svg"
        res = render(FigureSpec(
            kind="error_vs_k",
            inputs=tuple(str(p) for p in trajs),
            output=str(fig),
        ))
        assert res.n_curves == 5
        assert fig.exists() and fig.stat().st_size > 0
        assert fig.read_text().startswith("<?xml")

    def test_rhobar_figure_renders(self, linear_convergence_csvs):
        out, trajs = linear_convergence_csvs
        fig = out / "rhobar_vs_k.svg"
        res = render(FigureSpec(
            kind="rhobar_vs_k",
            inputs=tuple(str(p) for p in trajs),
            output=str(fig),
        ))
        assert res.n_curves == 5
        assert fig.exists() and fig.stat().st_size > 0

    def test_errorbar_figure_with_bound_overlay(self, topology_study_csv):
        out, results = topology_study_csv
        fig = out / "rho_vs_kappaG.svg"
        res = render(FigureSpec(
            kind="errorbar_vs_kappaG",
            inputs=(str(results),),
            output=str(fig),
            bins=20,
        ))
        assert res.n_curves >= 5
        assert fig.exists() and fig.stat().st_size > 0
