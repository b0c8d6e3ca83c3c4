import os
import subprocess
import sys

import numpy as np
import pytest

from feedback_market.cli import run_cli
from feedback_market.output import read_trajectory, write_trajectory
from feedback_market.core import Trajectory

GOOD = """\
[model]
r = 3
rate = constant
rate_matrix = -0.5 0.25 0.25 ; 0.25 -0.5 0.25 ; 0.25 0.25 -0.5
mechanism = lux3

[population]
n_values = 20 40
initial_law = deterministic
initial_point = 0.6 0.2 0.2
q0 = 1.0

[run]
T = 0.5
h = 0.01
seed = 42
replicas = 4

[lux3]
alpha = 1.0 1.0 1.0
beta = -1.0 -0.5 -0.5
delta = 0.5 0.5 0.5
logF = 0.0
"""


@pytest.fixture
def good_scenario(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text(GOOD)
    return str(path)


def test_simulate_creates_trajectories(good_scenario, tmp_path, capsys):
    out = tmp_path / "out"
    code = run_cli(["simulate", "--scenario", good_scenario, "--n", "20",
                    "--out", str(out), "--quiet"])
    assert code == 0
    files = sorted(os.listdir(out))
    assert files == [f"trajectory_N20_rep{j}.csv" for j in range(4)]


def test_missing_required_key(tmp_path, capsys):
    bad = GOOD.replace("T = 0.5\n", "")
    path = tmp_path / "bad.cfg"
    path.write_text(bad)
    code = run_cli(["simulate", "--scenario", str(path), "--n", "20",
                    "--out", str(tmp_path), "--quiet"])
    assert code == 1
    assert "run.T" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text(GOOD + "\n[run2]\nx = 1\n")
    assert run_cli(["limit", "--scenario", str(path), "--out", str(tmp_path)]) == 1
    path.write_text(GOOD.replace("replicas = 4", "replicas = 4\nbogus_key = 7"))
    code = run_cli(["limit", "--scenario", str(path), "--out", str(tmp_path), "--quiet"])
    assert code == 1
    assert "bogus_key" in capsys.readouterr().err


def test_degenerate_scenario_exit_code_2(tmp_path, capsys):
    bad = GOOD.replace("beta = -1.0 -0.5 -0.5", "beta = -1.0 -1.0 -1.0")
    path = tmp_path / "deg.cfg"
    path.write_text(bad)
    code = run_cli(["simulate", "--scenario", str(path), "--n", "20",
                    "--out", str(tmp_path), "--quiet"])
    assert code == 2
    assert "DegenerateDenominator" in capsys.readouterr().err


def test_trajectory_round_trip(tmp_path):
    traj = Trajectory(times=[0.0, 1 / 3, 2 / 3],
                      xs=[[0.1, 0.9], [0.5, 0.5], [1 / 3, 2 / 3]],
                      qs=[0.1234567890123456, -7.25, 3e-17])
    path = str(tmp_path / "t.csv")
    write_trajectory(traj, path)
    back = read_trajectory(path)
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.xs, traj.xs)
    assert np.array_equal(back.qs, traj.qs)
    lines = open(path).read().splitlines()
    assert lines[0] == "t,x1,x2,q"
    assert len(lines) == 4


def test_seed_override_changes_output(good_scenario, tmp_path):
    out1, out2, out3 = (tmp_path / d for d in ("a", "b", "c"))
    run_cli(["simulate", "--scenario", good_scenario, "--n", "20", "--out", str(out1), "--quiet"])
    run_cli(["simulate", "--scenario", good_scenario, "--n", "20", "--out", str(out2), "--quiet"])
    run_cli(["simulate", "--scenario", good_scenario, "--n", "20", "--seed", "7",
             "--out", str(out3), "--quiet"])
    f = "trajectory_N20_rep0.csv"
    assert (out1 / f).read_bytes() == (out2 / f).read_bytes()
    assert (out1 / f).read_bytes() != (out3 / f).read_bytes()


def _run_converge(scenario, out, threads):
    env = dict(os.environ, FEEDBACK_MARKET_THREADS=str(threads))
    res = subprocess.run(
        [sys.executable, "-m", "feedback_market", "converge", "--scenario", scenario,
         "--out", out, "--quiet"],
        capture_output=True, env=env)
    assert res.returncode == 0, res.stderr.decode()
    with open(os.path.join(out, "convergence.jsonl"), "rb") as fh:
        return fh.read()


def test_converge_deterministic_across_runs_and_threads(good_scenario, tmp_path):
    outs = [str(tmp_path / f"o{i}") for i in range(3)]
    b1 = _run_converge(good_scenario, outs[0], threads=1)
    b2 = _run_converge(good_scenario, outs[1], threads=1)
    b8 = _run_converge(good_scenario, outs[2], threads=8)
    assert b1 == b2 == b8
    assert b1.startswith(b'{"N": 20,')


def test_fixedpoint_and_check_commands(good_scenario, tmp_path):
    out = str(tmp_path / "fx")
    assert run_cli(["fixedpoint", "--scenario", good_scenario, "--out", out,
                    "--quiet", "--mesh", "3"]) == 0
    content = open(os.path.join(out, "fixed_points.txt")).read()
    assert "within_assumptions=true" in content
    assert run_cli(["check", "--scenario", good_scenario, "--out", out, "--quiet"]) == 0
    report = open(os.path.join(out, "conditions_report.txt")).read()
    assert "[condition rate_regularity]" in report
    assert "pass = true" in report
