"""Deterministic file writers: trajectory CSV, convergence table, fixed-point
list, condition reports.

Floats are serialized with 17 significant digits, which round-trips 64-bit
values exactly; identical inputs therefore produce byte-identical files.
"""

from __future__ import annotations

import os

import numpy as np

from .core import Trajectory
from .harness import ConvergenceTable


def fmt(x: float) -> str:
    return f"{x:.17g}"


def write_trajectory(traj: Trajectory, path: str) -> None:
    r = traj.r
    header = "t," + ",".join(f"x{i + 1}" for i in range(r)) + ",q"
    lines = [header]
    for i in range(len(traj)):
        row = [fmt(float(traj.times[i]))]
        row += [fmt(float(v)) for v in traj.xs[i]]
        row.append(fmt(float(traj.qs[i])))
        lines.append(",".join(row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory(path: str) -> Trajectory:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split(",")
    if header[0] != "t" or header[-1] != "q":
        raise ValueError(f"{path}: not a trajectory file")
    r = len(header) - 2
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return Trajectory(times=data[:, 0], xs=data[:, 1:1 + r], qs=data[:, 1 + r])


def write_table(table: ConvergenceTable, path: str) -> None:
    """One JSON record per line with fields (N, replicas, mean_sup_error, std_error)."""
    lines = []
    for row in table.rows:
        lines.append(
            '{"N": %d, "replicas": %d, "mean_sup_error": %s, "std_error": %s}'
            % (row.N, row.replicas, fmt(row.mean_sup_error), fmt(row.std_error))
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_fixed_points(results, path: str) -> None:
    """One key=value record per converged fixed point."""
    lines = []
    for res in results:
        x = res.x0.coords
        fields = [
            f"x1={fmt(float(x[0]))}",
            f"x2={fmt(float(x[1]))}",
            f"x3={fmt(float(x[2]))}",
            f"q0={fmt(res.q0)}",
            f"residual_A={fmt(res.residual_A)}",
            f"residual_g={fmt(res.residual_g)}",
            f"iterations={res.iterations}",
            f"interior={'true' if res.interior else 'false'}",
            f"within_assumptions={'true' if res.within_assumptions else 'false'}",
        ]
        lines.append(" ".join(fields))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def write_text(text: str, path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)
