"""Scenario-file-driven command line: simulate | limit | converge | fixedpoint | check.

Exit codes: 0 success, 1 scenario/validation error, 2 numerical failure
(NotStochastic, DegenerateDenominator, NoConvergence and kin).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import conditions, harness, lux3, output
from .errors import (DegenerateDenominator, ExtensionUnavailable, GridMismatch,
                     NoConvergence, NotStochastic, ScenarioError, SimplexEscape, TooLarge)
from .scenario import parse_scenario_file

_NUMERICAL = (NotStochastic, DegenerateDenominator, NoConvergence, SimplexEscape,
              TooLarge, GridMismatch, ExtensionUnavailable)


def _add_common(p: argparse.ArgumentParser, need_n: bool = False) -> None:
    p.add_argument("--scenario", required=True, help="scenario file path")
    p.add_argument("--out", default=".", help="output directory (default: cwd)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed (u64)")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    if need_n:
        p.add_argument("--n", type=int, required=True, help="population size for this run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedback-market",
        description="Finite-population market chain with price feedback: "
                    "simulation, fluid limit, convergence and fixed-point analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("simulate", help="simulate the N-agent chain"), need_n=True)
    _add_common(sub.add_parser("limit", help="integrate the fluid-limit reference"))
    _add_common(sub.add_parser("converge", help="finite-N vs limit convergence study"))
    fp = sub.add_parser("fixedpoint", help="multi-start stationary-point search")
    _add_common(fp)
    fp.add_argument("--mesh", type=int, default=4, help="simplex lattice mesh for starts")
    fp.add_argument("--tol", type=float, default=1e-10, help="residual tolerance")
    _add_common(sub.add_parser("check", help="run the condition checkers"))
    return parser


def _load(args) -> harness.Scenario:
    s = parse_scenario_file(args.scenario)
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ScenarioError("--seed must fit in 64 bits")
        s = dataclasses.replace(s, seed=args.seed)
    return s


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def cmd_simulate(args) -> int:
    s = _load(args)
    if args.n < 2:
        raise ScenarioError("--n must be >= 2")
    output.ensure_dir(args.out)
    for replica in range(s.replicas):
        traj = harness.simulate_market(s, args.n, replica)
        path = os.path.join(args.out, f"trajectory_N{args.n}_rep{replica}.csv")
        output.write_trajectory(traj, path)
        _say(args, f"wrote {path}")
    return 0


def cmd_limit(args) -> int:
    s = _load(args)
    output.ensure_dir(args.out)
    traj = harness.limit_reference(s)
    path = os.path.join(args.out, "limit_trajectory.csv")
    output.write_trajectory(traj, path)
    _say(args, f"wrote {path}")
    return 0


def cmd_converge(args) -> int:
    s = _load(args)
    output.ensure_dir(args.out)
    table = harness.convergence_study(s)
    path = os.path.join(args.out, "convergence.jsonl")
    output.write_table(table, path)
    _say(args, f"wrote {path}")
    for row in table.rows:
        _say(args, f"N={row.N} mean_sup_error={row.mean_sup_error:.6g} "
                   f"std_error={row.std_error:.6g}")
    return 0


def cmd_fixedpoint(args) -> int:
    s = _load(args)
    if s.mech_kind != "lux3":
        raise ScenarioError("fixedpoint needs a lux3 mechanism")
    if not getattr(s, "_lux_constant", False):
        raise ScenarioError("fixedpoint needs constant lux3 coefficients")
    output.ensure_dir(args.out)
    results = lux3.multi_start_fixed_points(s.rate, s.lux_params, mesh=args.mesh, tol=args.tol)
    if not results:
        raise NoConvergence("no start converged")
    path = os.path.join(args.out, "fixed_points.txt")
    output.write_fixed_points(results, path)
    _say(args, f"wrote {path} ({len(results)} distinct fixed point(s))")
    for res in results:
        _say(args, f"x0={np.array2string(res.x0.coords, precision=8)} q0={res.q0:.8g} "
                   f"residual_A={res.residual_A:.3g}")
    return 0


def cmd_check(args) -> int:
    s = _load(args)
    output.ensure_dir(args.out)
    cs = s.checks
    times = np.linspace(0.0, s.T, cs.time_points + 1)
    xs = conditions.simplex_lattice(s.r, cs.simplex_mesh)
    qs = cs.q_grid()
    blocks = []

    rep = conditions.check_rate_regularity(s.rate, times[:: max(1, len(times) // 64)], xs, qs[:: 4])
    blocks.append(rep.text_block())

    mech = s.limit_mechanism()
    mechs_n = [(N, s.finite_mechanism(N)) for N in s.n_values]
    sub_t = times[:: max(1, len(times) // 16)]
    sub_x = xs[:: max(1, len(xs) // 32)]
    sub_q = qs[:: max(1, len(qs) // 5)]
    rows = conditions.check_phi_psi_convergence(mechs_n, mech, sub_t, sub_x, sub_q)
    conv_lines = ["[condition mechanism_convergence]"]
    for N, sup_phi, sup_psi in rows:
        conv_lines.append(f"N={N} sup_phi={sup_phi:.17g} sup_psi={sup_psi:.17g}")
    blocks.append("\n".join(conv_lines))

    points = [(x, q) for x in sub_x for q in sub_q]
    fit_phi = conditions.check_growth_bound(
        lambda t, pt: mech.phi(t, pt[0], pt[1]), sub_t, points)
    fit_psi = conditions.check_growth_bound(
        lambda t, pt: mech.psi(t, pt[0], pt[1]), sub_t, points)
    blocks.append("[condition growth_bounds]\n"
                  f"phi: C={fit_phi.C:.6g} lambda={fit_phi.lam:.6g} pass={str(fit_phi.passed).lower()}\n"
                  f"psi: C={fit_psi.C:.6g} lambda={fit_psi.lam:.6g} pass={str(fit_psi.passed).lower()}")

    c_t = s.certified_price_bound()
    n_check = s.n_values[0]
    traj = harness.simulate_market(s, n_check, 0)
    contain = conditions.check_containment_bound(traj.qs, float(traj.qs[0]), c_t, n_check)
    blocks.append(contain.text_block())

    if s.mech_kind == "lux3":
        grid = np.linspace(0.0, s.T, cs.time_points + 1)
        rng_pts = conditions.simplex_lattice(3, 4)
        pairs = [(np.tile(rng_pts[i], (len(grid), 1)), np.tile(rng_pts[i + 1], (len(grid), 1)))
                 for i in range(0, len(rng_pts) - 1, 2)][:5]
        est = conditions.estimate_semi_lipschitz_M(s.lux_params, pairs, grid, s.initial.q0)
        blocks.append("[condition semi_lipschitz]\n"
                      f"M={est.M:.6g} min_abs_denominator={est.min_abs_denominator:.6g}")

    text = "\n\n".join(blocks) + "\n"
    path = os.path.join(args.out, "conditions_report.txt")
    output.write_text(text, path)
    _say(args, text.rstrip())
    _say(args, f"wrote {path}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "limit": cmd_limit,
    "converge": cmd_converge,
    "fixedpoint": cmd_fixedpoint,
    "check": cmd_check,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 1
    except _NUMERICAL as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
