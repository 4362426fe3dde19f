"""Command-line front end: ``thermoctl <subcommand> [flags]``.

Every subcommand accepts ``--config FILE`` with flat ``key = value`` lines
whose keys mirror the long flags (``p-tau`` or ``p_tau``); flags given on the
command line win. Exit codes: 0 success, 1 numeric failure, 2 bad input or
infeasible duration.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import control, dynamics, erasure, fileio, oracle
from .core import Boundary, SystemParams, validate_problem
from .errors import DomainError, InfeasibleDuration, ParseError, ThermoctlError
from .speed_limit import feasibility, tau_min

COMMANDS = ("optimal", "free-final", "speed-limit", "erasure-sweep", "simulate", "oracle")


class UsageError(Exception):
    pass


def _read_config(path):
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key = value", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _jobs_default():
    try:
        return max(int(os.environ.get("THERMOCTL_JOBS", "1")), 1)
    except ValueError:
        return 1


def _model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--r", type=float, help="degeneracy ratio m/n")
    g.add_argument("--n", type=int, help="degeneracy of the excited sector")
    g.add_argument("--m", type=int, help="degeneracy of the ground sector")
    g.add_argument("--beta", type=float, default=1.0, help="inverse temperature (physical units)")
    g.add_argument("--gamma", type=float, default=1.0, help="bare tunnelling rate")
    g.add_argument("--units", choices=("kT", "physical"), default="kT")


def _boundary_flags(p, fixed=True, energies=True, duration=True):
    g = p.add_argument_group("boundary")
    g.add_argument("--p0", type=float)
    if fixed:
        g.add_argument("--p-tau", dest="p_tau", type=float)
    if energies:
        g.add_argument("--E0", dest="E0", type=float, help="energy before t=0 (default: equilibrium)")
        g.add_argument("--E-tau", dest="E_tau", type=float, help="energy after t=tau")
    if duration:
        g.add_argument("--tau", type=float)
        g.add_argument("--tau-ratio", dest="tau_ratio", type=float, help="tau as a multiple of tau_min")


def _output_flags(p, samples=True):
    g = p.add_argument_group("output")
    g.add_argument("--output", "-o", help="output path prefix (default: stdout summary only)")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    if samples:
        g.add_argument("--samples", type=int, default=control.DEFAULT_SAMPLES)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="thermoctl", description="Minimal-work driving of degenerate two-level systems."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file mirroring the flags")

    p = sub.add_parser("optimal", parents=[common], help="fixed-endpoint optimal protocol")
    _model_flags(p)
    _boundary_flags(p)
    _output_flags(p)

    p = sub.add_parser("free-final", parents=[common], help="optimal protocol with only E(tau) fixed")
    _model_flags(p)
    _boundary_flags(p, fixed=False)
    _output_flags(p)

    p = sub.add_parser("speed-limit", parents=[common], help="minimal duration of a transfer")
    _model_flags(p)
    _boundary_flags(p, energies=False)

    p = sub.add_parser("erasure-sweep", parents=[common], help="erasure cost over r and duration")
    _model_flags(p)
    p.add_argument("--p-tau", dest="p_tau", type=float, default=1e-5)
    p.add_argument("--r-min", dest="r_min", type=float, default=1e-2)
    p.add_argument("--r-max", dest="r_max", type=float, default=1e2)
    p.add_argument("--r-points", dest="r_points", type=int, default=41)
    p.add_argument("--tau-ratios", dest="tau_ratios", default="2,5,10,20")
    p.add_argument("--jobs", type=int, default=_jobs_default())
    _output_flags(p, samples=False)

    p = sub.add_parser("simulate", parents=[common], help="forward-simulate a protocol file")
    p.add_argument("protocol", nargs="?", help="protocol file (# thermoctl-protocol v1)")
    _model_flags(p)
    p.add_argument("--p0", type=float)
    _output_flags(p, samples=False)

    p = sub.add_parser("oracle", parents=[common], help="brute-force piecewise-constant optimizer")
    _model_flags(p)
    _boundary_flags(p)
    p.add_argument("--N", dest="N", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=3)
    _output_flags(p, samples=False)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        values = _read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest.lower(): a.dest for a in sub._actions if a.dest not in ("help", "config")}
        unknown = sorted(k for k in values if k.lower() not in known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**{known[k.lower()]: v for k, v in values.items()})
        args = parser.parse_args(argv)
    return args


# --- conversions ------------------------------------------------------------


def _params(args):
    if args.n is not None or args.m is not None:
        if args.n is None or args.m is None:
            raise UsageError("--n and --m must be given together")
        params = SystemParams.from_degeneracies(args.n, args.m, args.beta, args.gamma)
        if args.r is not None and args.r != params.r:
            raise UsageError("--r conflicts with --m/--n")
        return params
    if args.r is None:
        raise UsageError("give --r or --n/--m")
    return SystemParams.from_ratio(args.r, args.beta, args.gamma)


class _Units:
    """Converts between the command line and the internal k_BT, 1/(n gamma) units."""

    def __init__(self, params, mode):
        self.physical = mode == "physical"
        self.e = 1.0 / params.beta if self.physical else 1.0
        self.t = params.time_unit if self.physical else 1.0
        self.tag = (
            f"energy=1/beta (beta={params.beta!r}), time=1/(n*gamma) * {self.t!r}"
            if self.physical
            else "energy=k_BT, time=1/(n*gamma)"
        )

    def energy_in(self, E):
        return None if E is None else E / self.e

    def time_in(self, t):
        return None if t is None else t / self.t


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _duration(args, units, limit):
    if args.tau is not None and args.tau_ratio is not None:
        raise UsageError("--tau and --tau-ratio are mutually exclusive")
    if args.tau is not None:
        return units.time_in(args.tau)
    if args.tau_ratio is not None:
        if limit == 0.0:
            raise UsageError("--tau-ratio is undefined when tau_min = 0; give --tau")
        return args.tau_ratio * limit
    raise UsageError("give --tau or --tau-ratio")


def _fixed_problem(args):
    _require(args, "p0", "p_tau")
    params = _params(args)
    units = _Units(params, args.units)
    limit = tau_min(args.p0, args.p_tau, params)
    tau = _duration(args, units, limit)
    E0 = units.energy_in(args.E0)
    E_tau = units.energy_in(args.E_tau)
    if E0 is None:
        E0 = float(dynamics.equilibrium_energy(args.p0, params.r))
    if E_tau is None:
        E_tau = float(dynamics.equilibrium_energy(args.p_tau, params.r))
    boundary = Boundary(p0=args.p0, p_tau=args.p_tau, tau=tau, E0=E0, E_tau=E_tau)
    return validate_problem(params, boundary), units


# --- outputs ----------------------------------------------------------------


def _emit(args, suffix, text):
    if args.output:
        with open(f"{args.output}{suffix}", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _trajectory_rows(solution, units):
    tr = solution.trajectory
    t = tr.t * units.t
    E = tr.E * units.e
    tau = t[-1]
    E0, E_tau = solution.quench_in[0], solution.quench_out[1]
    rows = []
    if E0 is not None:
        rows.append((0.0, float(tr.p[0]), E0 * units.e))
    rows.extend(zip(t.tolist(), tr.p.tolist(), E.tolist()))
    if E_tau is not None:
        rows.append((float(tau), float(tr.p[-1]), E_tau * units.e))
    return rows


def _solution_summary(solution, units, delta_F, params):
    scale = units.e
    quenches = [
        {"t": q.time * units.t, "E_before": q.E_before * scale, "E_after": q.E_after * scale}
        for q in solution.protocol.quenches
    ]
    return {
        "kappa_tau": solution.kappa_tau / units.t,
        "W_min": solution.W_min * scale,
        "heat": solution.heat * scale,
        "tau_min": solution.tau_min * units.t,
        "tau": solution.trajectory.t[-1] * units.t,
        "p_final": solution.p_final,
        "delta_F_neq": None if delta_F is None else delta_F * scale,
        "quenches": quenches,
        "flags": list(solution.flags),
        "r": params.r,
        "units": units.tag,
    }


def _write_solution(args, solution, summary):
    units_rows = _trajectory_rows(solution, args._units)
    if args.format == "csv":
        _emit(args, ".csv", fileio.csv_text(("t", "p", "E"), units_rows))
    else:
        columns = {k: [row[i] for row in units_rows] for i, k in enumerate(("t", "p", "E"))}
        _emit(args, ".trajectory.json", fileio.dumps_json(columns))
    _emit(args, ".json", fileio.dumps_json(summary))
    if args.units == "kT":
        _emit(args, ".protocol", fileio.format_protocol(solution.protocol))
    sys.stdout.write(fileio.dumps_json(summary))


# --- subcommands ------------------------------------------------------------


def cmd_optimal(args):
    problem, units = _fixed_problem(args)
    args._units = units
    solution = control.solve(problem, args.samples)
    delta_F = dynamics.delta_F_neq(problem.boundary, problem.params)
    _write_solution(args, solution, _solution_summary(solution, units, delta_F, problem.params))
    return 0


def cmd_free_final(args):
    _require(args, "p0", "E_tau")
    params = _params(args)
    units = _Units(params, args.units)
    E_tau = units.energy_in(args.E_tau)
    target = float(dynamics.p_eq(E_tau, params.r))
    tau = _duration(args, units, tau_min(args.p0, target, params))
    E0 = units.energy_in(args.E0)
    if E0 is None:
        E0 = float(dynamics.equilibrium_energy(args.p0, params.r))
    boundary = Boundary(p0=args.p0, tau=tau, E0=E0, E_tau=E_tau)
    args._units = units
    solution = control.solve_free_final(params, boundary, args.samples)
    final = Boundary(p0=args.p0, tau=tau, p_tau=solution.p_final, E0=E0, E_tau=E_tau)
    delta_F = dynamics.delta_F_neq(final, params)
    _write_solution(args, solution, _solution_summary(solution, units, delta_F, params))
    return 0


def cmd_speed_limit(args):
    _require(args, "p0", "p_tau")
    params = _params(args)
    units = _Units(params, args.units)
    limit = tau_min(args.p0, args.p_tau, params)
    diff = args.p_tau - args.p0
    direction = "none" if diff == 0 else ("heating" if diff > 0 else "cooling")
    feasible = None
    if args.tau is not None or args.tau_ratio is not None:
        feasible = feasibility(args.p0, args.p_tau, _duration(args, units, limit), params).feasible
    out = {"tau_min": limit * units.t, "direction": direction, "feasible": feasible, "units": units.tag}
    sys.stdout.write(fileio.dumps_json(out))
    return 0


def cmd_erasure_sweep(args):
    if not args.r_points >= 1 or not 0 < args.r_min <= args.r_max:
        raise UsageError("need 0 < r-min <= r-max and r-points >= 1")
    try:
        ratios = tuple(float(x) for x in str(args.tau_ratios).split(",") if x.strip())
    except ValueError:
        raise UsageError(f"bad --tau-ratios {args.tau_ratios!r}") from None
    grid = tuple(np.logspace(math.log10(args.r_min), math.log10(args.r_max), args.r_points))
    spec = erasure.ErasureSpec(p_tau=args.p_tau, r_grid=grid, duration_grid=ratios)
    rows = erasure.erasure_sweep(spec, jobs=max(args.jobs, 1))
    header = ("r", "tau_ratio", "W_min", "kappa_tau", "delta_F_neq", "status")
    table = [(row.r, row.tau_ratio, row.W_min, row.kappa_tau, row.delta_F_neq, row.status) for row in rows]
    if args.format == "csv":
        text = fileio.csv_text(header, table)
    else:
        text = fileio.dumps_json([dict(zip(header, row)) for row in table])
    if args.output:
        _emit(args, "", text)
    else:
        sys.stdout.write(text)
    return 0 if any(row.ok for row in rows) else 1


def cmd_simulate(args):
    _require(args, "protocol", "p0")
    params = _params(args)
    protocol = fileio.read_protocol(args.protocol)
    trajectory = dynamics.simulate(protocol, args.p0, params)
    work = dynamics.work_of(protocol, trajectory)
    rows = zip(trajectory.t.tolist(), trajectory.p.tolist(), trajectory.E.tolist())
    summary = {
        "work": work,
        "p_final": float(trajectory.p[-1]),
        "tau": protocol.duration,
        "quenches": len(protocol.quenches),
        "units": "energy=k_BT, time=1/(n*gamma)",
    }
    if args.format == "csv":
        _emit(args, ".csv", fileio.csv_text(("t", "p", "E"), rows))
    else:
        rows = list(rows)
        _emit(args, ".trajectory.json", fileio.dumps_json({k: [row[i] for row in rows] for i, k in enumerate("tpE")}))
    _emit(args, ".json", fileio.dumps_json(summary))
    sys.stdout.write(fileio.dumps_json(summary))
    return 0


def cmd_oracle(args):
    problem, units = _fixed_problem(args)
    if not args.N >= 1:
        raise UsageError("--N must be positive")
    result = oracle.optimize(args.N, problem, seed=args.seed, restarts=args.restarts)
    W_min = control.solve(problem).W_min
    out = {
        "N": result.N,
        "work": result.work * units.e,
        "W_min": W_min * units.e,
        "gap_to_Wmin": (result.work - W_min) / abs(W_min) if W_min else result.work - W_min,
        "miss": result.miss,
        "seed": args.seed,
        "improved": result.improved,
        "levels": (result.protocol.levels * units.e).tolist(),
    }
    _emit(args, ".json", fileio.dumps_json(out))
    if args.units == "kT":
        _emit(args, ".protocol", fileio.format_protocol(result.protocol.to_protocol()))
    sys.stdout.write(fileio.dumps_json({k: out[k] for k in ("N", "work", "gap_to_Wmin", "seed")}))
    return 0


HANDLERS = {
    "optimal": cmd_optimal,
    "free-final": cmd_free_final,
    "speed-limit": cmd_speed_limit,
    "erasure-sweep": cmd_erasure_sweep,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return HANDLERS[args.command](args)
    except InfeasibleDuration as exc:
        print(f"error: infeasible duration; tau_min = {exc.tau_min!r}", file=sys.stderr)
        return 2
    except (DomainError, ParseError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ThermoctlError as exc:
        print(f"error: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
