"""Finite-time bit erasure: optimal protocols and cost-versus-r sweeps.

Erasure starts from ``p(0) = 1/2`` and ends at a small ``p(tau)``, with the
system at equilibrium at both ends. Durations are quoted as multiples of
the cooling speed limit ``ln(p0/p_tau)/r`` so that different ``r`` compete
on equal footing.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .control import heat_integral, solve, solve_kappa
from .core import Boundary, Problem, Protocol, SystemParams, Trajectory, validate_problem
from .dynamics import delta_F_neq, equilibrium_energy
from .errors import DomainError, ThermoctlError
from .speed_limit import tau_min

LANDAUER = math.log(2.0)


def _default_r_grid():
    return tuple(np.logspace(-2.0, 2.0, 41))


@dataclass(frozen=True)
class ErasureSpec:
    p_tau: float = 1e-5
    tau_ratio: float = 5.0
    r_grid: tuple = field(default_factory=_default_r_grid)
    duration_grid: tuple = (2.0, 5.0, 10.0, 20.0)

    def __post_init__(self):
        if not 0.0 < self.p_tau < 0.5:
            raise DomainError("erasure target p_tau must lie in (0, 0.5)")
        if not self.tau_ratio > 1.0 or any(not d > 1.0 for d in self.duration_grid):
            raise DomainError("duration multipliers must exceed 1")
        if any(not r > 0 for r in self.r_grid):
            raise DomainError("r values must be positive")


def erasure_problem(r: float, spec: ErasureSpec = ErasureSpec(), tau_ratio: float = None) -> Problem:
    """Equilibrium-to-equilibrium erasure ``1/2 -> p_tau`` lasting ``tau_ratio * tau_min``."""
    ratio = spec.tau_ratio if tau_ratio is None else tau_ratio
    params = SystemParams.from_ratio(r)
    p0 = 0.5
    boundary = Boundary(
        p0=p0,
        p_tau=spec.p_tau,
        tau=ratio * tau_min(p0, spec.p_tau, params),
        E0=-math.log(r),
        E_tau=float(equilibrium_energy(spec.p_tau, r)),
    )
    return validate_problem(params, boundary)


@dataclass(frozen=True)
class SweepRow:
    r: float
    tau_ratio: float
    W_min: float
    kappa_tau: float
    delta_F_neq: float
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _sweep_row(args):
    r, ratio, spec = args
    try:
        problem = erasure_problem(r, spec, ratio)
        b = problem.boundary
        kappa = solve_kappa(problem)
        dE = b.E_tau * b.p_tau - b.E0 * b.p0
        work = dE - heat_integral(b.p0, b.p_tau, kappa, r)
        return SweepRow(r, ratio, work, kappa.K, delta_F_neq(b, problem.params))
    except ThermoctlError as exc:
        nan = float("nan")
        return SweepRow(r, ratio, nan, nan, nan, f"error: {type(exc).__name__}: {exc}")


def erasure_sweep(spec: ErasureSpec = ErasureSpec(), jobs: int = 1) -> list:
    """Minimal erasure cost on the ``duration_grid x r_grid`` mesh.

    Rows are sorted by ``(tau_ratio, r)``. A failing grid point yields a row
    with a non-``"ok"`` status instead of aborting the sweep.
    """
    tasks = [(float(r), float(d), spec) for d in sorted(spec.duration_grid) for r in sorted(spec.r_grid)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks, chunksize=4))
    else:
        rows = [_sweep_row(t) for t in tasks]
    return sorted(rows, key=lambda row: (row.tau_ratio, row.r))


def erasure_protocol_export(r: float, spec: ErasureSpec = ErasureSpec(), samples: int = 2001):
    """Optimal erasure protocol (with both quenches) and its state trajectory."""
    solution = solve(erasure_problem(r, spec), samples)
    return solution.protocol, solution.trajectory


def shape_report(protocol: Protocol, trajectory: Trajectory, E_tau: float) -> dict:
    """Qualitative checks of an optimal erasure protocol.

    Returns a dict of booleans: two boundary quenches only, monotone increasing
    bulk energy, monotone decreasing ``p``, and overshoot of the final energy.
    """
    tau = protocol.duration
    times = sorted(q.time for q in protocol.quenches)
    bulk = trajectory.E
    return {
        "two_quenches": times == [0.0, tau] and len(protocol.segments) == 1,
        "bulk_increasing": bool(np.all(np.diff(bulk) > 0)),
        "p_decreasing": bool(np.all(np.diff(trajectory.p) < 0)),
        "overshoot": bool(protocol.segments[-1].E_end > E_tau),
    }
