"""Minimum transformation times and the fastest (diverging-control) trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import SystemParams, Trajectory
from .errors import DomainError


def _open_unit(name, p):
    if not (0.0 < p < 1.0):
        raise DomainError(f"{name}={p!r} must lie strictly inside (0, 1)")


def tau_min(p0: float, p_tau: float, params: SystemParams) -> float:
    """Shortest time to bring the excitation probability from ``p0`` to ``p_tau``.

    In internal units (n*gamma = 1): ``ln[(1-p0)/(1-p_tau)]`` when filling the
    excited sector and ``ln(p0/p_tau)/r`` when filling the ground sector. Only
    the degeneracy of the sector being filled enters.
    """
    _open_unit("p0", p0)
    _open_unit("p_tau", p_tau)
    if p_tau > p0:
        return math.log((1.0 - p0) / (1.0 - p_tau))
    if p_tau < p0:
        return math.log(p0 / p_tau) / params.r
    return 0.0


def fastest_trajectory(p0: float, direction: int, params: SystemParams, t_grid) -> Trajectory:
    """Trajectory driven by a saturated (infinite) energy gap.

    Heating uses ``E = -inf`` and cooling ``E = +inf``; the returned energies
    carry those infinities to flag the diverging control cost.
    """
    if direction not in (1, -1):
        raise DomainError("direction must be +1 (heating) or -1 (cooling)")
    t = np.asarray(t_grid, dtype=float)
    if direction > 0:
        decay = np.exp(-t)
        p = p0 * decay + 1.0 - decay
        E = np.full_like(t, -np.inf)
    else:
        p = p0 * np.exp(-params.r * t)
        E = np.full_like(t, np.inf)
    return Trajectory(t, p, E)


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    tau_min: float
    margin: float


def feasibility(p0: float, p_tau: float, tau: float, params: SystemParams) -> Feasibility:
    """Report whether ``tau`` strictly exceeds the speed limit.

    ``tau == tau_min`` is infeasible: it is only reached with diverging control.
    """
    limit = tau_min(p0, p_tau, params)
    if limit == 0.0:
        return Feasibility(True, 0.0, math.inf)
    return Feasibility(tau > limit, limit, tau / limit)
