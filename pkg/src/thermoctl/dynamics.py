"""Coarse-grained master equation, forward simulation and work accounting.

All functions use the internal units of :mod:`thermoctl.core`
(k_B T = 1, n*gamma = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.special import expit, xlogy

from .core import Boundary, Protocol, SystemParams, Trajectory
from .errors import GridMismatch, IntegratorFailure, MissingBoundary

RTOL = 1e-10
ATOL = 1e-12


def fermi(E):
    """Fermi factor ``1/(1 + e^E)``; saturates cleanly at large ``|E|``."""
    return expit(-np.asarray(E, dtype=float))[()]


def p_eq(E, r):
    """Equilibrium excitation probability ``1/(1 + r e^E)``."""
    return expit(-np.asarray(E, dtype=float) - np.log(r))[()]


def equilibrium_energy(p, r):
    """Energy gap whose equilibrium state has excitation probability ``p``."""
    return np.log((1.0 - np.asarray(p, dtype=float)) / (r * np.asarray(p, dtype=float)))[()]


@dataclass(frozen=True)
class RateCoefficients:
    """``dp/dt = a - b p`` at a fixed energy gap."""

    a: float
    b: float

    @property
    def fixed_point(self) -> float:
        return self.a / self.b


def rate_coefficients(E, r) -> RateCoefficients:
    f = fermi(E)
    return RateCoefficients(f, r + (1.0 - r) * f)


def master_rhs(p, E, r):
    """Right-hand side ``f(E) - [r + (1 - r) f(E)] p`` of the master equation."""
    f = fermi(E)
    return f - (r + (1.0 - r) * f) * p


def relaxation_rhs(p, E, r):
    """Same as :func:`master_rhs`, written as ``[r + (1-r) f] (p_eq - p)``."""
    f = fermi(E)
    return (r + (1.0 - r) * f) * (p_eq(E, r) - p)


def _propagate_constant(p_start, E, r, dt):
    f = float(fermi(E))
    b = r + (1.0 - r) * f
    fixed = f / b
    return fixed + (p_start - fixed) * np.exp(-b * dt)


def _integrate_segment(seg, p_start, r):
    def rhs(t, y):
        f = float(expit(-seg.energy(t)))
        return [f - (r + (1.0 - r) * f) * y[0]]

    sol = solve_ivp(
        rhs,
        (seg.t_start, seg.t_end),
        [p_start],
        method="RK45",
        t_eval=seg.times,
        rtol=RTOL,
        atol=ATOL,
    )
    if sol.status != 0:
        raise IntegratorFailure(sol.message)
    p = sol.y[0]
    p[0] = p_start
    return p


def simulate(protocol: Protocol, p0: float, params: SystemParams, force_rk: bool = False) -> Trajectory:
    """Forward-integrate the master equation under ``protocol``.

    Constant segments use the exact exponential propagator; smooth segments
    use an adaptive Runge-Kutta 4(5) pair. The trajectory is sampled on
    :meth:`Protocol.sample_times`. Quenches leave ``p`` unchanged.

    Parameters
    ----------
    force_rk : bool
        Integrate constant segments numerically as well (for cross-checks).
    """
    r = params.r
    ps, Es = [], []
    p_start = float(p0)
    for k, seg in enumerate(protocol.segments):
        if seg.interp == "constant" and not force_rk:
            p = _propagate_constant(p_start, seg.E_start, r, seg.times - seg.t_start)
        else:
            p = _integrate_segment(seg, p_start, r)
        E = seg.energy(seg.times)
        if k > 0:
            p, E = p[1:], E[1:]
        ps.append(p)
        Es.append(np.broadcast_to(E, p.shape))
        p_start = float(p[-1])
    t = protocol.sample_times()
    E = np.concatenate(Es)
    # right-continuous energy at interior segment boundaries
    for seg in protocol.segments[1:]:
        E[np.searchsorted(t, seg.t_start)] = seg.E_start
    return Trajectory(t, np.concatenate(ps), E)


def work_of(protocol: Protocol, trajectory: Trajectory) -> float:
    """Mean work ``sum(quench jump * p) + int Edot p dt`` along a simulated run.

    Linear segments use the trapezoidal rule for ``int p dt`` between samples;
    cubic segments use Simpson's rule on ``Edot * p``.
    """
    t = trajectory.t
    if not np.array_equal(t, protocol.sample_times()):
        raise GridMismatch("trajectory was not sampled on the protocol grid")
    p = trajectory.p
    work = 0.0
    for q in protocol.quenches:
        work += q.jump * p[np.searchsorted(t, q.time)]
    for seg in protocol.segments:
        if seg.interp == "constant":
            continue
        lo = np.searchsorted(t, seg.t_start)
        ts, pseg = t[lo:lo + seg.times.size], p[lo:lo + seg.times.size]
        if seg.interp == "linear":
            work += float(np.sum(seg._slopes * 0.5 * (pseg[1:] + pseg[:-1]) * np.diff(ts)))
        else:
            work += float(simpson(seg.rate(ts) * pseg, x=ts))
    return work


def coarse_entropy(p, r):
    """Entropy of the coarse-grained state with uniform populations in each sector.

    Only ``r`` is needed: the ``ln m`` offset cancels in every difference.
    """
    p = np.asarray(p, dtype=float)
    return (-xlogy(p, p) - xlogy(1.0 - p, 1.0 - p) - p * np.log(r))[()]


def free_energy_neq(p, E, r):
    """Nonequilibrium free energy ``E p - S(p)`` (up to an ``r``-only constant)."""
    return E * p - coarse_entropy(p, r)


def delta_F_neq(boundary: Boundary, params: SystemParams) -> float:
    """Nonequilibrium free-energy change between the two boundary states."""
    if boundary.p_tau is None or not boundary.has_energies:
        raise MissingBoundary("need p_tau, E0 and E_tau")
    r = params.r
    return float(
        free_energy_neq(boundary.p_tau, boundary.E_tau, r)
        - free_energy_neq(boundary.p0, boundary.E0, r)
    )
