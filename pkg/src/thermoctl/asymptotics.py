"""Leading-order solutions for very degenerate systems (r << 1 or r >> 1).

Formulas are written for ``r << 1``. The ``r >> 1`` regime follows from
the sector-exchange duality ``(p, E, r, t) -> (1 - p, -E, 1/r, r t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Trajectory
from .dynamics import fermi, p_eq
from .errors import DomainError, InfeasibleDuration

_INV_E = math.exp(-1.0)


def _w0_scalar(z):
    if z < -_INV_E:
        if z > -_INV_E - 1e-15:
            return -1.0
        raise DomainError(f"lambert_w0 needs z >= -1/e, got {z!r}")
    if z == 0.0:
        return 0.0
    if math.isinf(z):
        return math.inf
    if z < -0.25:
        # branch-point series in q = sqrt(2(e z + 1))
        q = math.sqrt(max(2.0 * (math.e * z + 1.0), 0.0))
        w = -1.0 + q - q * q / 3.0 + 11.0 / 72.0 * q**3
    elif z < 3.0:
        w = math.log1p(z)
        w *= 1.0 - math.log1p(w) / (2.0 + w)
    else:
        l1 = math.log(z)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    for _ in range(64):
        ew = math.exp(w)
        f = w * ew - z
        if w == -1.0:
            break
        wp1 = w + 1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 4e-16 * (1.0 + abs(w)):
            break
    return w


def lambert_w0(z):
    """Principal branch of the Lambert W function, by Halley iteration.

    Solves ``w * exp(w) = z`` for ``z >= -1/e`` with ``w >= -1``.
    """
    if np.ndim(z) == 0:
        return _w0_scalar(float(z))
    z = np.asarray(z, dtype=float)
    return np.vectorize(_w0_scalar, otypes=[float])(z)


def _w0_of_log(log_z):
    """``W0(exp(log_z))`` for positive arguments that may over- or underflow."""
    if -700.0 < log_z < 700.0:
        return _w0_scalar(math.exp(log_z))
    # ln w + w = log_z, Newton in v = ln w
    v = log_z if log_z < 0 else math.log(log_z)
    for _ in range(100):
        ev = math.exp(v)
        step = (v + ev - log_z) / (1.0 + ev)
        v -= step
        if abs(step) <= 1e-16 * (1.0 + abs(v)):
            break
    return math.exp(v)


def _tau_min(p0, p_tau, r):
    if p_tau > p0:
        return math.log((1.0 - p0) / (1.0 - p_tau))
    return math.log(p0 / p_tau) / r


def kappa_asymptotic(p0: float, p_tau: float, tau: float, r: float) -> float:
    """Leading-order conserved value ``|p_tau - p0| / (tau - tau_min)``."""
    limit = _tau_min(p0, p_tau, r)
    if not tau > limit:
        raise InfeasibleDuration(tau, limit)
    return abs(p_tau - p0) / (tau - limit)


def _trajectory_small_r(p0, kappa, r, direction, t):
    if direction > 0:
        x0 = (1.0 - p0) / kappa
        w = np.array([_w0_of_log(math.log(x0) + x0 - ti) for ti in t])
        return 1.0 - kappa * w
    x0 = r * p0 / kappa
    w = np.array([_w0_of_log(math.log(x0) + x0 - r * ti) for ti in t])
    return kappa / r * w


def _energy_small_r(p, kappa, r, direction):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        if direction > 0:
            return np.log((1.0 - p) / kappa)[()]
        return np.log(kappa * (1.0 - p) / (r * r * p * p))[()]


def trajectory_asymptotic(p0: float, kappa: float, r: float, direction: int, t_grid) -> Trajectory:
    """Explicit leading-order optimal trajectory via the Lambert W function.

    For ``r > 1`` the dual ``r' = 1/r`` formulas are used with
    ``p -> 1 - p``, ``t -> r t``, ``kappa -> kappa / r``, ``E -> -E``.
    """
    if not kappa > 0:
        raise DomainError("kappa must be positive")
    if direction not in (1, -1):
        raise DomainError("direction must be +1 or -1")
    t = np.asarray(t_grid, dtype=float)
    if r > 1.0:
        dual = trajectory_asymptotic(1.0 - p0, kappa / r, 1.0 / r, -direction, r * t)
        return Trajectory(t, 1.0 - dual.p, -dual.E, kappa=kappa)
    p = _trajectory_small_r(p0, kappa, r, direction, t)
    return Trajectory(t, p, _energy_small_r(p, kappa, r, direction), kappa=kappa)


def energy_curve_asymptotic(p, kappa: float, r: float, direction: int):
    """Leading-order optimal energy as a function of ``p``.

    Heating: ``ln[(1-p)/kappa]``; cooling: ``ln[kappa (1-p) / (r p)^2]``.
    """
    if r > 1.0:
        return -energy_curve_asymptotic(1.0 - np.asarray(p), kappa / r, 1.0 / r, -direction)
    return _energy_small_r(p, kappa, r, direction)


def _int_log1m(p):
    # antiderivative of ln(1 - p)
    return -(1.0 - p) * math.log1p(-p) - p


def _int_log(p):
    return p * math.log(p) - p


def heat_asymptotic(p0: float, p_tau: float, kappa: float, r: float) -> float:
    """Closed-form ``-int_{p0}^{p_tau} E(p) dp`` of the leading-order energy curve."""
    if r > 1.0:
        return heat_asymptotic(1.0 - p0, 1.0 - p_tau, kappa / r, 1.0 / r)
    dp = p_tau - p0
    integral = _int_log1m(p_tau) - _int_log1m(p0)
    if p_tau > p0:
        integral -= dp * math.log(kappa)
    else:
        integral += dp * (math.log(kappa) - 2.0 * math.log(r))
        integral -= 2.0 * (_int_log(p_tau) - _int_log(p0))
    return -integral


def limiting_rhs(p, E, r, regime: str):
    """Relaxation rate in the very degenerate limits.

    ``"small-r"``: ``f(E) (p_eq - p)``; ``"large-r"``: ``r (1 - f(E)) (p_eq - p)``.
    """
    f = fermi(E)
    if regime == "small-r":
        if r >= 1.0:
            raise DomainError("small-r regime needs r < 1")
        return (f * (p_eq(E, r) - np.asarray(p)))[()]
    if regime == "large-r":
        if r <= 1.0:
            raise DomainError("large-r regime needs r > 1")
        return (r * (1.0 - f) * (p_eq(E, r) - np.asarray(p)))[()]
    raise DomainError(f"unknown regime {regime!r}")


@dataclass(frozen=True, eq=False)
class AsymptoticSolution:
    kappa_tau: float
    trajectory: Trajectory
    energy_p: np.ndarray
    energy_E: np.ndarray
    heat: float
    error_order: str = "O(r)"


def solve_asymptotic(p0: float, p_tau: float, tau: float, r: float, samples: int = 2001) -> AsymptoticSolution:
    """Leading-order solution of a fixed-endpoint problem for ``r`` far from 1."""
    direction = 1 if p_tau > p0 else -1
    if r > 1.0:
        kappa = r * kappa_asymptotic(1.0 - p0, 1.0 - p_tau, r * tau, 1.0 / r)
    else:
        kappa = kappa_asymptotic(p0, p_tau, tau, r)
    t = np.linspace(0.0, tau, samples)
    trajectory = trajectory_asymptotic(p0, kappa, r, direction, t)
    grid = np.linspace(p0, p_tau, samples)
    return AsymptoticSolution(
        kappa_tau=kappa,
        trajectory=trajectory,
        energy_p=grid,
        energy_E=np.asarray(energy_curve_asymptotic(grid, kappa, r, direction)),
        heat=heat_asymptotic(p0, p_tau, kappa, r),
    )
