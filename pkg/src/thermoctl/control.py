"""Minimally dissipating protocols for a driven effective two-level system.

The work-minimising Lagrangian ``pdot * ln[(1-p-pdot)/(pdot+r p)]`` has no
explicit time dependence, so

    K = pdot^2 [1-(1-r)p] / ((1-p-pdot)(pdot+r p))

is conserved along optimal trajectories. Solving for ``pdot`` gives a
separable first-order equation; the duration fixes ``K`` and the optimal
energy follows from inverting the master equation.

Integrals over ``p`` are evaluated in log coordinates (``ln p`` when cooling,
``-ln(1-p)`` when heating), which absorbs the endpoint behaviour near 0 and 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .core import (
    Boundary,
    OptimalSolution,
    Problem,
    Protocol,
    SystemParams,
    Trajectory,
)
from .dynamics import equilibrium_energy, p_eq
from .speed_limit import tau_min
from .errors import (
    BranchViolation,
    DomainError,
    IntegratorFailure,
    InfeasibleDuration,
    NoConvergence,
    QuadratureFailure,
)

QUAD_RTOL = 1e-10
QUAD_LIMIT = 2000
QUAD_MAX_ERR = 1e-8
ODE_RTOL = 1e-12
ODE_ATOL = 1e-13
K_LOWER = 1e-12
K_UPPER = 1e12
DEFAULT_SAMPLES = 2001


@dataclass(frozen=True)
class ConservedK:
    """Value of the conserved quantity and the direction of motion (+1 / -1)."""

    K: float
    sign: int

    def __post_init__(self):
        if not self.K >= 0:
            raise DomainError(f"K={self.K!r} must be nonnegative")
        if self.sign not in (1, -1):
            raise DomainError("sign must be +1 or -1")


def conserved_quantity(p, pdot, r):
    """``K`` evaluated from a state and its rate of change."""
    p = np.asarray(p, dtype=float)
    pdot = np.asarray(pdot, dtype=float)
    return (pdot**2 * (1.0 - (1.0 - r) * p) / ((1.0 - p - pdot) * (pdot + r * p)))[()]


def discriminant(p, K, r):
    c = 1.0 - (1.0 - r) * np.asarray(p, dtype=float)
    return (K * K * c * c + 4.0 * K * r * p * (1.0 - p) * c)[()]


def _in_branch(p, pdot, r):
    return np.all((pdot + r * p > 0) & (1.0 - p - pdot > 0))


def energy_from_state(p, pdot, r):
    """Energy gap that produces rate ``pdot`` at state ``p``.

    Raises
    ------
    BranchViolation
        Unless ``-r p < pdot < 1 - p``.
    """
    p = np.asarray(p, dtype=float)
    pdot = np.asarray(pdot, dtype=float)
    if not _in_branch(p, pdot, r):
        raise BranchViolation("need -r*p < pdot < 1 - p for a real energy gap")
    return np.log((1.0 - p - pdot) / (pdot + r * p))[()]


def _pdot_scalar(p, K, r, sign):
    if K == 0.0:
        return 0.0
    if math.isinf(K):
        return 1.0 - p if sign > 0 else -r * p
    c = 1.0 - (1.0 - r) * p
    b = K * (1.0 - (1.0 + r) * p)
    sq = math.sqrt(K * K * c * c + 4.0 * K * r * p * (1.0 - p) * c)
    prod = 2.0 * K * r * p * (1.0 - p)
    # pdot = (b +/- sq) / (2(c+K)); take the cancellation-free form of each root
    if sign > 0:
        return (b + sq) / (2.0 * (c + K)) if b >= 0 else prod / (sq - b)
    return (b - sq) / (2.0 * (c + K)) if b <= 0 else -prod / (b + sq)


def _pdot_array(p, K, r, sign):
    p = np.asarray(p, dtype=float)
    if K == 0.0:
        return np.zeros_like(p)
    if math.isinf(K):
        return 1.0 - p if sign > 0 else -r * p
    c = 1.0 - (1.0 - r) * p
    b = K * (1.0 - (1.0 + r) * p)
    sq = np.sqrt(K * K * c * c + 4.0 * K * r * p * (1.0 - p) * c)
    prod = 2.0 * K * r * p * (1.0 - p)
    with np.errstate(divide="ignore", invalid="ignore"):
        if sign > 0:
            return np.where(b >= 0, (b + sq) / (2.0 * (c + K)), prod / (sq - b))
        return np.where(b <= 0, (b - sq) / (2.0 * (c + K)), -prod / (b + sq))


def pdot_of(p, K: ConservedK, r):
    """Rate of change on the optimal trajectory with conserved value ``K``.

    ``K.K = inf`` gives the speed-limit rates ``1 - p`` (heating) and
    ``-r p`` (cooling).
    """
    if np.ndim(p) == 0:
        return _pdot_scalar(float(p), K.K, r, K.sign)
    return _pdot_array(p, K.K, r, K.sign)


def _factors_scalar(p, K, r, sign):
    """``(1 - p - pdot, pdot + r p)`` without catastrophic cancellation."""
    pdot = _pdot_scalar(p, K, r, sign)
    c = 1.0 - (1.0 - r) * p
    if sign > 0:
        gain = pdot + r * p
        loss = c * pdot * pdot / (K * gain)
    else:
        loss = 1.0 - p - pdot
        gain = c * pdot * pdot / (K * loss)
    return loss, gain


def _energy_scalar(p, K, r, sign):
    if K == 0.0:
        return math.log((1.0 - p) / (r * p))
    loss, gain = _factors_scalar(p, K, r, sign)
    if not (loss > 0 and gain > 0):
        raise BranchViolation(f"optimal rate left the physical branch at p={p!r}")
    return math.log(loss) - math.log(gain)


def optimal_energy(p, K: ConservedK, r):
    """Energy gap along the optimal trajectory, as a function of ``p``.

    ``K = 0`` gives the equilibrium curve ``ln[(1-p)/(r p)]``; ``K = inf``
    gives ``-inf`` (heating) or ``+inf`` (cooling).
    """
    if math.isinf(K.K):
        value = -math.inf if K.sign > 0 else math.inf
        return value if np.ndim(p) == 0 else np.full(np.shape(p), value)
    if np.ndim(p) == 0:
        return _energy_scalar(float(p), K.K, r, K.sign)
    p = np.asarray(p, dtype=float)
    if K.K == 0.0:
        return np.log((1.0 - p) / (r * p))
    pdot = _pdot_array(p, K.K, r, K.sign)
    c = 1.0 - (1.0 - r) * p
    with np.errstate(divide="ignore", invalid="ignore"):
        if K.sign > 0:
            gain = pdot + r * p
            loss = c * pdot * pdot / (K.K * gain)
        else:
            loss = 1.0 - p - pdot
            gain = c * pdot * pdot / (K.K * loss)
    if not (np.all(loss > 0) and np.all(gain > 0)):
        raise BranchViolation("optimal rate left the physical branch")
    return np.log(loss) - np.log(gain)


def optimal_energy_closed(p, K: ConservedK, r):
    """Optimal energy from the explicit square-root formula (no cancellation control).

    Algebraically identical to :func:`optimal_energy`; kept as an
    independent evaluation route.
    """
    p = np.asarray(p, dtype=float)
    c = 1.0 - (1.0 - r) * p
    sq = np.sqrt(discriminant(p, K.K, r))
    s = K.sign
    num = c * (K.K + 2.0 * (1.0 - p)) - s * sq
    den = c * (K.K + 2.0 * r * p) + s * sq
    if not (np.all(num > 0) and np.all(den > 0)):
        raise BranchViolation("optimal energy is not real here")
    return np.log(num / den)[()]


def optimal_probability(E, kappa: ConservedK, r):
    """State on the optimal trajectory at which the control equals ``E``.

    Inverse of :func:`optimal_energy`: the system lags behind the
    equilibrium ``p_eq(E)`` by a ``kappa``-dependent factor.
    """
    E = np.asarray(E, dtype=float)
    k = kappa.K
    peq = p_eq(E, r)
    A = 0.5 * k * (1.0 - r) / (r + np.exp(-E))
    root = np.sqrt(A * A + r * k * (1.0 + np.exp(E)) / (r + np.exp(-E)))
    return (peq * (1.0 - A - kappa.sign * root))[()]


# -- log coordinates -------------------------------------------------------

def _to_coord(p, sign):
    return -math.log1p(-p) if sign > 0 else math.log(p)


def _from_coord(y, sign):
    return -math.expm1(-y) if sign > 0 else math.exp(y)


def _jacobian(p, sign):
    """``dp/dy`` for the log coordinate ``y``."""
    return 1.0 - p if sign > 0 else p


def _quad(func, a, b):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        value, err = quad(func, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=QUAD_LIMIT)
    if not math.isfinite(value) or err > QUAD_MAX_ERR * max(1.0, abs(value)):
        detail = str(caught[-1].message) if caught else f"error estimate {err:g}"
        raise QuadratureFailure(detail)
    return value


def time_of_p(p_target: float, p0: float, K: ConservedK, r: float) -> float:
    """Time ``F_K(p_target)`` to go from ``p0`` to ``p_target`` at conserved ``K``.

    Raises
    ------
    BranchViolation
        If ``p_target`` is not reachable in the direction ``K.sign``.
    """
    if p_target == p0:
        return 0.0
    if (p_target - p0) * K.sign < 0:
        raise BranchViolation("p_target lies on the wrong side of p0 for this direction")
    if K.K == 0.0:
        return math.inf
    s, k = K.sign, K.K

    def integrand(y):
        p = _from_coord(y, s)
        return _jacobian(p, s) / _pdot_scalar(p, k, r, s)

    return _quad(integrand, _to_coord(p0, s), _to_coord(p_target, s))


def heat_integral(p_from: float, p_to: float, K: ConservedK, r: float) -> float:
    """``int_{p_from}^{p_to} E_K(p) dp`` along the optimal energy curve."""
    if p_to == p_from:
        return 0.0
    s, k = K.sign, K.K

    def integrand(y):
        p = _from_coord(y, s)
        return _energy_scalar(p, k, r, s) * _jacobian(p, s)

    return _quad(integrand, _to_coord(p_from, s), _to_coord(p_to, s))


def solve_kappa(problem: Problem) -> ConservedK:
    """Conserved value ``kappa_tau`` that reaches ``p_tau`` exactly at ``tau``.

    ``F_K(p_tau)`` decreases monotonically in ``K``; the root is bracketed
    by geometric expansion in ``ln K`` within ``[1e-12, 1e12]`` and refined
    with Brent's method.
    """
    b = problem.boundary
    if problem.identity:
        return ConservedK(0.0, 1)
    if not b.tau > problem.tau_min:
        raise InfeasibleDuration(b.tau, problem.tau_min)
    sign, r, tau = problem.direction, problem.r, b.tau

    def excess(log_k):
        return time_of_p(b.p_tau, b.p0, ConservedK(math.exp(log_k), sign), r) - tau

    lo_lim, hi_lim = math.log(K_LOWER), math.log(K_UPPER)
    x0 = 0.0
    g0 = excess(x0)
    step = 1.0
    if g0 > 0:
        lo, hi = x0, x0 + step
        while excess(hi) > 0:
            if hi >= hi_lim:
                raise NoConvergence(
                    f"tau={tau!r} is too close to tau_min={problem.tau_min!r} (K > {K_UPPER:g})"
                )
            lo, step = hi, 2.0 * step
            hi = min(hi + step, hi_lim)
    else:
        lo, hi = x0 - step, x0
        while excess(lo) < 0:
            if lo <= lo_lim:
                raise NoConvergence(f"tau={tau!r} needs K < {K_LOWER:g}")
            hi, step = lo, 2.0 * step
            lo = max(lo - step, lo_lim)
    log_k, info = brentq(excess, lo, hi, xtol=1e-12, maxiter=200, full_output=True, disp=False)
    if not info.converged:
        raise NoConvergence(f"kappa root search stopped: {info.flag}")
    kappa = ConservedK(math.exp(log_k), sign)
    if abs(excess(log_k)) >= 1e-9 * tau:
        raise NoConvergence("kappa root does not reproduce tau to 1e-9 relative")
    return kappa


def _coord_rate(p, K, r, sign):
    """``pdot / (dp/dy)``, finite even when ``p`` underflows to 0 (or 1)."""
    c = 1.0 - (1.0 - r) * p
    b = K * (1.0 - (1.0 + r) * p)
    sq = math.sqrt(K * K * c * c + 4.0 * K * r * p * (1.0 - p) * c)
    if sign > 0:
        return (b + sq) / (2.0 * (c + K) * (1.0 - p)) if b >= 0 else 2.0 * K * r * p / (sq - b)
    return (b - sq) / (2.0 * (c + K) * p) if b <= 0 else -2.0 * K * r * (1.0 - p) / (b + sq)


def _coord_rhs(K, r, sign):
    def rhs(t, y):
        return [_coord_rate(_from_coord(y[0], sign), K, r, sign)]

    return rhs


def _integrate_optimal(p0, K: ConservedK, r, tau, t_eval=None):
    sol = solve_ivp(
        _coord_rhs(K.K, r, K.sign),
        (0.0, tau),
        [_to_coord(p0, K.sign)],
        method="DOP853",
        t_eval=t_eval,
        rtol=ODE_RTOL,
        atol=ODE_ATOL,
    )
    if sol.status != 0:
        raise IntegratorFailure(sol.message)
    y = sol.y[0]
    if K.sign > 0:
        return -np.expm1(-y)
    return np.exp(y)


def trajectory_from(p0: float, K: ConservedK, r: float, tau: float, samples: int = DEFAULT_SAMPLES) -> Trajectory:
    """Optimal trajectory from ``p0`` with conserved ``K``, on a uniform grid of ``[0, tau]``."""
    t = np.linspace(0.0, tau, samples)
    if K.K == 0.0:
        p = np.full_like(t, p0)
        return Trajectory(t, p, np.full_like(t, equilibrium_energy(p0, r)), kappa=0.0)
    p = _integrate_optimal(p0, K, r, tau, t_eval=t)
    return Trajectory(t, p, optimal_energy(p, K, r), kappa=K.K)


def optimal_trajectory(problem: Problem, K: ConservedK, samples: int = DEFAULT_SAMPLES) -> Trajectory:
    """Sample the optimal state and control by integrating the first-order rate equation."""
    return trajectory_from(problem.boundary.p0, K, problem.r, problem.boundary.tau, samples)


def final_probability(p0: float, K: ConservedK, r: float, tau: float) -> float:
    """State reached at ``tau`` on the optimal trajectory with conserved ``K``."""
    if K.K == 0.0:
        return p0
    return float(_integrate_optimal(p0, K, r, tau)[-1])


def _assemble(params, boundary, kappa, trajectory, p_final, E_tau, tau_min, flags=()):
    r = params.r
    heat = -heat_integral(boundary.p0, p_final, kappa, r)
    E_in = float(trajectory.E[0])
    E_out = float(trajectory.E[-1])
    if boundary.E0 is not None and E_tau is not None:
        delta_E = E_tau * p_final - boundary.E0 * boundary.p0
        work = delta_E + heat
    else:
        delta_E = None
        work = heat
    protocol = Protocol.from_samples(
        trajectory.t, trajectory.E, "cubic", E0=boundary.E0, E_tau=E_tau
    )
    return OptimalSolution(
        kappa_tau=kappa.K,
        trajectory=trajectory,
        W_min=float(work),
        heat=float(heat),
        delta_E_boundary=delta_E,
        tau_min=tau_min,
        quench_in=(boundary.E0, E_in),
        quench_out=(E_out, E_tau),
        protocol=protocol,
        p_final=float(p_final),
        flags=tuple(flags),
    )


def minimal_work(problem: Problem, K: ConservedK, samples: int = DEFAULT_SAMPLES) -> OptimalSolution:
    """Assemble the optimal solution for a solved ``K``.

    The work is ``Delta E - int E_K(p) dp`` with
    ``Delta E = E_tau p_tau - E0 p0``. The emitted protocol quenches from
    ``E0`` to ``E_K(p0)`` at ``t = 0`` and from ``E_K(p_tau)`` to ``E_tau``
    at ``t = tau``.
    """
    b = problem.boundary
    trajectory = optimal_trajectory(problem, K, samples)
    return _assemble(problem.params, b, K, trajectory, b.p_tau, b.E_tau, problem.tau_min)


def solve(problem: Problem, samples: int = DEFAULT_SAMPLES) -> OptimalSolution:
    """Fixed-endpoint solve: ``kappa_tau`` followed by :func:`minimal_work`."""
    return minimal_work(problem, solve_kappa(problem), samples)


def free_final_objective(K: ConservedK, p0: float, E_tau: float, r: float, tau: float) -> float:
    """K-dependent part of the work when only the final energy is prescribed.

    Very large ``K`` over a long ``tau`` can push ``p`` below the range where
    the energy curve is representable; the reached state is clamped to
    ``[1e-150, 1 - 1e-15]``, which changes the objective by a negligible tail.
    """
    p_final = min(max(final_probability(p0, K, r, tau), 1e-150), 1.0 - 1e-15)
    return p_final * E_tau - heat_integral(p0, p_final, K, r)


def solve_free_final(
    params: SystemParams,
    boundary: Boundary,
    samples: int = DEFAULT_SAMPLES,
    scan_points: int = 64,
) -> OptimalSolution:
    """Optimal protocol when only the final energy ``E_tau`` is prescribed.

    ``K`` minimises the work directly: a coarse scan over ``log10 K`` in
    ``[-10, 10]`` isolates a bracket, refined by golden-section search. If
    the scanned objective is not unimodal the flag ``"not-unimodal"`` is set;
    if the golden search fails, the scan minimum is returned with flag
    ``"scan-fallback"``.
    """
    if boundary.p_tau is not None:
        raise DomainError("free-final problem must not prescribe p_tau")
    if boundary.E_tau is None:
        raise DomainError("free-final problem needs E_tau")
    r, p0, tau, E_tau = params.r, boundary.p0, boundary.tau, boundary.E_tau
    target = float(p_eq(E_tau, r))
    flags = []
    if target == p0:
        kappa = ConservedK(0.0, 1)
    else:
        sign = 1 if target > p0 else -1

        def objective(log_k):
            return free_final_objective(ConservedK(math.exp(log_k), sign), p0, E_tau, r, tau)

        grid = np.linspace(math.log(1e-10), math.log(1e10), scan_points)
        values = np.array([objective(x) for x in grid])
        i = int(np.argmin(values))
        interior = values[1:-1]
        minima = np.sum((interior < values[:-2]) & (interior < values[2:]))
        if minima != 1:
            flags.append("not-unimodal")
        if 0 < i < scan_points - 1:
            try:
                res = minimize_scalar(
                    objective,
                    bracket=(grid[i - 1], grid[i], grid[i + 1]),
                    method="golden",
                    tol=1e-10,
                )
                best = res.x if res.fun <= values[i] else grid[i]
            except (ValueError, RuntimeError):
                best = grid[i]
                flags.append("scan-fallback")
        else:
            best = grid[i]
            flags.append("scan-fallback")
        kappa = ConservedK(math.exp(best), sign)
    trajectory = trajectory_from(p0, kappa, r, tau, samples)
    p_final = float(trajectory.p[-1])
    limit = tau_min(p0, p_final, params)
    return _assemble(params, boundary, kappa, trajectory, p_final, E_tau, limit, flags)
