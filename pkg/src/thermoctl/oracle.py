"""Brute-force reference optimizer over piecewise-constant energy schedules.

Deliberately shares no machinery with :mod:`thermoctl.control`: each level is
propagated with the exact exponential solution of the master equation and the
levels are tuned by derivative-free coordinate search. Since every such
schedule is an admissible protocol, its work can approach but never undercut
the analytic minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Problem, Protocol
from .errors import DomainError

E_CAP = 60.0
PENALTY = 1e4


def _fermi(E):
    if E >= 0:
        x = math.exp(-E)
        return x / (1.0 + x)
    return 1.0 / (1.0 + math.exp(E))


def _step(p, E, r, dt):
    f = _fermi(E)
    b = r + (1.0 - r) * f
    fixed = f / b
    return fixed + (p - fixed) * math.exp(-b * dt)


@dataclass(frozen=True, eq=False)
class PiecewiseProtocol:
    """``N`` equal-duration constant levels on ``[0, tau]`` between fixed boundary energies."""

    levels: np.ndarray
    E0: float
    E_tau: float
    tau: float

    def __post_init__(self):
        levels = np.array(self.levels, dtype=float)
        if levels.ndim != 1 or levels.size < 1:
            raise DomainError("need at least one level")
        if not np.all(np.isfinite(levels)) or np.any(np.abs(levels) > E_CAP + 1e-12):
            raise DomainError(f"levels must be finite with |E| <= {E_CAP}")
        levels.flags.writeable = False
        object.__setattr__(self, "levels", levels)

    @property
    def N(self) -> int:
        return self.levels.size

    def to_protocol(self) -> Protocol:
        edges = np.linspace(0.0, self.tau, self.N + 1)
        return Protocol.piecewise_constant(edges, self.levels, E0=self.E0, E_tau=self.E_tau)


def propagate_exact(protocol: PiecewiseProtocol, p0: float, r: float):
    """Exact final state and mean work of a piecewise-constant schedule.

    Returns ``(p_final, work)``; work is accumulated only at the level changes
    (including the boundary quenches) as ``jump * p``.
    """
    dt = protocol.tau / protocol.N
    p = p0
    prev = protocol.E0
    work = 0.0
    for E in protocol.levels:
        work += (E - prev) * p
        p = _step(p, E, r, dt)
        prev = E
    work += (protocol.E_tau - prev) * p
    return p, work


def _terminal_map(p, E, r, dt):
    """Final state of one segment and its derivative with respect to the level."""
    f = _fermi(E)
    b = r + (1.0 - r) * f
    q = f / b
    a = math.exp(-b * dt)
    p_end = q + (p - q) * a
    d_df = r / (b * b) * (1.0 - a) - (p - q) * dt * (1.0 - r) * a
    return p_end, -d_df * f * (1.0 - f)


class _Objective:
    """Work of a schedule whose last level is chosen to hit ``p_tau`` exactly.

    The ``M = N - 1`` free levels are held in ``x``. Forward (prefix) and
    backward (affine suffix) caches make the effect of changing one level
    an O(1) evaluation; :meth:`accept` refreshes the caches.
    """

    def __init__(self, N, p0, p_tau, E0, E_tau, tau, r):
        self.N, self.p0, self.p_tau = N, p0, p_tau
        self.E0, self.E_tau, self.r = E0, E_tau, r
        self.dt = tau / N
        self.evaluations = 0
        self._guess = 0.0

    def terminal_level(self, p):
        """Level of the last segment that lands on ``p_tau``, clamped to the cap.

        Returns ``(level, miss)`` with ``miss = p(tau) - p_tau``. The map is
        decreasing in the level, so a bracketed Newton iteration is safe.
        """
        r, dt, target = self.r, self.dt, self.p_tau
        lo, hi = -E_CAP, E_CAP
        miss_lo = _step(p, lo, r, dt) - target
        if miss_lo <= 0:
            return lo, miss_lo
        miss_hi = _step(p, hi, r, dt) - target
        if miss_hi >= 0:
            return hi, miss_hi
        E = min(max(self._guess, lo), hi)
        for _ in range(100):
            value, slope = _terminal_map(p, E, r, dt)
            g = value - target
            if g > 0:
                lo = E
            elif g < 0:
                hi = E
            else:
                break
            nxt = E - g / slope if slope < 0 else 0.5 * (lo + hi)
            if not lo < nxt < hi:
                nxt = 0.5 * (lo + hi)
            if abs(nxt - E) <= 1e-13 * (1.0 + abs(E)) or hi - lo <= 1e-13:
                E = nxt
                break
            E = nxt
        self._guess = E
        return E, _step(p, E, r, dt) - target

    def _finish(self, p_M, prev, work):
        last, miss = self.terminal_level(p_M)
        work += (last - prev) * p_M + (self.E_tau - last) * (self.p_tau + miss)
        return work, abs(miss), last

    def __call__(self, free):
        """Full evaluation of the free levels ``free``: ``(work, |miss|, last level)``."""
        self.evaluations += 1
        r, dt = self.r, self.dt
        p, prev, work = self.p0, self.E0, 0.0
        for E in free:
            work += (E - prev) * p
            p = _step(p, E, r, dt)
            prev = E
        return self._finish(p, prev, work)

    def accept(self, x):
        """Rebuild the prefix/suffix caches for the free levels ``x``."""
        r, dt = self.r, self.dt
        M = len(x)
        self.x = x
        self.ps = np.empty(M + 1)
        self.ws = np.empty(M + 1)
        alpha = np.empty(M)
        beta = np.empty(M)
        p, prev, work = self.p0, self.E0, 0.0
        for k, E in enumerate(x):
            self.ps[k], self.ws[k] = p, work
            f = _fermi(E)
            b = r + (1.0 - r) * f
            alpha[k] = math.exp(-b * dt)
            beta[k] = f / b * (1.0 - alpha[k])
            work += (E - prev) * p
            p = alpha[k] * p + beta[k]
            prev = E
        self.ps[M], self.ws[M] = p, work
        # p_M = A[j] p_j + B[j];  sum_{k=j+1}^{M-1} c_k p_k = g[j] p_j + h[j]
        self.A = np.ones(M + 1)
        self.B = np.zeros(M + 1)
        self.g = np.zeros(M + 1)
        self.h = np.zeros(M + 1)
        for j in range(M - 1, -1, -1):
            self.A[j] = self.A[j + 1] * alpha[j]
            self.B[j] = self.A[j + 1] * beta[j] + self.B[j + 1]
            coef = self.g[j + 1] + (x[j + 1] - x[j] if j + 1 <= M - 1 else 0.0)
            self.g[j] = coef * alpha[j]
            self.h[j] = coef * beta[j] + self.h[j + 1]

    def trial(self, i, y):
        """Evaluate the cached levels with ``x[i]`` replaced by ``y``."""
        self.evaluations += 1
        x, M = self.x, len(self.x)
        p_i = self.ps[i]
        prev = self.E0 if i == 0 else x[i - 1]
        work = self.ws[i] + (y - prev) * p_i
        p_next = _step(p_i, y, self.r, self.dt)
        if i + 1 <= M - 1:
            work += (x[i + 1] - y) * p_next
            work += self.g[i + 1] * p_next + self.h[i + 1]
            last_free = x[M - 1]
        else:
            last_free = y
        p_M = self.A[i + 1] * p_next + self.B[i + 1]
        return self._finish(p_M, last_free, work)


def _penalized(work, miss):
    return work + PENALTY * miss * miss


def _coordinate_search(obj, x, step=1.0, min_step=1e-5, max_sweeps=20000):
    """Compass search along coordinate axes; halve the step after a sweep without gain."""
    x = np.clip(np.array(x, dtype=float), -E_CAP, E_CAP)
    obj.accept(x)
    best = _penalized(*obj(x)[:2])
    sweeps = 0
    while step >= min_step and sweeps < max_sweeps:
        sweeps += 1
        improved = False
        for i in range(x.size):
            xi = x[i]
            for trial in (xi + step, xi - step):
                if abs(trial) > E_CAP:
                    continue
                value = _penalized(*obj.trial(i, trial)[:2])
                if value < best:
                    best = value
                    x[i] = trial
                    obj.accept(x)
                    improved = True
                    break
        if not improved:
            step *= 0.5
    return x, best


@dataclass(frozen=True, eq=False)
class OracleResult:
    protocol: PiecewiseProtocol
    work: float
    miss: float
    evaluations: int
    seed: int
    improved: bool

    @property
    def N(self) -> int:
        return self.protocol.N


def optimize(N: int, problem: Problem, seed: int = 0, restarts: int = 3, init=None) -> OracleResult:
    """Search the best ``N``-level schedule for a fixed-endpoint problem.

    The last level is always solved so that ``p(tau) = p_tau`` (projection);
    the remaining ``N - 1`` levels are tuned by coordinate search with a
    shrinking step, from ``restarts`` starting points (the linear ramp between
    the boundary energies, or ``init``, plus Gaussian perturbations drawn from
    a generator seeded with ``seed``). The quadratic penalty ``1e4 * miss**2``
    only matters when the target is unreachable under the energy cap.
    """
    b = problem.boundary
    if b.E0 is None or b.E_tau is None:
        raise DomainError("oracle needs both boundary energies")
    obj = _Objective(N, b.p0, b.p_tau, b.E0, b.E_tau, b.tau, problem.r)
    rng = np.random.default_rng(seed)
    if init is None:
        base = np.linspace(b.E0, b.E_tau, N + 2)[1:-1]
    else:
        base = np.asarray(init, dtype=float)
        if base.size != N:
            raise DomainError("init must have N levels")
    base = np.clip(base, -E_CAP, E_CAP)
    best = None
    for k in range(max(restarts, 1)):
        start = base[:-1].copy()
        if k > 0:
            start += rng.normal(0.0, 1.0, start.size)
        free, _ = _coordinate_search(obj, start, step=1.0 if init is None or k > 0 else 0.05)
        work, miss, last = obj(free)
        if best is None or _penalized(work, miss) < _penalized(best[0], best[1]):
            best = (work, miss, np.append(free, last))
    work, miss, levels = best
    initial_work, _, _ = obj(base[:-1])
    protocol = PiecewiseProtocol(levels, b.E0, b.E_tau, b.tau)
    return OracleResult(protocol, work, miss, obj.evaluations, seed, work < initial_work)


def refine(problem: Problem, Ns=(5, 25, 50, 100), seed: int = 0, restarts: int = 3) -> list:
    """Optimize on successively finer grids, warm-starting each from the previous one.

    Each ``N`` must be a multiple of the previous, so the coarse optimum
    embeds exactly (level duplication) and the work cannot increase.
    """
    results = []
    init = None
    for N in Ns:
        if results:
            prev = results[-1].protocol.levels
            if N % prev.size:
                raise DomainError("each N must be a multiple of the previous one")
            init = np.repeat(prev, N // prev.size)
        results.append(optimize(N, problem, seed=seed, restarts=restarts, init=init))
    return results
