"""Shared domain types for effective two-level systems.

Internal unit convention: energies in units of k_B T (beta = 1) and times in
units of 1/(n*gamma), where n is the degeneracy of the excited sector. In
these units the bare relaxation rate of the excited sector is 1 and that of
the ground sector is r = m/n. Conversion to physical units happens only at
the edges (see :meth:`SystemParams.energy_to_physical`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, InfeasibleDuration

UNITS = "energy=k_BT, time=1/(n*gamma)"

P_MIN = 1e-12
P_MAX = 1.0 - 1e-12


def _check_probability(name, value):
    if not (P_MIN <= value <= P_MAX):
        raise DomainError(f"{name}={value!r} must lie in [{P_MIN}, {P_MAX}]")


@dataclass(frozen=True)
class SystemParams:
    """Model instance: sector degeneracies and bath parameters.

    Build with :meth:`from_degeneracies` for integer sectors or
    :meth:`from_ratio` when only the degeneracy ratio ``r = m/n`` matters
    (e.g. sweeps over non-integer ``r``).
    """

    r: float
    n: Optional[int] = None
    m: Optional[int] = None
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise DomainError(f"degeneracy ratio r={self.r!r} must be positive")
        if self.beta <= 0 or self.gamma <= 0:
            raise DomainError("beta and gamma must be positive")
        if (self.n is None) != (self.m is None):
            raise DomainError("give both n and m, or neither")
        if self.n is not None:
            if self.n < 1 or self.m < 1:
                raise DomainError("degeneracies must be positive integers")
            if self.r != self.m / self.n:
                raise DomainError(f"r={self.r!r} does not match m/n={self.m / self.n!r}")

    @classmethod
    def from_degeneracies(cls, n: int, m: int, beta: float = 1.0, gamma: float = 1.0):
        return cls(r=m / n, n=int(n), m=int(m), beta=beta, gamma=gamma)

    @classmethod
    def from_ratio(cls, r: float, beta: float = 1.0, gamma: float = 1.0):
        return cls(r=float(r), beta=beta, gamma=gamma)

    def dual(self) -> "SystemParams":
        """Parameters with the two sectors exchanged (n <-> m)."""
        if self.n is not None:
            return SystemParams.from_degeneracies(self.m, self.n, self.beta, self.gamma)
        return SystemParams.from_ratio(1.0 / self.r, self.beta, self.gamma)

    @property
    def time_unit(self) -> float:
        """Physical duration of one internal time unit, 1/(n*gamma).

        When only ``r`` is known, ``n = 1`` is assumed.
        """
        n = self.n if self.n is not None else 1
        return 1.0 / (n * self.gamma)

    def energy_to_physical(self, energy):
        return energy / self.beta

    def time_to_physical(self, t):
        return t * self.time_unit


@dataclass(frozen=True)
class Boundary:
    """Boundary conditions of a driving problem.

    ``p_tau`` is ``None`` for the free-final-state problem. Energies are
    optional; without them only the heat part of the work is available.
    """

    p0: float
    tau: float
    p_tau: Optional[float] = None
    E0: Optional[float] = None
    E_tau: Optional[float] = None

    def __post_init__(self):
        _check_probability("p0", self.p0)
        if self.p_tau is not None:
            _check_probability("p_tau", self.p_tau)
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise DomainError(f"duration tau={self.tau!r} must be positive and finite")
        for name in ("E0", "E_tau"):
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise DomainError(f"{name} must be finite")

    @property
    def has_energies(self) -> bool:
        return self.E0 is not None and self.E_tau is not None


@dataclass(frozen=True)
class Problem:
    """A validated driving problem; build it with :func:`validate_problem`."""

    params: SystemParams
    boundary: Boundary
    direction: int
    tau_min: float

    @property
    def r(self) -> float:
        return self.params.r

    @property
    def identity(self) -> bool:
        return self.direction == 0


def validate_problem(params: SystemParams, boundary: Boundary) -> Problem:
    """Check a fixed-endpoint problem and attach its direction and speed limit.

    ``direction`` is the sign of ``p_tau - p0``; zero marks the identity
    problem, which is solved by holding the state at equilibrium.

    Raises
    ------
    InfeasibleDuration
        If ``tau <= tau_min``.
    DomainError
        If ``p_tau`` is missing or a probability is out of range.
    """
    from .speed_limit import tau_min as _tau_min

    if boundary.p_tau is None:
        raise DomainError("fixed-endpoint problem needs p_tau")
    diff = boundary.p_tau - boundary.p0
    direction = 0 if diff == 0 else (1 if diff > 0 else -1)
    limit = _tau_min(boundary.p0, boundary.p_tau, params)
    if direction != 0 and not boundary.tau > limit:
        raise InfeasibleDuration(boundary.tau, limit)
    return Problem(params=params, boundary=boundary, direction=direction, tau_min=limit)


_INTERP_KINDS = ("constant", "linear", "cubic")


@dataclass(frozen=True, eq=False)
class Segment:
    """A smooth stretch of an energy schedule on ``[times[0], times[-1]]``.

    Between samples the energy is held (``constant``), linearly interpolated
    (``linear``) or follows a not-a-knot cubic spline (``cubic``).
    """

    times: np.ndarray
    energies: np.ndarray
    interp: str = "linear"

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        energies = np.array(self.energies, dtype=float)
        if times.ndim != 1 or times.shape != energies.shape or times.size < 2:
            raise DomainError("segment needs matching 1-d times/energies with >= 2 samples")
        if np.any(np.diff(times) <= 0):
            raise DomainError("segment sample times must be strictly increasing")
        if not np.all(np.isfinite(energies)) or not np.all(np.isfinite(times)):
            raise DomainError("segment samples must be finite")
        if self.interp not in _INTERP_KINDS:
            raise DomainError(f"unknown interpolation {self.interp!r}")
        if self.interp == "constant" and np.any(energies != energies[0]):
            raise DomainError("constant segment with varying energies")
        if self.interp == "cubic" and times.size < 4:
            raise DomainError("cubic segment needs >= 4 samples")
        times.flags.writeable = False
        energies.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "energies", energies)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def E_start(self) -> float:
        return float(self.energies[0])

    @property
    def E_end(self) -> float:
        return float(self.energies[-1])

    @cached_property
    def _spline(self):
        return CubicSpline(self.times, self.energies)

    @cached_property
    def _slopes(self):
        return np.diff(self.energies) / np.diff(self.times)

    def energy(self, t):
        if self.interp == "constant":
            return np.full_like(np.asarray(t, dtype=float), self.energies[0])[()]
        if self.interp == "linear":
            return np.interp(t, self.times, self.energies)
        return self._spline(t)[()]

    def rate(self, t):
        """Time derivative of the energy inside the segment."""
        t = np.asarray(t, dtype=float)
        if self.interp == "constant":
            return np.zeros_like(t)[()]
        if self.interp == "linear":
            idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2)
            return self._slopes[idx][()]
        return self._spline(t, 1)[()]


@dataclass(frozen=True)
class Quench:
    """Instantaneous jump of the energy gap at ``time``."""

    time: float
    E_before: float
    E_after: float

    @property
    def jump(self) -> float:
        return self.E_after - self.E_before


@dataclass(frozen=True)
class Protocol:
    """An energy schedule on ``[0, tau]``: smooth segments joined by quenches."""

    segments: tuple
    quenches: tuple = ()
    units: str = UNITS

    def __post_init__(self):
        segments = tuple(self.segments)
        quenches = tuple(sorted(self.quenches, key=lambda q: q.time))
        if not segments:
            raise DomainError("protocol needs at least one segment")
        if segments[0].t_start != 0.0:
            raise DomainError("protocol must start at t = 0")
        for left, right in zip(segments, segments[1:]):
            if left.t_end != right.t_start:
                raise DomainError(
                    f"segments leave a gap or overlap at t={left.t_end!r}/{right.t_start!r}"
                )
        boundaries = {s.t_start for s in segments} | {segments[-1].t_end}
        for q in quenches:
            if q.time not in boundaries:
                raise DomainError(f"quench at t={q.time!r} is not on a segment boundary")
            if not (math.isfinite(q.E_before) and math.isfinite(q.E_after)):
                raise DomainError("quench energies must be finite")
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "quenches", quenches)

    @property
    def duration(self) -> float:
        return self.segments[-1].t_end

    @classmethod
    def from_samples(
        cls,
        times: Sequence[float],
        energies: Sequence[float],
        interp: str = "cubic",
        E0: Optional[float] = None,
        E_tau: Optional[float] = None,
    ) -> "Protocol":
        """Single smooth segment, with optional quenches from ``E0`` and to ``E_tau``."""
        seg = Segment(times, energies, interp)
        quenches = []
        if E0 is not None and E0 != seg.E_start:
            quenches.append(Quench(0.0, E0, seg.E_start))
        if E_tau is not None and E_tau != seg.E_end:
            quenches.append(Quench(seg.t_end, seg.E_end, E_tau))
        return cls((seg,), tuple(quenches))

    @classmethod
    def piecewise_constant(
        cls,
        edges: Sequence[float],
        levels: Sequence[float],
        E0: Optional[float] = None,
        E_tau: Optional[float] = None,
        samples_per_segment: int = 2,
    ) -> "Protocol":
        """Hold ``levels[k]`` on ``[edges[k], edges[k+1]]``; quench between levels."""
        edges = np.asarray(edges, dtype=float)
        levels = np.asarray(levels, dtype=float)
        if edges.size != levels.size + 1:
            raise DomainError("need len(edges) == len(levels) + 1")
        segments, quenches = [], []
        for k, level in enumerate(levels):
            times = np.linspace(edges[k], edges[k + 1], samples_per_segment)
            times[0], times[-1] = edges[k], edges[k + 1]
            segments.append(Segment(times, np.full(times.size, level), "constant"))
            if k > 0 and levels[k - 1] != level:
                quenches.append(Quench(float(edges[k]), float(levels[k - 1]), float(level)))
        if E0 is not None and E0 != levels[0]:
            quenches.append(Quench(0.0, E0, float(levels[0])))
        if E_tau is not None and E_tau != levels[-1]:
            quenches.append(Quench(float(edges[-1]), float(levels[-1]), E_tau))
        return cls(tuple(segments), tuple(quenches))

    def sample_times(self) -> np.ndarray:
        """Union of the segment sample times (shared boundaries listed once)."""
        parts = [self.segments[0].times]
        parts += [s.times[1:] for s in self.segments[1:]]
        return np.concatenate(parts)

    def energy_at(self, t) -> np.ndarray:
        """Energy in force inside the segments.

        Right-continuous at interior boundaries; at ``t = 0`` and ``t = tau``
        the segment values are returned, i.e. after the initial quench and
        before the final one.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        starts = np.array([s.t_start for s in self.segments])
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.segments) - 1)
        for k, seg in enumerate(self.segments):
            mask = idx == k
            if np.any(mask):
                out[mask] = seg.energy(t[mask])
        return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled ``(t, p, E)`` with strictly increasing ``t``.

    ``E`` is the energy in force at each sample (right-continuous, i.e. after
    any quench at that instant, except at the final time where the value
    before the final quench is kept).
    """

    t: np.ndarray
    p: np.ndarray
    E: np.ndarray
    kappa: Optional[float] = None
    units: str = UNITS

    def __post_init__(self):
        arrays = []
        for name in ("t", "p", "E"):
            a = np.array(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
            arrays.append(a)
        t, p, E = arrays
        if not (t.ndim == 1 and t.shape == p.shape == E.shape):
            raise DomainError("t, p and E must be 1-d arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise DomainError("trajectory times must be strictly increasing")
        if np.any(p < -1e-9) or np.any(p > 1 + 1e-9):
            raise DomainError("trajectory probabilities left [0, 1]")
        if self.kappa is not None and self.kappa < 0:
            raise DomainError("kappa must be nonnegative")

    def __len__(self):
        return self.t.size


@dataclass(frozen=True, eq=False)
class OptimalSolution:
    """Output of the optimal-control solver.

    ``W_min`` is the full minimal work when both boundary energies are known.
    Otherwise ``delta_E_boundary`` is ``None`` and ``W_min`` holds only the
    heat part ``-int E dp``.
    """

    kappa_tau: float
    trajectory: Trajectory
    W_min: float
    heat: float
    delta_E_boundary: Optional[float]
    tau_min: float
    quench_in: tuple
    quench_out: tuple
    protocol: Protocol
    p_final: float
    flags: tuple = field(default_factory=tuple)
    units: str = UNITS
