"""Minimal-work finite-time driving of degenerate two-level systems.

Internal units: energies in k_BT, times in 1/(n*gamma).
"""

from .asymptotics import lambert_w0, solve_asymptotic
from .control import ConservedK, solve, solve_free_final, solve_kappa
from .core import UNITS, Boundary, Problem, Protocol, Quench, Segment, SystemParams, Trajectory, validate_problem
from .dynamics import delta_F_neq, fermi, master_rhs, p_eq, simulate, work_of
from .erasure import ErasureSpec, erasure_problem, erasure_sweep
from .errors import (
    DomainError,
    InfeasibleDuration,
    NoConvergence,
    ParseError,
    QuadratureFailure,
    ThermoctlError,
)
from .oracle import PiecewiseProtocol, optimize, propagate_exact, refine
from .speed_limit import feasibility, tau_min

__version__ = "0.1.0"
