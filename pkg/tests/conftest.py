import itertools

import pytest

from thermoctl.core import Boundary, SystemParams, validate_problem
from thermoctl.dynamics import equilibrium_energy
from thermoctl.speed_limit import tau_min

BENCH_R = (0.1, 0.5, 1.0, 2.0)
BENCH_RATIOS = (2.0, 5.0, 20.0)

_RESULTS = []


def benchmark_problem(r, direction, ratio):
    """Equilibrium-to-equilibrium transfer 0.6 -> 0.1 (cooling) or 0.1 -> 0.6 (heating)."""
    p0, p_tau = (0.6, 0.1) if direction < 0 else (0.1, 0.6)
    params = SystemParams.from_ratio(r)
    boundary = Boundary(
        p0=p0,
        p_tau=p_tau,
        tau=ratio * tau_min(p0, p_tau, params),
        E0=float(equilibrium_energy(p0, r)),
        E_tau=float(equilibrium_energy(p_tau, r)),
    )
    return validate_problem(params, boundary)


def benchmark_instances():
    """12 instances: every (r, tau_ratio) pair, direction alternating so both occur for each r and ratio."""
    out = []
    for (i, r), (j, ratio) in itertools.product(enumerate(BENCH_R), enumerate(BENCH_RATIOS)):
        direction = -1 if (i + j) % 2 == 0 else 1
        out.append((r, direction, ratio))
    return out


@pytest.fixture
def report():
    def _report(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip()
        _RESULTS.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _RESULTS:
            terminalreporter.write_line(line)
