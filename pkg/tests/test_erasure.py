import math

import numpy as np
import pytest

from thermoctl.control import solve
from thermoctl.dynamics import simulate, work_of
from thermoctl.erasure import (
    LANDAUER,
    ErasureSpec,
    erasure_problem,
    erasure_protocol_export,
    erasure_sweep,
    shape_report,
)
from thermoctl.errors import DomainError

SMALL = ErasureSpec(r_grid=(0.1, 1.0, 10.0), duration_grid=(2.0, 5.0))


def test_problem_boundaries():
    problem = erasure_problem(1.0)
    b = problem.boundary
    assert b.E0 == 0.0
    assert b.E_tau == pytest.approx(11.5129, abs=1e-4)
    assert b.tau == pytest.approx(5 * math.log(5e4), rel=1e-15)
    assert erasure_problem(0.01).boundary.tau == pytest.approx(500 * math.log(5e4), rel=1e-15)


def test_spec_validation():
    with pytest.raises(DomainError):
        ErasureSpec(p_tau=0.7)
    with pytest.raises(DomainError):
        ErasureSpec(duration_grid=(1.0,))
    with pytest.raises(DomainError):
        ErasureSpec(r_grid=(0.0,))


def test_sweep_rows_sorted_and_above_landauer():
    rows = erasure_sweep(SMALL)
    assert [(row.tau_ratio, row.r) for row in rows] == sorted((d, r) for d in (2.0, 5.0) for r in (0.1, 1.0, 10.0))
    assert all(row.ok and row.W_min > LANDAUER for row in rows)
    for r in SMALL.r_grid:
        w = [row.W_min for row in rows if row.r == r]
        assert w[0] > w[1]


def test_sweep_matches_full_solver():
    row = erasure_sweep(ErasureSpec(r_grid=(0.5,), duration_grid=(5.0,)))[0]
    assert row.W_min == pytest.approx(solve(erasure_problem(0.5)).W_min, rel=1e-12)


def test_parallel_sweep_is_identical():
    assert erasure_sweep(SMALL, jobs=2) == erasure_sweep(SMALL, jobs=1)


def test_failing_point_reports_status():
    rows = erasure_sweep(ErasureSpec(r_grid=(1.0,), duration_grid=(1.0 + 1e-15,)))
    assert not rows[0].ok and rows[0].status.startswith("error")
    assert math.isnan(rows[0].W_min)


@pytest.mark.parametrize("r", [0.05, 1.0, 20.0])
def test_exported_protocol_shape_and_replay(r):
    protocol, trajectory = erasure_protocol_export(r, samples=1001)
    problem = erasure_problem(r)
    shape = shape_report(protocol, trajectory, problem.boundary.E_tau)
    assert all(shape.values()), shape
    assert protocol.quenches[0].E_before == -math.log(r)
    sim = simulate(protocol, 0.5, problem.params)
    assert np.max(np.abs(sim.p - trajectory.p)) < 1e-7
    W = solve(problem, 1001).W_min
    assert work_of(protocol, sim) == pytest.approx(W, rel=1e-6)
