import math

import numpy as np
import pytest

from conftest import benchmark_problem
from thermoctl.control import solve
from thermoctl.core import Boundary, SystemParams, validate_problem
from thermoctl.dynamics import equilibrium_energy, p_eq, simulate, work_of
from thermoctl.errors import DomainError
from thermoctl.oracle import E_CAP, PiecewiseProtocol, optimize, propagate_exact, refine
from thermoctl.speed_limit import tau_min


def test_levels_are_capped():
    with pytest.raises(DomainError):
        PiecewiseProtocol([E_CAP + 1.0], 0.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        PiecewiseProtocol([math.nan], 0.0, 0.0, 1.0)


def test_single_level_at_equilibrium():
    E = float(equilibrium_energy(0.3, 2.0))
    p, work = propagate_exact(PiecewiseProtocol([E], 0.0, 1.0, 2.0), 0.3, 2.0)
    assert p == pytest.approx(0.3, rel=1e-14)
    assert work == pytest.approx(E * 0.3 + (1.0 - E) * 0.3, rel=1e-14)


def test_single_level_exact_value():
    p, _ = propagate_exact(PiecewiseProtocol([0.0], 0.0, 0.0, math.log(2.0)), 0.0, 1.0)
    assert p == pytest.approx(0.25, rel=1e-15)


def test_agrees_with_simulation():
    rng = np.random.default_rng(0)
    proto = PiecewiseProtocol(rng.uniform(-3, 3, 12), 0.5, -0.5, 4.0)
    params = SystemParams.from_ratio(0.7)
    p, work = propagate_exact(proto, 0.4, 0.7)
    sim = simulate(proto.to_protocol(), 0.4, params, force_rk=True)
    assert sim.p[-1] == pytest.approx(p, abs=1e-9)
    assert work_of(proto.to_protocol(), sim) == pytest.approx(work, abs=1e-9)


def test_hits_target_and_never_beats_optimum():
    problem = benchmark_problem(1.0, -1, 5.0)
    result = optimize(10, problem, seed=3)
    p, work = propagate_exact(result.protocol, problem.boundary.p0, problem.r)
    assert p == pytest.approx(problem.boundary.p_tau, abs=1e-10)
    assert work == pytest.approx(result.work, abs=1e-12)
    assert result.work >= solve(problem).W_min - 1e-7
    assert result.improved


def test_seed_reproducible():
    problem = benchmark_problem(0.5, 1, 2.0)
    a = optimize(6, problem, seed=42)
    b = optimize(6, problem, seed=42)
    assert a.work == b.work and np.array_equal(a.protocol.levels, b.protocol.levels)


def test_refinement_is_monotone():
    problem = benchmark_problem(2.0, 1, 5.0)
    works = [res.work for res in refine(problem, (2, 4, 8), seed=0)]
    assert works[0] >= works[1] >= works[2]
    with pytest.raises(DomainError):
        refine(problem, (3, 4))


def test_short_duration_single_level_is_extreme():
    # just above the speed limit, the best single level saturates toward the cap
    params = SystemParams.from_ratio(1.0)
    tau = 1.05 * tau_min(0.6, 0.1, params)
    b = Boundary(p0=0.6, p_tau=0.1, tau=tau, E0=float(equilibrium_energy(0.6, 1.0)), E_tau=float(equilibrium_energy(0.1, 1.0)))
    result = optimize(1, validate_problem(params, b))
    assert result.protocol.levels[0] > 3.0
    assert float(p_eq(result.protocol.levels[0], 1.0)) < 0.1


def test_erasure_gap_at_fifty_levels():
    params = SystemParams.from_ratio(1.0)
    tau = 5 * tau_min(0.5, 1e-5, params)
    b = Boundary(p0=0.5, p_tau=1e-5, tau=tau, E0=0.0, E_tau=float(equilibrium_energy(1e-5, 1.0)))
    problem = validate_problem(params, b)
    W = solve(problem).W_min
    work = refine(problem, (5, 25, 50), seed=0, restarts=1)[-1].work
    assert W <= work <= W * 1.02
