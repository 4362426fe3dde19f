import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from conftest import benchmark_problem
from thermoctl.control import (
    ConservedK,
    conserved_quantity,
    energy_from_state,
    final_probability,
    free_final_objective,
    heat_integral,
    optimal_energy,
    optimal_energy_closed,
    optimal_probability,
    pdot_of,
    solve,
    solve_free_final,
    solve_kappa,
    time_of_p,
    trajectory_from,
)
from thermoctl.core import Boundary, SystemParams, validate_problem
from thermoctl.dynamics import delta_F_neq, equilibrium_energy, p_eq
from thermoctl.errors import BranchViolation, DomainError, InfeasibleDuration
from thermoctl.speed_limit import tau_min

probs = st.floats(1e-4, 1 - 1e-4)
ratios = st.floats(1e-3, 1e3)
kappas = st.floats(1e-6, 1e6)
signs = st.sampled_from([1, -1])


def _erasure(r=1.0, ratio=5.0, energies=True):
    params = SystemParams.from_ratio(r)
    tau = ratio * tau_min(0.5, 1e-5, params)
    extra = dict(E0=-math.log(r), E_tau=float(equilibrium_energy(1e-5, r))) if energies else {}
    return validate_problem(params, Boundary(p0=0.5, p_tau=1e-5, tau=tau, **extra))


# -- kernels -----------------------------------------------------------------


def test_energy_from_state_examples():
    assert energy_from_state(0.3, 0.0, 2.0) == pytest.approx(math.log(0.7 / 0.6), rel=1e-15)
    assert energy_from_state(0.5, 0.0, 1.0) == 0.0
    assert energy_from_state(0.25, 0.25, 1.0) == 0.0


@pytest.mark.parametrize("pdot", [0.8, -0.3])
def test_energy_from_state_rejects_unphysical_rates(pdot):
    with pytest.raises(BranchViolation):
        energy_from_state(0.25, pdot, 1.0)


def test_pdot_limits():
    assert pdot_of(0.3, ConservedK(0.0, 1), 2.0) == 0.0
    assert pdot_of(0.3, ConservedK(math.inf, 1), 2.0) == pytest.approx(0.7)
    assert pdot_of(0.3, ConservedK(math.inf, -1), 2.0) == pytest.approx(-0.6)
    assert pdot_of(0.3, ConservedK(1e12, 1), 2.0) == pytest.approx(0.7, rel=1e-9)


def test_pdot_symmetric_cooling_root():
    # p = 0.5, r = 1: the linear term vanishes and pdot = -sqrt(2)/4, inside the branch
    pdot = pdot_of(0.5, ConservedK(1.0, -1), 1.0)
    assert pdot == pytest.approx(-math.sqrt(2.0) / 4.0, rel=1e-15)
    assert -0.5 < pdot < 0.5
    assert conserved_quantity(0.5, pdot, 1.0) == pytest.approx(1.0, rel=1e-14)


@given(probs, kappas, ratios, signs)
def test_pdot_roots_are_admissible_and_conserve_K(p, K, r, sign):
    # pdot solves -(K + c) x^2 + K (1 - p - r p) x + K r p (1 - p) = 0
    pdot = pdot_of(p, ConservedK(K, sign), r)
    assert sign * pdot > 0
    assert -r * p < pdot < 1 - p
    c = 1 - (1 - r) * p
    terms = (-(K + c) * pdot**2, K * (1 - p - r * p) * pdot, K * r * p * (1 - p))
    assert abs(sum(terms)) <= 1e-12 * sum(abs(x) for x in terms)


@given(probs, kappas, ratios, signs)
def test_energy_matches_high_precision(p, K, r, sign):
    mp.mp.dps = 50
    P, KK, R = mp.mpf(p), mp.mpf(K), mp.mpf(r)
    c = 1 - (1 - R) * P
    sq = mp.sqrt(KK**2 * c**2 + 4 * KK * R * P * (1 - P) * c)
    x = (KK * (1 - (1 + R) * P) + sign * sq) / (2 * (c + KK))
    exact = float(mp.log((1 - P - x) / (x + R * P)))
    assert optimal_energy(p, ConservedK(K, sign), r) == pytest.approx(exact, rel=1e-12, abs=1e-12)


@given(st.floats(0.05, 0.95), st.floats(1e-3, 1e2), st.floats(0.1, 10.0), signs)
def test_energy_routes_agree_when_well_conditioned(p, K, r, sign):
    k = ConservedK(K, sign)
    stable = optimal_energy(p, k, r)
    assert energy_from_state(p, pdot_of(p, k, r), r) == pytest.approx(stable, rel=1e-8, abs=1e-8)
    assert optimal_energy_closed(p, k, r) == pytest.approx(stable, rel=1e-8, abs=1e-8)


@given(probs, kappas, ratios, signs)
def test_closed_form_inverts_energy(p, K, r, sign):
    k = ConservedK(K, sign)
    E = optimal_energy(p, k, r)
    if abs(E) < 30:
        assert optimal_probability(E, k, r) == pytest.approx(p, rel=1e-7)


def test_energy_limits():
    p = np.linspace(0.05, 0.95, 7)
    assert np.allclose(optimal_energy(p, ConservedK(0.0, 1), 0.4), np.log((1 - p) / (0.4 * p)))
    assert np.all(optimal_energy(p, ConservedK(math.inf, 1), 0.4) == -np.inf)
    assert optimal_energy(0.2, ConservedK(math.inf, -1), 0.4) == math.inf


def test_energy_small_r_heating():
    r, kappa = 1e-4, 0.2
    p = np.linspace(0.1, 0.7, 13)
    exact = optimal_energy(p, ConservedK(kappa, 1), r)
    assert np.max(np.abs(exact - np.log((1 - p) / kappa))) < 10 * r


def test_constructor_rejects_negative_K():
    with pytest.raises(DomainError):
        ConservedK(-1.0, 1)


# -- time and kappa ------------------------------------------------------------


def test_time_of_p_basics():
    k = ConservedK(1.0, -1)
    assert time_of_p(0.4, 0.4, k, 1.0) == 0.0
    with pytest.raises(BranchViolation):
        time_of_p(0.6, 0.4, k, 1.0)


def test_time_of_p_fast_heating_limit():
    F = time_of_p(0.9, 0.2, ConservedK(1e8, 1), 0.3)
    assert F == pytest.approx(math.log(0.8 / 0.1), rel=1e-6)


def test_time_of_p_against_ode_arrival():
    k = ConservedK(1.0, -1)

    def hit(t, y):
        return y[0] - 0.4

    hit.terminal = True
    sol = solve_ivp(lambda t, y: [pdot_of(y[0], k, 1.0)], (0, 10), [0.5], events=hit, rtol=1e-12, atol=1e-14)
    assert time_of_p(0.4, 0.5, k, 1.0) == pytest.approx(sol.t_events[0][0], rel=1e-8)


def _shooting_kappa(problem):
    """Bisection on ln K, with the arrival state found by explicit ODE integration in t."""
    b, r = problem.boundary, problem.r

    def arrival(log_k):
        k = ConservedK(math.exp(log_k), problem.direction)
        sol = solve_ivp(
            lambda t, y: [pdot_of(math.exp(y[0]), k, r) / math.exp(y[0])],
            (0, b.tau),
            [math.log(b.p0)],
            method="LSODA",
            rtol=1e-12,
            atol=1e-14,
        )
        return sol.y[0, -1] - math.log(b.p_tau)

    lo, hi = -20.0, 5.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if arrival(mid) > 0:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def test_kappa_against_shooting():
    problem = _erasure()
    assert solve_kappa(problem).K == pytest.approx(_shooting_kappa(problem), rel=1e-7)


def test_kappa_vanishes_slowly():
    values = [solve_kappa(_erasure(ratio=x)).K for x in (2.0, 20.0, 200.0, 2000.0)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-5


def test_identity_problem_is_trivial():
    problem = validate_problem(
        SystemParams.from_ratio(1.0), Boundary(p0=0.3, p_tau=0.3, tau=1.0, E0=0.4, E_tau=0.4)
    )
    sol = solve(problem, 11)
    assert sol.kappa_tau == 0.0 and sol.W_min == 0.0
    assert np.all(sol.trajectory.p == 0.3)
    assert np.allclose(sol.trajectory.E, equilibrium_energy(0.3, 1.0))


def test_infeasible_request():
    params = SystemParams.from_ratio(1.0)
    with pytest.raises(InfeasibleDuration):
        validate_problem(params, Boundary(p0=0.5, p_tau=1e-5, tau=0.5 * tau_min(0.5, 1e-5, params)))


# -- trajectories and work -----------------------------------------------------


def test_zero_K_trajectory_is_constant():
    tr = trajectory_from(0.3, ConservedK(0.0, 1), 2.0, 1.0, 5)
    assert np.all(tr.p == 0.3)


def test_optimal_trajectory_monotone_and_on_target():
    for args in [(0.5, -1, 2.0), (2.0, 1, 5.0)]:
        problem = benchmark_problem(*args)
        sol = solve(problem)
        steps = np.diff(sol.trajectory.p) * problem.direction
        assert np.all(steps > 0)
        assert sol.trajectory.p[-1] == pytest.approx(problem.boundary.p_tau, rel=1e-9)


def test_erasure_solution():
    problem = _erasure()
    sol = solve(problem)
    dF = delta_F_neq(problem.boundary, problem.params)
    assert sol.W_min > math.log(2.0) > dF - 1e-5
    assert sol.quench_in[0] == 0.0
    assert len(sol.protocol.quenches) == 2


def test_work_decreases_with_duration_and_tends_to_free_energy():
    works = [solve(_erasure(ratio=x), 201).W_min for x in (2.0, 5.0, 20.0, 200.0)]
    assert all(a > b for a, b in zip(works, works[1:]))
    dF = delta_F_neq(_erasure().boundary, SystemParams.from_ratio(1.0))
    assert works[-1] - dF <= 0.02 * dF


def test_work_without_energies_is_heat_only():
    with_E = solve(_erasure(), 201)
    without = solve(_erasure(energies=False), 201)
    assert without.delta_E_boundary is None
    assert without.W_min == pytest.approx(with_E.heat, rel=1e-12)


def test_r_to_one_limit_is_continuous():
    a = solve(_erasure(r=1.0), 201)
    b = solve(_erasure(r=1.0 + 1e-7), 201)
    assert b.W_min == pytest.approx(a.W_min, rel=1e-5)
    assert np.max(np.abs(a.trajectory.p - b.trajectory.p)) < 1e-6


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.1, 10.0), st.floats(1.2, 30.0))
def test_second_law(p0, p_tau, r, ratio):
    if abs(p_tau - p0) < 1e-3:
        return
    params = SystemParams.from_ratio(r)
    b = Boundary(
        p0=p0,
        p_tau=p_tau,
        tau=ratio * tau_min(p0, p_tau, params),
        E0=float(equilibrium_energy(p0, r)),
        E_tau=float(equilibrium_energy(p_tau, r)),
    )
    sol = solve(validate_problem(params, b), 101)
    assert sol.W_min >= delta_F_neq(b, params)


def _path_work(t, p, r, E0, E_tau):
    from scipy.integrate import simpson

    h = t[1] - t[0]
    pdot = np.gradient(p, h, edge_order=2)
    E = np.array([energy_from_state(a, b, r) for a, b in zip(p, pdot)])
    return E_tau * p[-1] - E0 * p[0] - simpson(E * pdot, x=t)


def test_local_optimality_under_bump_perturbations():
    problem = benchmark_problem(0.5, -1, 5.0)
    b, r = problem.boundary, problem.r
    tr = solve(problem, 4001).trajectory
    base = _path_work(tr.t, tr.p, r, b.E0, b.E_tau)
    s = tr.t / b.tau
    for bump in (np.sin(np.pi * s) ** 2, np.sin(2 * np.pi * s) * s * (1 - s)):
        for eps in (2e-3, -2e-3):
            assert _path_work(tr.t, tr.p + eps * bump, r, b.E0, b.E_tau) > base


# -- free final state ------------------------------------------------------------


def _free(E_tau, tau, r=1.0, p0=0.5):
    params = SystemParams.from_ratio(r)
    return params, Boundary(p0=p0, tau=tau, E0=float(equilibrium_energy(p0, r)), E_tau=E_tau)


def test_free_final_requires_energy_and_no_target():
    params = SystemParams.from_ratio(1.0)
    with pytest.raises(DomainError):
        solve_free_final(params, Boundary(p0=0.5, tau=1.0))
    with pytest.raises(DomainError):
        solve_free_final(params, Boundary(p0=0.5, tau=1.0, p_tau=0.2, E_tau=1.0))


def test_free_final_quasistatic_limit():
    sol = solve_free_final(*_free(2.0, 1e4), samples=101)
    assert sol.p_final == pytest.approx(float(p_eq(2.0, 1.0)), rel=1e-3)
    assert sol.kappa_tau < 1e-4


def test_free_final_beats_fixed_target():
    E_tau, tau = 2.0, 10.0
    params, b = _free(E_tau, tau)
    free = solve_free_final(params, b, samples=101)
    target = float(p_eq(E_tau, 1.0))
    fixed = solve(validate_problem(params, Boundary(p0=0.5, p_tau=target, tau=tau, E0=b.E0, E_tau=E_tau)), 101)
    assert free.W_min <= fixed.W_min + 1e-12


def test_free_final_erasure_lags_and_matches_grid_scan():
    E_tau = math.log((1 - 1e-5) / 1e-5)
    tau = 5 * 10.8198
    params, b = _free(E_tau, tau)
    sol = solve_free_final(params, b, samples=101)
    assert sol.p_final > float(p_eq(E_tau, 1.0))
    assert "not-unimodal" not in sol.flags and "scan-fallback" not in sol.flags
    grid = np.exp(np.linspace(math.log(sol.kappa_tau) - 1.0, math.log(sol.kappa_tau) + 1.0, 201))
    values = [free_final_objective(ConservedK(k, -1), 0.5, E_tau, 1.0, tau) for k in grid]
    best = free_final_objective(ConservedK(sol.kappa_tau, -1), 0.5, E_tau, 1.0, tau)
    assert best <= min(values) + 1e-10


def test_final_probability_consistent_with_time_of_p():
    k = ConservedK(0.3, 1)
    p_end = final_probability(0.2, k, 0.7, 1.5)
    assert time_of_p(p_end, 0.2, k, 0.7) == pytest.approx(1.5, rel=1e-9)


def test_heat_integral_equilibrium_curve():
    # K -> 0 recovers the quasistatic heat -int ln[(1-p)/(r p)] dp
    from scipy.integrate import quad

    exact = quad(lambda p: math.log((1 - p) / (2.0 * p)), 0.2, 0.6)[0]
    assert heat_integral(0.2, 0.6, ConservedK(1e-16, 1), 2.0) == pytest.approx(exact, rel=1e-6)
