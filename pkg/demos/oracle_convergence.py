"""Brute-force piecewise-constant protocols approach the analytic optimum from above."""

from thermoctl.control import solve
from thermoctl.core import Boundary, SystemParams, validate_problem
from thermoctl.dynamics import equilibrium_energy
from thermoctl.oracle import refine
from thermoctl.speed_limit import tau_min

r = 0.5
params = SystemParams.from_ratio(r)
p0, p_tau = 0.6, 0.1
boundary = Boundary(
    p0=p0,
    p_tau=p_tau,
    tau=5 * tau_min(p0, p_tau, params),
    E0=float(equilibrium_energy(p0, r)),
    E_tau=float(equilibrium_energy(p_tau, r)),
)
problem = validate_problem(params, boundary)
W_min = solve(problem).W_min
print(f"analytic W_min = {W_min:.8f}")

previous = None
for res in refine(problem, (5, 25, 50, 100), seed=0):
    gap = res.work - W_min
    ratio = "" if previous is None else f"   gap ratio {previous / gap:5.1f}"
    print(f"N = {res.N:3d}   work = {res.work:.8f}   gap = {gap:.2e}{ratio}")
    previous = gap
