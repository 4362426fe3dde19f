"""Optimal erasure of one bit in a symmetric dot (r = 1), tau = 5 tau_min.

Prints the protocol's landmarks: the opening quench, the bulk ramp, the
overshoot before the final quench, and the cost compared with ln 2.
"""

import math

import numpy as np

from thermoctl.control import solve
from thermoctl.dynamics import delta_F_neq, simulate, work_of
from thermoctl.erasure import erasure_problem, shape_report

problem = erasure_problem(1.0)
b = problem.boundary
sol = solve(problem)
tr = sol.trajectory

print(f"tau_min = {problem.tau_min:.4f}, tau = {b.tau:.4f}, kappa_tau = {sol.kappa_tau:.4e}")
print(f"quench at t=0:   {sol.quench_in[0]:+.4f} -> {sol.quench_in[1]:+.4f}")
print(f"quench at t=tau: {sol.quench_out[0]:+.4f} -> {sol.quench_out[1]:+.4f}  (overshoot)")

print("\n     t         p          E")
for k in np.linspace(0, len(tr) - 1, 9).astype(int):
    print(f"{tr.t[k]:8.3f}  {tr.p[k]:.3e}  {tr.E[k]:8.4f}")

# replay the protocol through the master equation
sim = simulate(sol.protocol, b.p0, problem.params)
print(f"\nW_min            = {sol.W_min:.8f}")
print(f"simulated work   = {work_of(sol.protocol, sim):.8f}")
print(f"Delta F_neq      = {delta_F_neq(b, problem.params):.8f}   (ln 2 = {math.log(2):.8f})")
print("shape checks:", shape_report(sol.protocol, tr, b.E_tau))
