"""Leading-order (Lambert W) solutions for r << 1 against the full solver.

Heating converges at first order in r. For cooling at a fixed multiple of
the speed limit the leading-order conserved value does not approach the
exact one, so the trajectory error stays put as r shrinks.
"""

import numpy as np

from thermoctl.asymptotics import solve_asymptotic
from thermoctl.control import solve
from thermoctl.core import Boundary, SystemParams, validate_problem
from thermoctl.speed_limit import tau_min

for label, p0, p_tau in [("heating", 0.1, 0.6), ("cooling", 0.5, 1e-5)]:
    print(label)
    for r in (1e-3, 1e-4, 1e-5):
        params = SystemParams.from_ratio(r)
        tau = 5 * tau_min(p0, p_tau, params)
        full = solve(validate_problem(params, Boundary(p0=p0, p_tau=p_tau, tau=tau)))
        approx = solve_asymptotic(p0, p_tau, tau, r)
        err = np.max(np.abs(full.trajectory.p - approx.trajectory.p))
        print(f"  r = {r:.0e}  kappa exact {full.kappa_tau:.4e}  leading order {approx.kappa_tau:.4e}  max |dp| {err:.2e}")

# the cooling cost still grows like ln(1/r)
print("\ncooling work at zero boundary energies")
for r in (1e-3, 1e-4, 1e-5):
    params = SystemParams.from_ratio(r)
    b = Boundary(p0=0.5, p_tau=1e-5, tau=5 * tau_min(0.5, 1e-5, params), E0=0.0, E_tau=0.0)
    print(f"  r = {r:.0e}  W_min = {solve(validate_problem(params, b)).W_min:.5f}")
