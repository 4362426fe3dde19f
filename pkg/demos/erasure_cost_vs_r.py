"""Minimal erasure cost as a function of the degeneracy ratio r.

Durations are multiples of each system's own speed limit, so rows for
different r compare protocols that are equally "hurried".
"""

import math

import numpy as np

from thermoctl.erasure import ErasureSpec, erasure_sweep

spec = ErasureSpec(r_grid=tuple(np.logspace(-2, 2, 9)))
rows = erasure_sweep(spec)
ratios = sorted({row.tau_ratio for row in rows})

print("r".rjust(8) + "".join(f"   tau={d:g}tau_min" for d in ratios))
for r in spec.r_grid:
    cells = [row.W_min for d in ratios for row in rows if row.r == r and row.tau_ratio == d]
    print(f"{r:8.3f}" + "".join(f"{w:17.5f}" for w in cells))

print(f"\nLandauer floor ln 2 = {math.log(2):.5f}; every entry lies above it")
print("and each row decreases as the protocol is allowed more time.")
