"""Plurisubharmonic variation of log K_t(z, z) over a parameter grid.

Run with ``python demos/variation_scans.py``.
"""

# %%
# Hartogs family: the fibre over t is the disk of radius e^{re t}.  Then
# K_t(0, 0) = e^{-2 re t} / pi, a harmonic function of t, so the discrete
# Laplacian of the field should vanish up to the reported tolerance.
import math

import numpy as np

from pshlab.fibration import SliceFamily, hessian_bound_check, monotone_limit_suite, psh_scan

fam = SliceFamily("abs2(z) - exp(2*re(t))", "0", bbox=[[-1.5, 1.5]])
r = psh_scan(fam)
exact = -math.log(math.pi) - 2 * fam.t_values().real
print("max field error", np.max(np.abs(r.field - exact)))
print(f"min Laplacian {r.min_laplacian:+.4f}  tol {r.tol:.4f}  -> {r.verdict}")

# %%
# A weight that moves with t.  |z - t|^2 is jointly plurisubharmonic, so the
# scan passes.  Flipping the sign of a t-term breaks it.
for phi in ("abs2(z - t)", "-abs2(t)"):
    r = psh_scan(SliceFamily("abs2(z) - 1", phi))
    print(f"{phi:12s} min Laplacian {r.min_laplacian:+.3f}  tol {r.tol:.3f}  {r.verdict}")

# %%
# The second derivative of K_t itself is bounded below by an integral of the
# weight's Hessian determinant.  The margin is lhs - rhs.
for phi in ("abs2(z) + abs2(t)", "2*abs2(z) + abs2(t) + re(t*z)"):
    h = hessian_bound_check(SliceFamily("abs2(z) - 1", phi, bbox=[[-1.25, 1.25]]), 0.1 + 0.05j, 0.2)
    print(f"{phi:32s} lhs {h.lhs:.4f}  rhs {h.rhs:.4f}  margin {h.margin:+.4f}")

# %%
# Monotone limits: cutting off the weight outside the half disk pushes
# K(0, 0) up toward 4 / pi.
m = monotone_limit_suite("cutoff-weights")
for j, v in zip(m.ladder, m.values):
    print(f"j={j:>8}  K_j(0,0) = {v:.5f}")
print("limit", m.limit)
