"""Marginals of convex weights and the minimum principle.

Run with ``python demos/marginals.py``.
"""

# %%
# For phi = x^2 + x y + y^2 the marginal -log int e^{-phi} dy equals
# (3/4) x^2 - (1/2) log pi.
import math

import numpy as np

from pshlab.prekopa import (MarginalProblem, convexity_check, marginal, minimum_principle_limit,
                            prekopa_certificate)

x = np.linspace(-1, 1, 41)
mp = MarginalProblem("x^2 + x*y + y^2", x, [(-8, 8)])
m = marginal(mp)
print("max error", np.max(np.abs(m - (0.75 * x**2 - 0.5 * math.log(math.pi)))))
print("min second difference", convexity_check(m, mp.h_x).min_second_difference)

# %%
# An indefinite quadratic gives a marginal that is not convex.
ctl = convexity_check(marginal(MarginalProblem("x^2 - 3*x*y + y^2", x, [(-8, 8)])), mp.h_x)
print("control:", ctl.verdict, ctl.min_second_difference)

# %%
# L^p marginals with respect to the uniform probability on the y box fall
# toward inf_y phi as p grows.
r = minimum_principle_limit(MarginalProblem("x^2 + (y - 1)^2", x, [(-8, 8)]))
for p, row in zip(r.p_ladder, r.values):
    print(f"p={p:>3}  phi_p(0) = {row[20]:+.4f}")
print("gap at p=256", r.max_gap, "band", r.band)

# %%
# The constructive certificate compares k'' from finite differences with the
# integral formula built from the solved gamma.
c = prekopa_certificate("x0^2 + x1^2 + x0*x1", np.linspace(-0.6, 0.6, 25), np.linspace(-9, 9, 2001))
print("relative error", c.rel_error, " min integrand", c.min_integrand)
