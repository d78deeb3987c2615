"""Green energies and Robin functions.

Run with ``python demos/green_robin.py``.
"""

# %%
# Planar Green potential of a smoothed unit mass at the origin of the unit
# disk, against log|z| / (2 pi).
import math

import numpy as np

from pshlab.potential import (NEWTON, EnergyFamily, GreenProblem, Mass, RobinProblem, energy,
                              energy_scan, green_potential, harmonic_center, robin_function)
from pshlab.quadrature import ball_domain

disk = ball_domain((0, 0), 1.0, 1 / 64, "real-2", names=["x", "y"])
sol = green_potential(GreenProblem(disk, Mass("point", (0, 0))))
for r in (0.3, 0.6, 0.9):
    print(f"g({r}) = {sol.at([(r, 0)])[0]:+.5f}   {math.log(r) / (2 * math.pi):+.5f}")

# %%
# Energy of a ring of radius 1/2 is log(1/2) / (2 pi).
print("ring energy", energy(GreenProblem(disk, Mass("ring", (0, 0), radius=0.5))),
      math.log(0.5) / (2 * math.pi))

# %%
# Disks of radius e^{re t}: the energy is -re t / (2 pi) + const, harmonic in t.
tg = np.linspace(-0.2, 0.2, 5)
r = energy_scan(EnergyFamily(rho="x^2 + y^2 - exp(2*re(t))", t_re=tg, t_im=tg), Mass("point", (0, 0)))
print(f"min Laplacian {r.min_laplacian:+.4f}  tol {r.tol:.4f}  {r.verdict}")

# %%
# Robin function of the unit ball in space: Lambda(x) = (1/4pi) / (1 - |x|^2).
rp = RobinProblem(ball_domain((0, 0, 0), 1.0, 1 / 16, "real-3", names=["x", "y", "z"]))
for s in (0.0, 0.25, 0.5):
    print(f"Lambda({s}) = {robin_function(rp, (s, 0, 0)):.5f}   {NEWTON / (1 - s * s):.5f}")
c, lam = harmonic_center(rp)
print("harmonic center", np.round(c, 4), "Lambda", lam)
