"""Weighted Bergman kernels on the unit disk.

Run with ``python demos/bergman_disk.py``.
"""

# %%
# The unit disk is the sublevel set of |z|^2 - 1.  Cut cells at the boundary
# carry their exact area fraction, so the disk area is close to pi already at
# moderate resolution.
import math

import numpy as np

from pshlab.bergman import BergmanProblem, extremal_oracle, kernel_diag, kernel_diag_radial
from pshlab.quadrature import build_domain

disk = build_domain("abs2(z) - 1", [[-1.125, 1.125]], 1 / 64, "complex-1")
print(f"area {disk.weights.sum():.6f}  (pi = {math.pi:.6f})")

# %%
# Without a weight the kernel is sum (k + 1) |z|^(2k) / pi = 1 / (pi (1 - |z|^2)^2).
p = BergmanProblem(disk, None, 8)
for z in (0, 0.25, 0.5):
    k = kernel_diag(p, z).value
    print(f"K({z}, {z}) = {k:.5f}   closed form {1 / (math.pi * (1 - z * z) ** 2):.5f}")

# %%
# The polynomial truncation only lowers K.  Degree 8 is enough near the
# centre but the gap grows toward the boundary.
for n in (2, 4, 8, 12):
    print(n, kernel_diag(BergmanProblem(disk, None, n), 0.7).value)

# %%
# A radial weight with a log pole: phi = 0.35 log|z|^2.  The kernel at the
# origin is the inverse of the total mass of e^-phi, which the radial shortcut
# computes directly.
p = BergmanProblem(disk, "0.35*log(abs2(z))", 8)
print("kernel_diag ", kernel_diag(p, 0).value)
print("radial      ", kernel_diag_radial(p))
print("closed form ", (1 - 0.35) / math.pi)

# %%
# The extremal problem sup |h(0.3)|^2 over unit-norm polynomials gives the
# same number through a different factorisation.
p = BergmanProblem(disk, "abs2(z)", 8)
print(kernel_diag(p, 0.3).value, extremal_oracle(p, 0.3))
print("log-kernel values are finite:", np.isfinite(kernel_diag(p, 0.3).log_value))
