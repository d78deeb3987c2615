"""Lelong numbers, integrability and the attenuated function phi_eps.

Run with ``python demos/singularities.py``.
"""

# %%
# Sphere means of tau log|z| grow like tau log r, so the slope against log r
# recovers tau.
import math

from pshlab.lelong import PshSample, attenuated, chi, integrability_index, lelong_number

for phi in ("1.0*log(abs2(z))", "0.5*log(abs2(z^2 - z))", "abs2(z)"):
    e = lelong_number(PshSample(phi))
    print(f"{phi:26s} mean slope {e.estimate:.4f}  sup slope {e.sup_estimate:.4f}")

# %%
# e^{-2 phi / t} is integrable near 0 exactly when t exceeds the index.
ix = integrability_index(PshSample("0.35*log(abs2(z))"))
print("index", ix.estimate, "bracket", ix.bracket)

# %%
# phi_eps averages slice kernels over |w| = eps.  For tau log|z| with tau < 1
# it is finite, and equals tau log eps + (1/2) log(1 - tau) at the origin.
for eps in (0.1, 0.2, 0.4):
    v = attenuated("0.25*log(abs2(z))", 0, eps).value
    print(f"eps={eps}: {v:+.4f}   closed form {0.5 * math.log(eps) + 0.5 * math.log(0.5):+.4f}")

# %%
# Once tau reaches 1 every slice is singular and phi_eps(0) = -inf, as is chi.
for tau in (0.5, 0.9, 1.25, 2.0):
    print(tau, attenuated(f"{tau / 2!r}*log(abs2(z))", 0, 0.1).value, chi(f"{tau / 2!r}*log(abs2(z))", 0))
