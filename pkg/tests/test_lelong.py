import math

import numpy as np
import pytest

from pshlab.lelong import (LelongError, PshSample, attenuated, attenuation_lelong_drop,
                           attenuation_z_scan, chi, integrability_index, lelong_number,
                           slice_kernel)


@pytest.mark.parametrize("phi,want,tol", [
    ("1.0*log(abs2(z))", 2.0, 0.02),
    ("0.5*log(abs2(z^2 - z))", 1.0, 0.05),
    ("abs2(z)", 0.0, 0.02),
])
def test_lelong_examples(phi, want, tol):
    e = lelong_number(PshSample(phi))
    assert abs(e.estimate - want) <= tol
    assert e.agree


def test_lelong_offcentre():
    e = lelong_number(PshSample("0.75*log(abs2(z - 0.3))", a=0.3))
    assert abs(e.estimate - 1.5) <= 0.02


def test_lelong_c2():
    e = lelong_number(PshSample("0.5*log(abs2(z1) + abs2(z2))", n=2, a=[0, 0]))
    assert abs(e.estimate - 1.0) <= 0.02


def test_sample_errors():
    with pytest.raises(LelongError):
        PshSample("abs2(z)", n=3)
    with pytest.raises(LelongError):
        PshSample("abs2(z)", K=3)


def test_index_c1():
    ix = integrability_index(PshSample("0.35*log(abs2(z))"))
    assert abs(ix.estimate - 0.7) <= 0.05
    assert ix.bracket[0] <= ix.estimate <= ix.bracket[1]


def test_index_smooth():
    ix = integrability_index(PshSample("abs2(z)"))
    assert ix.estimate <= 0.05 and ix.bracket[0] == 0


@pytest.mark.slow
def test_index_c2():
    ix = integrability_index(PshSample("0.6*log(abs2(z1) + abs2(z2))", n=2, a=[0, 0]))
    assert abs(ix.estimate - 0.6) <= 0.05


def test_skoda_sandwich():
    s = PshSample("0.35*log(abs2(z))")
    ix, gm = integrability_index(s), lelong_number(s).estimate
    lo, hi = ix.bracket
    assert lo - ix.width <= gm + 0.02 and gm - 0.02 <= hi + ix.width


def test_slice_kernel():
    assert slice_kernel("0.3", 0.2, 0.1) == pytest.approx(math.exp(0.6), rel=1e-8)
    w = 0.2
    assert slice_kernel("0.25*log(abs2(z))", 0j, w) == pytest.approx(abs(w) * 0.5, rel=0.03)
    assert slice_kernel("0.625*log(abs2(z))", 0j, w) == 0.0


def test_attenuated_oracle():
    for eps in (0.1, 0.2):
        v = attenuated("0.25*log(abs2(z))", 0j, eps).value
        assert abs(v - (0.5 * math.log(eps) + 0.5 * math.log(0.5))) <= 5e-3
    a = attenuated("0.625*log(abs2(z))", 0j, 0.1)
    assert a.value == -math.inf and a.singular_nodes == a.nodes
    with pytest.raises(LelongError):
        attenuated("abs2(z)", 0j, 0.1, m=8)


def test_attenuated_smooth_ladder():
    z = 0.3 + 0.1j
    phi_z = abs(z) ** 2
    vals = [attenuated("abs2(z)", z, e).value for e in (0.1, 0.2, 0.4)]
    assert vals[0] <= vals[1] <= vals[2]
    # the Hessian of |z|^2 is the identity
    for e, v in zip((0.1, 0.2, 0.4), vals):
        assert phi_z - 1e-6 <= v <= phi_z + 2 * e**2


@pytest.mark.parametrize("tau", [0.25, 0.5, 0.9, 1.05, 1.25])
def test_singularity_dichotomy(tau):
    v = attenuated(f"{tau / 2!r}*log(abs2(z))", 0j, 0.1).value
    assert (v > -math.inf) == (tau < 1)


@pytest.mark.slow
def test_lelong_drop():
    d = attenuation_lelong_drop("log(abs2(z))", 0j, 0.2, tau=2.0)
    assert d.passed and d.estimate.estimate >= 0.9


def test_lelong_drop_finite():
    d = attenuation_lelong_drop("0.25*log(abs2(z))", 0j, 0.2, tau=0.5)
    assert abs(d.estimate.estimate) <= 0.05


@pytest.mark.slow
def test_attenuation_z_scan():
    r = attenuation_z_scan("0.25*log(abs2(z))", 0.35, 0.05, 0.1)
    assert r.passed, (r.min_laplacian, r.tol)


def test_chi_ladder():
    assert chi("0.625*log(abs2(z))", 0j) == -math.inf
    assert chi("0.25*log(abs2(z))", 0j) > -math.inf


def test_chi_c2_flat():
    for a in ([0, 0], [0.2, -0.1j]):
        v = chi("0", a, n=2)
        assert np.isfinite(v)
