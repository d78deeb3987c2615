import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from pshlab.fibration import (VOID, FibrationError, SliceFamily, discrete_laplacian,
                              discrete_laplacian_min, hessian_bound_check, log_kernel_field,
                              monotone_limit_suite, psh_scan, scan_field, slice_domain, t_rect,
                              truncation_error)

HARTOGS = dict(rho="abs2(z) - exp(2*re(t))", bbox=[[-1.5, 1.5]])


def _grid(h_t=0.1, n=5):
    re, im = t_rect(0, h_t, n, n)
    return re, im, re[:, None] + 1j * im[None, :]


def test_slice_domain():
    fam = SliceFamily(**HARTOGS)
    assert slice_domain(fam, 0).weights.sum() == pytest.approx(math.pi, rel=0.03)
    fixed = SliceFamily("abs2(z) - 1")
    a, b = slice_domain(fixed, 0.1), slice_domain(fixed, -0.2j)
    assert np.array_equal(a.weights, b.weights)
    assert slice_domain(SliceFamily("abs2(z) + re(t)"), 1.0) is VOID
    assert not VOID


def test_hartogs_field():
    fam = SliceFamily(**HARTOGS)
    f = log_kernel_field(fam).values
    exact = -math.log(math.pi) - 2 * fam.t_values().real
    assert np.max(np.abs(f - exact)) <= 0.03


def test_shift_weight_field():
    fam = SliceFamily("abs2(z) - 1", "0.7*re(t)")
    f = log_kernel_field(fam).values
    exact = math.log(1 / math.pi) + 0.7 * fam.t_values().real
    assert np.max(np.abs(f - exact)) <= 0.02


def test_all_void():
    with pytest.raises(FibrationError, match="void"):
        log_kernel_field(SliceFamily("abs2(z) + 1"))


def test_synthetic_laplacian():
    re, im, T = _grid()
    mn, _, _ = discrete_laplacian_min(np.abs(T) ** 2, 0.1)
    assert mn == pytest.approx(4, rel=1e-9)
    mn, _, _ = discrete_laplacian_min(-np.abs(T) ** 2, 0.1)
    assert mn == pytest.approx(-4, rel=1e-9)
    assert not scan_field(re, im, -np.abs(T) ** 2, 0.1, 0.1).passed
    assert np.allclose(discrete_laplacian(T.real**2 - T.imag**2, 0.1), 0, atol=1e-9)


def test_neg_inf_cells_skipped():
    re, im, T = _grid()
    f = np.abs(T) ** 2
    f[2, 2] = -np.inf
    mn, _, skipped = discrete_laplacian_min(f, 0.1)
    assert skipped > 0 and mn == pytest.approx(4, rel=1e-9)
    r = scan_field(re, im, f, 0.1, 0.1)
    assert r.neg_inf_cells == 1 and r.passed


def test_too_singular():
    with pytest.raises(FibrationError, match="too singular"):
        discrete_laplacian_min(np.full((3, 3), -np.inf), 0.1)
    with pytest.raises(FibrationError):
        discrete_laplacian(np.zeros((2, 5)), 0.1)


def test_truncation_error():
    re, im, T = _grid()
    assert truncation_error(np.abs(T) ** 2, 0.1) == pytest.approx(0, abs=1e-8)
    assert truncation_error(T.real**4, 0.1) == pytest.approx(0.1**2 / 12 * 24, rel=1e-6)
    with pytest.raises(FibrationError):
        truncation_error(np.zeros((4, 4)), 0.1)


@pytest.mark.parametrize("kw", [
    HARTOGS,
    dict(rho="abs2(z) - 1", phi="abs2(z - t)"),
    dict(rho="abs2(z) - 1", phi="abs2(z)", z_mode="oka", direction=0.3),
])
def test_scans_pass(kw):
    r = psh_scan(SliceFamily(**kw))
    assert r.passed, (r.min_laplacian, r.tol)
    assert r.neg_inf_cells == 0


def test_negative_control_fails():
    # log K_t = const - |t|^2 is superharmonic
    r = psh_scan(SliceFamily("abs2(z) - 1", "-abs2(t)"))
    assert not r.passed
    assert r.min_laplacian == pytest.approx(-4, rel=0.05)


def test_harmonic_shift_invariance():
    base = psh_scan(SliceFamily("abs2(z) - 1", "abs2(z - t)"))
    shifted = psh_scan(SliceFamily("abs2(z) - 1", "abs2(z - t) + 0.8*re(t) - 0.5*im(t)"))
    assert shifted.verdict == base.verdict
    assert abs(shifted.min_laplacian - base.min_laplacian) < 2 * base.tol


def test_radial_reduction():
    fam = SliceFamily("abs2(z) - 1", "abs2(z)*(1 + re(t))", t_re=[0.0, 0.1, 0.2], t_im=[0.0])
    f = log_kernel_field(fam).values[:, 0]
    for k, a in enumerate(fam.t_re):
        mass = quad(lambda r: 2 * math.pi * r * math.exp(-(1 + a) * r * r), 0, 1)[0]
        assert abs(f[k] + math.log(mass)) <= 0.02


@pytest.mark.parametrize("phi", [
    "abs2(z) + abs2(t)",
    "abs2(z - t)",
    "2*abs2(z) + abs2(t) + re(t*z)",
])
def test_hessian_bound(phi):
    r = hessian_bound_check(SliceFamily("abs2(z) - 1", phi, bbox=[[-1.25, 1.25]]), 0.1 + 0.05j, 0.2)
    assert r.passed, (r.margin, r.tol)


def test_hessian_bound_flat_fibre_weight():
    r = hessian_bound_check(SliceFamily("abs2(z) - 1", "abs2(z - t)", bbox=[[-1.25, 1.25]]))
    assert r.rhs == pytest.approx(0, abs=1e-6)


def test_hessian_not_psh():
    with pytest.raises(FibrationError, match="not strictly psh"):
        hessian_bound_check(SliceFamily("abs2(z) - 1", "abs2(t) - abs2(z)"))


@settings(max_examples=5)
@given(a=st.floats(0.5, 2), b=st.floats(0.5, 2), s=st.floats(0, 0.9), ang=st.floats(0, 6.28))
def test_hessian_bound_random(a, b, s, ang):
    c = s * math.sqrt(a * b)
    cr, ci = c * math.cos(ang), c * math.sin(ang)
    phi = (f"{a!r}*abs2(z) + {b!r}*abs2(t) + 2*({cr!r}*(re(t)*re(z) + im(t)*im(z))"
           f" - {ci!r}*(im(t)*re(z) - re(t)*im(z)))")
    r = hessian_bound_check(SliceFamily("abs2(z) - 1", phi, bbox=[[-1.25, 1.25]]), 0.05j, 0.1)
    assert r.passed, (r.margin, r.tol)


@pytest.mark.parametrize("scenario", ["cutoff-weights", "increasing-domains", "decreasing-weights"])
def test_monotone_limits(scenario):
    r = monotone_limit_suite(scenario)
    assert r.monotone and r.converged, (r.values, r.rel_gap)


def test_monotone_unknown():
    with pytest.raises(FibrationError, match="unknown scenario"):
        monotone_limit_suite("sideways")


def test_bad_mode():
    with pytest.raises(ValueError):
        SliceFamily("abs2(z) - 1", z_mode="drift")
