import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pshlab.quadrature import (EmptyDomainError, SingularSampleError, SphereRule,
                               TruncatedDomainError, ball_domain, build_domain,
                               divergence_probe, integrate, sphere_average, sphere_max)


@pytest.fixture(scope="module")
def disk():
    return build_domain("abs2(z) - 1", [[-1.125, 1.125]], 1 / 64, "complex-1")


def test_disk_area(disk):
    assert disk.weights.sum() == pytest.approx(math.pi, rel=0.03)
    assert integrate(lambda z: np.ones(z.shape), disk) == pytest.approx(math.pi, rel=1e-3)


def test_half_interval():
    dom = build_domain("re(x)", [[-1, 1]], 1 / 64, "real-1", clip=True)
    assert dom.weights.sum() == pytest.approx(1, rel=0.02)


def test_c2_ball_volume():
    dom = build_domain("abs2(z1) + abs2(z2) - 1", [[-1.125, 1.125]], 1 / 8, "complex-2")
    assert dom.weights.sum() == pytest.approx(math.pi**2 / 2, rel=0.05)


def test_interior_nodes_satisfy_rho():
    dom = build_domain("abs2(z - 0.2) - 0.5", [[-1, 1]], 1 / 32, "complex-1")
    full = dom.weights >= dom.h**2 * (1 - 1e-12)
    assert np.all(dom.rho_values(dom.points[full]) < 0)


def test_gaussian_on_disk_of_radius_three():
    dom = ball_domain(0j, 3.0, 1 / 32, "complex-1")
    v = integrate(lambda z: np.exp(-np.abs(z) ** 2), dom)
    assert v == pytest.approx(math.pi * (1 - math.exp(-9)), rel=0.01)


def test_inverse_modulus_is_integrable():
    dom = ball_domain(0j, 1.0, 1 / 64, "complex-1")
    v = integrate(lambda z: 1 / np.abs(z), dom, guard=False)
    assert v == pytest.approx(2 * math.pi, rel=0.03)


def test_nonintegrable_sample_raises(disk):
    with pytest.raises(SingularSampleError):
        integrate(lambda z: np.full(z.shape, np.inf), disk)


def test_empty_and_truncated_domains():
    with pytest.raises(EmptyDomainError):
        build_domain("abs2(z) + 1", [[-1, 1]], 1 / 16, "complex-1")
    with pytest.raises(TruncatedDomainError):
        build_domain("abs2(z) - 4", [[-1, 1]], 1 / 16, "complex-1")


def test_probe_classifies_disk_singularities():
    dom = ball_domain(0j, 1.0, 1 / 16, "complex-1")
    hs = [1 / 16, 1 / 32, 1 / 64]
    r = divergence_probe(lambda z: 1 / np.abs(z), dom, hs)
    assert r.converged and r.value == pytest.approx(2 * math.pi, rel=0.03)
    r = divergence_probe(lambda z: 1 / np.abs(z) ** 2, dom, hs)
    assert r.status == "diverging" and r.rate == pytest.approx(0, abs=0.1)
    r = divergence_probe(lambda z: np.ones(z.shape), dom, hs)
    assert r.converged and r.value == pytest.approx(math.pi, rel=0.01)


def test_probe_needs_three_levels(disk):
    with pytest.raises(ValueError):
        divergence_probe(lambda z: z.real, disk, [1 / 16, 1 / 32])


@pytest.mark.parametrize("rho,half", [("abs2(z) - 1", 1.125), ("abs2(z-0.1) - 0.6", 1.0)])
def test_refinement_differences_shrink(rho, half):
    vals = []
    for h in (1 / 16, 1 / 32, 1 / 64, 1 / 128):
        dom = build_domain(rho, [[-half, half]], h, "complex-1")
        vals.append(integrate(lambda z: np.exp(-np.abs(z) ** 2), dom))
    diffs = np.abs(np.diff(vals))
    assert np.all(diffs[:-1] / diffs[1:] >= 1.5)


def test_sphere_examples():
    for eps in (0.1, 1.0, 2.0):
        rule = SphereRule(0j, eps, 16)
        assert sphere_average(lambda w: w.real, rule) == pytest.approx(0, abs=1e-12)
        assert sphere_average(lambda w: np.log(np.abs(w)), rule) == pytest.approx(math.log(eps), abs=1e-12)
    assert sphere_average(lambda w: np.abs(w) ** 2, SphereRule(0j, 2.0, 16)) == pytest.approx(4)


def test_sphere_rule_rejects_coarse_m():
    with pytest.raises(ValueError):
        SphereRule(0j, 1.0, 4)


def test_sphere_minus_inf_propagates():
    rule = SphereRule(0j, 1.0, 8)
    f = lambda w: np.where(np.isclose(w, 1), -np.inf, 0.0)  # noqa: E731
    assert sphere_average(f, rule) == -np.inf
    assert sphere_max(f, rule) == 0


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 0.5), st.integers(2, 5))
def test_harmonic_mean_value(cx, cy, eps, k):
    c = complex(cx, cy)
    rule = SphereRule(c, eps, 16)
    assert sphere_average(lambda w: (w ** k).real, rule) == pytest.approx((c ** k).real, abs=1e-9)


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_linearity(a, b):
    dom = build_domain("abs2(z) - 1", [[-1.125, 1.125]], 1 / 16, "complex-1")
    f = lambda z: np.exp(-np.abs(z) ** 2)  # noqa: E731
    g = lambda z: z.real ** 2  # noqa: E731
    lhs = integrate(lambda z: a * f(z) + b * g(z), dom)
    assert lhs == pytest.approx(a * integrate(f, dom) + b * integrate(g, dom), abs=1e-12)


@given(st.floats(0, 3))
def test_monotonicity(c):
    dom = build_domain("abs2(z) - 1", [[-1.125, 1.125]], 1 / 16, "complex-1")
    f = lambda z: np.abs(z) ** 2  # noqa: E731
    assert integrate(f, dom) <= integrate(lambda z: f(z) + c, dom)
