import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pshlab.prekopa import (MarginalProblem, PrekopaError, convexity_check,
                            hessian_identity_residual, marginal, minimum_principle_limit,
                            p_marginal, prekopa_certificate)

X = np.linspace(-1, 1, 41)
HX = X[1] - X[0]


def test_gaussian_marginal():
    m = marginal(MarginalProblem("x^2 + x*y + y^2", X, [(-8, 8)]))
    assert np.max(np.abs(m - (0.75 * X**2 - 0.5 * math.log(math.pi)))) <= 1e-4
    c = convexity_check(m, HX)
    assert c.passed and c.min_second_difference == pytest.approx(1.5, rel=0.05)


def test_decoupled_marginal():
    m = marginal(MarginalProblem("x^2 + y^2", X, [(-8, 8)]))
    assert np.max(np.abs(m - (X**2 - 0.5 * math.log(math.pi)))) <= 1e-4


def test_y_free_marginal():
    m = marginal(MarginalProblem("exp(x)", X, [(-1, 2)]))
    np.testing.assert_allclose(m, np.exp(X) - math.log(3), atol=1e-10)


def test_two_y_variables():
    m = marginal(MarginalProblem("x^2 + y1^2 + y2^2", X, [(-7, 7), (-7, 7)], h_y=1 / 16))
    assert np.max(np.abs(m - (X**2 - math.log(math.pi)))) <= 1e-4


def test_convexity_synthetic():
    assert convexity_check(X**4, HX).min_second_difference == pytest.approx(0, abs=2 * HX**2)
    assert convexity_check(X**4, HX).passed
    r = convexity_check(-X**2, HX)
    assert not r.passed and r.min_second_difference == pytest.approx(-2)
    with pytest.raises(PrekopaError):
        convexity_check([1.0, np.inf, 2.0, np.inf], HX)


def test_indefinite_control_fails():
    m = marginal(MarginalProblem("x^2 - 3*x*y + y^2", X, [(-8, 8)]))
    assert not convexity_check(m, HX).passed


@settings(max_examples=10)
@given(a=st.floats(0.3, 3), b=st.floats(0.3, 3), s=st.floats(-0.95, 0.95), d=st.floats(-1, 1))
def test_convex_quadratics_pass(a, b, s, d):
    c = 2 * s * math.sqrt(a * b)
    m = marginal(MarginalProblem(f"{a!r}*x^2 + {c!r}*x*y + {b!r}*y^2 + {d!r}*y", X, [(-10, 10)], h_y=1 / 32))
    assert convexity_check(m, HX).passed


@pytest.mark.parametrize("phi", ["x^4 + y^4", "0.5*log(exp(2*(x + y)) + exp(-2*(x + y)) + exp(2*(x - y)) + exp(2*(y - x)))"])
def test_other_convex_weights(phi):
    m = marginal(MarginalProblem(phi, X, [(-6, 6)], h_y=1 / 128))
    assert convexity_check(m, HX).passed


@pytest.mark.parametrize("phi,argmin", [("x^2 + y^2", 0.0), ("x^2 + (y - 1)^2", 1.0)])
def test_minimum_principle(phi, argmin):
    mp = MarginalProblem(phi, X, [(-8, 8)])
    r = minimum_principle_limit(mp)
    assert r.monotone and r.passed
    assert np.all(np.abs(r.values[-1] - X**2) <= 0.05)


def test_p_marginal_y_free():
    mp = MarginalProblem("x^2", X, [(0, 4)])
    for p in (1, 4, 64):
        np.testing.assert_allclose(p_marginal(mp, p), X**2, atol=1e-12)
        np.testing.assert_allclose(p_marginal(mp, p, normalized=False), X**2 - math.log(4) / p, atol=1e-12)


def test_p_marginal_errors():
    mp = MarginalProblem("x^2 + y^2", X, [(-8, 8)])
    with pytest.raises(PrekopaError):
        p_marginal(mp, 0.5)
    with pytest.raises(PrekopaError):
        minimum_principle_limit(mp, (1, 4, 2))


def test_identity_examples():
    r = hessian_identity_residual("0", ["x0", "x1"], (0.2, -0.1), 1e-3)
    assert r.lhs == pytest.approx(6, rel=1e-6) and r.residual < 10 * 1e-6
    r = hessian_identity_residual("x0^2", ["0", "0"], (0.3, 0.4))
    assert r.lhs == 0 and r.rhs == 0


def test_identity_order():
    phi = "0.7*x0^2 - 0.2*x0*x1 + 1.1*x1^2 + exp(0.3*x0)"
    gam = ["0.5*x0 + x1 + x0*x1", "x1 - 0.3 + x0^2"]
    rs = [hessian_identity_residual(phi, gam, (0.1, -0.2), h).residual for h in (1e-2, 5e-3, 2.5e-3)]
    assert rs[0] / rs[1] >= 3 and rs[1] / rs[2] >= 3


def test_identity_arity():
    with pytest.raises(PrekopaError):
        hessian_identity_residual("x0^2", ["x0"], (0.1, 0.2), names=["x0", "x1"])


@pytest.mark.parametrize("phi", ["x0^2 + x1^2", "x0^2 + x1^2 + x0*x1", "x0^4 + x1^2 + 0.5*x0"])
def test_certificate(phi):
    c = prekopa_certificate(phi, np.linspace(-0.6, 0.6, 25), np.linspace(-9, 9, 2001))
    assert c.passed, (c.rel_error, c.min_integrand)


def test_certificate_gaussian_k():
    t = np.linspace(-0.6, 0.6, 25)
    c = prekopa_certificate("x0^2 + x1^2", t, np.linspace(-9, 9, 2001))
    np.testing.assert_allclose(c.k, np.exp(t**2) / math.sqrt(math.pi), rtol=1e-8)


def test_certificate_needs_decay():
    with pytest.raises(PrekopaError, match="not admissible"):
        prekopa_certificate("x0^2 + 0.01*x1^2", np.linspace(-0.5, 0.5, 11), np.linspace(-3, 3, 301))
