import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pshlab.expr import (EvaluationError, ParseError, SingularStencilError, evaluate, gradient_fd, parse,
                         partial_fd, wirtinger_fd)

Z = [("z", "complex")]
TZ = [("t", "complex"), ("z", "complex")]


def test_abs2_of_three_four():
    assert parse("abs2(z)", Z)(z=3 + 4j) == pytest.approx(25)


def test_identity_case():
    e = parse("re(t) + abs2(z - t)", TZ)
    assert e(t=1, z=1) == pytest.approx(1)


def test_log_zero_is_minus_inf():
    assert parse("log(abs2(z))", Z)(z=0) == -np.inf


def test_half_log_modulus():
    assert evaluate(parse("0.5*log(abs2(z))", Z), {"z": math.exp(-3)}) == pytest.approx(-3)


def test_gaussian_value():
    assert evaluate(parse("exp(-abs2(z))", Z), {"z": 1}) == pytest.approx(0.367879, abs=1e-6)


def test_gradient_of_abs2():
    g = gradient_fd(parse("abs2(z)", Z), {"z": 1 + 0j})
    assert np.allclose(np.ravel(g), [2, 0], atol=1e-6)


def test_minus_inf_absorbs():
    e = parse("log(abs2(z)) + 5", Z)
    assert e(z=0) == -np.inf
    assert parse("exp(log(abs2(z)))", Z)(z=0) == 0


def test_power_binds_tighter_than_minus():
    assert parse("-x^2", [("x", "real")])(x=3) == -9


def test_parse_errors_carry_position():
    with pytest.raises(ParseError) as ei:
        parse("abs2(z", Z)
    assert ei.value.position is not None
    with pytest.raises(ParseError):
        parse("w + 1", Z)
    with pytest.raises(ParseError):
        parse("z^0.5", Z)


def test_division_by_zero_is_an_error():
    with pytest.raises(EvaluationError):
        parse("1/abs2(z)", Z)(z=0)


def test_stencil_through_singularity():
    with pytest.raises(SingularStencilError):
        partial_fd(parse("log(abs2(z))", Z), {"z": 0j}, ("z", "re"), ("z", "re"), h=1e-4)


def test_wirtinger_laplacian_of_abs2():
    v = wirtinger_fd(parse("abs2(z)", Z), {"z": 0.3 - 0.2j}, "z", "z")
    assert np.real(v) == pytest.approx(1, abs=1e-6)


def test_expression_is_immutable():
    e = parse("abs2(z)", Z)
    with pytest.raises(AttributeError):
        e.text = "0"


finite = st.floats(-3, 3, allow_nan=False)


@given(finite, finite, finite)
def test_text_round_trip(a, x, y):
    e = parse(f"{a!r}*abs2(z) + re(z)^3 - im(z)/2", Z)
    e2 = parse(e.text, Z)
    z = complex(x, y)
    assert e2(z=z) == pytest.approx(e(z=z), rel=1e-12, abs=1e-12)


@given(finite, finite)
def test_max_min_are_ordered(x, y):
    R = [("x", "real"), ("y", "real")]
    assert parse("max(x, y)", R)(x=x, y=y) >= parse("min(x, y)", R)(x=x, y=y)


@given(st.floats(0.1, 3), st.floats(0, 2 * math.pi))
def test_log_abs2_is_twice_log_modulus(r, th):
    z = r * complex(math.cos(th), math.sin(th))
    assert parse("log(abs2(z))", Z)(z=z) == pytest.approx(2 * math.log(r), abs=1e-12)


def test_vectorised_evaluation():
    z = np.linspace(0, 1, 5) + 0j
    assert np.allclose(parse("abs2(z)", Z)(z=z), np.abs(z) ** 2)
