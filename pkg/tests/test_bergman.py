import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pshlab.bergman import (LOG_FLOOR, BergmanError, BergmanProblem, NotRadialError,
                            extremal_oracle, gram_matrix, kernel_column, kernel_diag,
                            kernel_diag_radial, kernel_offdiag, multi_indices)
from pshlab.quadrature import ball_domain, build_domain


@pytest.fixture(scope="module")
def disk():
    return build_domain("abs2(z) - 1", [[-1.125, 1.125]], 1 / 64, "complex-1")


@pytest.fixture(scope="module")
def flat(disk):
    return BergmanProblem(disk, None, 8)


def test_basis_order_and_size():
    assert multi_indices(1, 3) == [(0,), (1,), (2,), (3,)]
    two = multi_indices(2, 2)
    assert two[:3] == [(0, 0), (1, 0), (0, 1)]
    assert len(multi_indices(2, 4)) == math.comb(6, 2)


def test_gram_diagonal(disk):
    g = gram_matrix(BergmanProblem(disk, None, 2))
    np.testing.assert_allclose(np.diag(g.matrix).real, [math.pi, math.pi / 2, math.pi / 3], rtol=0.02)
    assert np.allclose(g.matrix, g.matrix.conj().T, atol=1e-12)
    assert g.min_eig > 0


def test_gram_unit_mass(disk):
    g = gram_matrix(BergmanProblem(disk, None, 0, normalization="unit-total-mass"))
    assert g.matrix[0, 0].real == pytest.approx(1, rel=1e-12)
    g = gram_matrix(BergmanProblem(disk, "0.5*log(abs2(z))", 0, normalization="unit-total-mass"))
    assert g.matrix[0, 0].real == pytest.approx(2, rel=0.02)


def test_disk_kernel(flat):
    assert kernel_diag(flat, 0j).value == pytest.approx(1 / math.pi, rel=0.02)
    assert kernel_diag(flat, 0.5).value == pytest.approx(1 / (math.pi * 0.75**2), rel=0.03)


def test_weight_shift(disk):
    k = kernel_diag(BergmanProblem(disk, "abs2(z)", 6), 0.2j).value
    kc = kernel_diag(BergmanProblem(disk, "abs2(z) + 1.5", 6), 0.2j).value
    assert kc == pytest.approx(k * math.exp(1.5), rel=1e-10)


def test_offdiag(flat):
    z = 0.3 - 0.1j
    assert kernel_offdiag(flat, z, z).real == pytest.approx(kernel_diag(flat, z).value, rel=1e-12)
    w = -0.2 + 0.4j
    assert kernel_offdiag(flat, w, z) == pytest.approx(np.conj(kernel_offdiag(flat, z, w)), abs=1e-12)
    for zeta in (0.5, 0.3j, -0.6 + 0.2j):
        assert abs(kernel_offdiag(flat, zeta, 0j)) == pytest.approx(1 / math.pi, rel=0.03)


def test_reproducing(flat, disk):
    z0 = 0.3
    col = kernel_column(flat, z0)
    zeta = disk.coords()
    for h in (lambda w: w, lambda w: w**2 - 0.5 * w + 1, lambda w: 1j * w**3):
        val = np.sum(disk.weights * h(zeta) * np.conj(col))
        assert abs(val - h(z0)) <= 0.02 * max(abs(h(z0)), 1e-2)


def test_radial(disk):
    assert kernel_diag_radial(BergmanProblem(disk, None, 4)) == pytest.approx(1 / math.pi, rel=0.02)
    p = BergmanProblem(disk, "0.7", 0, normalization="unit-total-mass")
    assert kernel_diag_radial(p) == pytest.approx(math.exp(0.7), rel=1e-10)
    half = build_domain("abs2(z) - 0.25", [[-0.625, 0.625]], 1 / 128, "complex-1")
    assert kernel_diag_radial(BergmanProblem(half, None, 4)) == pytest.approx(4 / math.pi, rel=0.02)


def test_not_radial(disk):
    with pytest.raises(NotRadialError, match="not radial"):
        kernel_diag_radial(BergmanProblem(disk, "re(z)", 4))
    off = build_domain("abs2(z - 0.2) - 0.5", [[-1, 1]], 1 / 32, "complex-1")
    with pytest.raises(NotRadialError, match="not radial"):
        kernel_diag_radial(BergmanProblem(off, None, 4))


def test_radial_consistency(disk):
    p = BergmanProblem(disk, "abs2(z)^2 + 0.5*abs2(z)", 8)
    assert kernel_diag(p, 0j).value == pytest.approx(kernel_diag_radial(p), rel=0.02)


def test_extremal_oracle(flat, disk):
    for z in (0j, 0.4 + 0.1j):
        assert extremal_oracle(flat, z) == pytest.approx(kernel_diag(flat, z).value, rel=1e-8)
    p = BergmanProblem(disk, "0.3*abs2(z)^2", 6)
    assert extremal_oracle(p, 0.2) == pytest.approx(kernel_diag(p, 0.2).value, rel=1e-8)
    p0 = BergmanProblem(disk, None, 0)
    assert extremal_oracle(p0, 0.3) == pytest.approx(1 / gram_matrix(p0).matrix[0, 0].real, rel=1e-10)


def test_degree_monotone(disk):
    vals = [kernel_diag(BergmanProblem(disk, "abs2(z)", n), 0.4).value for n in range(7)]
    assert all(b >= a - 1e-10 for a, b in zip(vals, vals[1:]))


def test_domain_monotone():
    vals = []
    for r in (0.5, 0.75, 1.0):
        dom = build_domain(f"abs2(z) - {r * r}", [[-1.125 * r, 1.125 * r]], r / 64, "complex-1")
        vals.append(kernel_diag(BergmanProblem(dom, None, 6), 0j).value)
    assert vals[0] > vals[1] > vals[2]


def test_c2_ball():
    dom = ball_domain((0, 0), 1.0, 1 / 8, "complex-2")
    p = BergmanProblem(dom, None, 2)
    assert kernel_diag(p, np.zeros(2)).value == pytest.approx(2 / math.pi**2, rel=0.05)


def test_divisor_zero(disk):
    p = BergmanProblem(disk, "log(abs2(z))", 6)
    assert p.divisor is not None and p.divisor.order >= 1
    ev = kernel_diag(p, 0j)
    assert ev.value == 0 and ev.singular and ev.log_value == -math.inf
    assert kernel_diag(p, 0.5).value > 0


def test_log_floor(disk):
    ev = kernel_diag(BergmanProblem(disk, "-60", 0), 0j)
    assert math.log(ev.value) < LOG_FLOOR and ev.log_value == -math.inf


def test_errors(disk):
    real = build_domain("x^2 - 1", [[-1.5, 1.5]], 1 / 16, "real-1", names=["x"])
    with pytest.raises(BergmanError, match="complex"):
        BergmanProblem(real)
    with pytest.raises(ValueError):
        BergmanProblem(disk, None, -1)
    with pytest.raises(ValueError):
        BergmanProblem(disk, None, 2, normalization="bogus")
    with pytest.raises(BergmanError, match="basis size"):
        extremal_oracle(BergmanProblem(ball_domain((0, 0), 1.0, 1 / 4, "complex-2"), None, 12), np.zeros(2))


@settings(max_examples=15)
@given(c=st.floats(-5, 5), x=st.floats(-0.5, 0.5), y=st.floats(-0.5, 0.5))
def test_shift_property(c, x, y):
    dom = build_domain("abs2(z) - 1", [[-1.125, 1.125]], 1 / 32, "complex-1")
    k = kernel_diag(BergmanProblem(dom, "abs2(z)", 4), complex(x, y)).value
    kc = kernel_diag(BergmanProblem(dom, f"abs2(z) + {float(c)!r}", 4), complex(x, y)).value
    assert kc == pytest.approx(k * math.exp(c), rel=1e-10)
