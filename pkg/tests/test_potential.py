import math

import numpy as np
import pytest

from pshlab.potential import (NEWTON, EnergyFamily, GreenProblem, Mass, PotentialError,
                              RobinProblem, SupportError, UnsupportedFamilyError,
                              condition_C_check, energy, energy_scan, green_potential,
                              harmonic_center, robin_convexity_scan, robin_function)
from pshlab.quadrature import ball_domain, build_domain

XY = ["x", "y"]
XYZ = ["x", "y", "z"]


def _disk(R=1.0, h=1 / 64):
    return ball_domain((0, 0), R, h, "real-2", names=XY)


def _ball(R=1.0, h=1 / 16):
    return ball_domain((0, 0, 0), R, h, "real-3", names=XYZ)


@pytest.fixture(scope="module")
def disk_green():
    gp = GreenProblem(_disk(), Mass("point", (0, 0)))
    return gp, green_potential(gp)


@pytest.fixture(scope="module")
def unit_ball():
    return RobinProblem(_ball())


def test_disk_green(disk_green):
    gp, sol = disk_green
    rs = np.linspace(0.3, 0.9, 7)
    pts = np.array([(r * math.cos(a), r * math.sin(a)) for r in rs for a in (0.3, 2.0, 4.1)])
    ex = np.log(np.linalg.norm(pts, axis=1)) / (2 * math.pi)
    assert np.max(np.abs(sol.at(pts) - ex) / np.abs(ex)) <= 0.03
    assert sol.residual <= 1e-8


def test_maximum_principle(disk_green):
    gp, sol = disk_green
    assert np.all(sol.values <= 1e-12)
    assert np.all(sol.values[gp.lattice.inside] < 0)


def test_ball_green():
    dom = _ball(h=1 / 32)
    sol = green_potential(GreenProblem(dom, Mass("point", (0, 0, 0))))
    pts = np.array([(r, 0, 0) for r in np.linspace(0.3, 0.9, 7)] + [(0, 0.5, 0.2)])
    r = np.linalg.norm(pts, axis=1)
    ex = -NEWTON * (1 / r - 1)
    assert np.max(np.abs(sol.at(pts) - ex) / np.abs(ex)) <= 0.05


def test_zero_mass():
    gp = GreenProblem(_disk(h=1 / 32), Mass("zero"))
    assert np.all(green_potential(gp).values == 0)
    assert energy(gp) == 0
    assert gp.total_mass == 0


def test_ring_energy():
    rho0 = 0.5
    u = energy(GreenProblem(_disk(), Mass("ring", (0, 0), radius=rho0)))
    ex = math.log(rho0) / (2 * math.pi)
    assert u == pytest.approx(ex, rel=0.05)


def test_doubling_radius():
    mu = Mass("ring", (0, 0), radius=0.5)
    u1 = energy(GreenProblem(_disk(1.0), mu))
    u2 = energy(GreenProblem(_disk(2.0), mu))
    # u = log(rho0 / R) / (2 pi), so the energy drops by log 2 / (2 pi)
    assert u1 - u2 == pytest.approx(math.log(2) / (2 * math.pi), rel=0.10)


def test_domain_monotone():
    mu = Mass("point", (0, 0))
    us = [energy(GreenProblem(_disk(R, 1 / 32), mu)) for R in (0.6, 0.8, 1.0, 1.3)]
    assert all(b < a for a, b in zip(us, us[1:]))


def test_support_errors():
    with pytest.raises(SupportError, match="exits"):
        GreenProblem(_disk(h=1 / 32), Mass("point", (0.95, 0)))
    with pytest.raises(PotentialError):
        GreenProblem(_disk(h=1 / 32), Mass("point", (0, 0, 0)))
    with pytest.raises(PotentialError):
        GreenProblem(_disk(h=1 / 32), Mass("comet", (0, 0)))
    with pytest.raises(PotentialError):
        GreenProblem(ball_domain(0j, 1.0, 1 / 16, "complex-1"))


def test_robin_ball(unit_ball):
    assert robin_function(unit_ball, (0, 0, 0)) == pytest.approx(NEWTON, rel=0.02)
    assert robin_function(unit_ball, (0.5, 0, 0)) == pytest.approx(NEWTON / 0.75, rel=0.03)


def test_robin_convergence(unit_ball):
    e16 = abs(robin_function(unit_ball, (0, 0, 0)) / NEWTON - 1)
    e32 = abs(robin_function(RobinProblem(_ball(h=1 / 32)), (0, 0, 0)) / NEWTON - 1)
    assert e16 / e32 >= 1.7


def test_robin_scaling(unit_ball):
    big = RobinProblem(_ball(2.0, 1 / 8))
    assert robin_function(big, (0, 0, 0)) == pytest.approx(NEWTON / 2, rel=0.02)
    assert robin_function(big, (0, 0, 0)) == pytest.approx(robin_function(unit_ball, (0, 0, 0)) / 2, rel=0.03)


def test_robin_near_boundary(unit_ball):
    with pytest.raises(PotentialError, match="4h"):
        robin_function(unit_ball, (0.9, 0, 0))


def test_robin_needs_space():
    with pytest.raises(PotentialError, match="dimension 3"):
        RobinProblem(_disk(h=1 / 16))


def test_robin_convexity_check():
    ann = build_domain("max(x^2 + y^2 + z^2 - 1, 0.25 - x^2 - y^2)", [[-1.25, 1.25]] * 3, 1 / 8,
                       "real-3", names=XYZ)
    with pytest.raises(PotentialError, match="convexity"):
        RobinProblem(ann)


def test_ball_second_difference(unit_ball):
    sc = robin_convexity_scan(unit_ball, [((-0.3, 0, 0), (0.3, 0, 0))], n=7)
    s, vals, d2 = sc.samples[0]
    assert d2[len(d2) // 2] == pytest.approx(1 / (2 * math.pi), rel=0.10)
    assert sc.passed


def test_log_robin_subharmonic(unit_ball):
    sc = robin_convexity_scan(unit_ball, [((-0.5, 0, 0), (0.5, 0, 0)), ((0, -0.4, -0.3), (0, 0.4, 0.3))],
                              log=True)
    assert sc.min_second_difference >= -sc.tol


@pytest.mark.slow
def test_box_scan_and_center():
    rp = RobinProblem(build_domain("max(x^2, y^2, z^2) - 1", [[-1.25, 1.25]] * 3, 1 / 16, "real-3",
                                   names=XYZ))
    sc = robin_convexity_scan(rp, [((-0.6, 0, 0), (0.6, 0, 0)), ((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))])
    assert sc.passed
    c, _ = harmonic_center(rp)
    assert np.linalg.norm(c) <= 2 * rp.h


def test_ball_center(unit_ball):
    c, lam = harmonic_center(unit_ball)
    assert np.linalg.norm(c) <= 2 * unit_ball.h
    assert lam == pytest.approx(NEWTON, rel=0.02)


def test_radius_family_scan():
    mu = Mass("point", (0, 0))
    tg = np.linspace(-0.2, 0.2, 5)
    fam = EnergyFamily(rho="x^2 + y^2 - exp(2*re(t))", t_re=tg, t_im=tg)
    r = energy_scan(fam, mu)
    assert r.passed and abs(r.min_laplacian) <= r.tol
    slope = np.polyfit(tg, r.field[:, 2], 1)[0]
    assert slope == pytest.approx(-1 / (2 * math.pi), rel=0.05)


def test_translate_family_scan():
    tg = np.linspace(-0.2, 0.2, 5)
    r = energy_scan(EnergyFamily(rho="(x - re(t)/4)^2 + y^2 - 1", t_re=tg, t_im=tg), Mass("point", (0, 0)))
    assert r.passed


def test_graph_family_scan():
    r = energy_scan(EnergyFamily(v="x^2 + y^2", mode="real", t_re=np.linspace(0.8, 1.2, 5)),
                    Mass("point", (0, 0)))
    assert r.passed


def test_support_exits_family():
    fam = EnergyFamily(rho="(x - re(t))^2 + y^2 - 0.25", t_re=np.linspace(0, 0.4, 5), t_im=[-0.1, 0, 0.1])
    with pytest.raises(SupportError):
        energy_scan(fam, Mass("point", (0, 0)))


def test_condition_c():
    tr = np.linspace(0.8, 1.2, 5)
    assert condition_C_check(EnergyFamily(v="x^2 + y^2", mode="real", t_re=tr)).passed
    bad = condition_C_check(EnergyFamily(v="-(x^2 + y^2)", mode="real", t_re=-tr[::-1]))
    assert not bad.passed and bad.min_value == pytest.approx(-4, rel=1e-6)
    conv = EnergyFamily(rho="x^2 + y^2 + t^2 - 1", mode="real", t_re=np.linspace(-0.2, 0.2, 5),
                        shape="convex")
    assert condition_C_check(conv).passed


def test_condition_c_unsupported():
    fam = EnergyFamily(rho="x^2 + y^2 - 1 - t", mode="real", t_re=np.linspace(-0.2, 0.2, 5))
    with pytest.raises(UnsupportedFamilyError, match="unsupported family shape"):
        condition_C_check(fam)
    with pytest.raises(UnsupportedFamilyError):
        energy_scan(fam, Mass("point", (0, 0)))


def test_control_rejected():
    fam = EnergyFamily(v="-1/(x^2 + y^2)", mode="real", t_re=np.linspace(-1.2, -0.8, 5))
    with pytest.raises(UnsupportedFamilyError):
        energy_scan(fam, Mass("point", (0, 0)))


def test_family_errors():
    with pytest.raises(ValueError):
        EnergyFamily()
    with pytest.raises(ValueError):
        EnergyFamily(rho="x^2 + y^2 - 1", mode="quaternion")
