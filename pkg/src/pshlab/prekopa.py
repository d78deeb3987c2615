"""Real-variable companion: marginals of log-concave densities.

For ``phi(x, y)`` convex, the marginal ``-log int e^{-phi(x, y)} dy`` is convex
in ``x``.  This module computes marginals and ``L^p`` marginals on grids,
checks second differences, evaluates both sides of the second-derivative
expansion of ``gamma_j gamma_k e^{-phi}``, and builds the one-variable
convexity certificate from a solution of ``sum_j d_j^phi gamma_j = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.special import logsumexp

from .expr import REAL, Expression, parse, partial_fd
from .quadrature import DimKind, build_domain

__all__ = [
    "PrekopaError",
    "MarginalProblem",
    "ConvexityResult",
    "marginal",
    "convexity_check",
    "p_marginal",
    "MinimumPrincipleReport",
    "minimum_principle_limit",
    "IdentityResidual",
    "hessian_identity_residual",
    "Certificate",
    "prekopa_certificate",
]


class PrekopaError(Exception):
    pass


@dataclass
class MarginalProblem:
    """``phi(x, y)`` with ``x`` on a grid and ``y`` integrated over ``y_box``.

    ``y_box`` is ``[(lo, hi)]`` for one ``y`` variable (named ``y``) or two
    intervals for two (``y1``, ``y2``).
    """

    phi: object
    x_grid: np.ndarray
    y_box: Sequence
    h_y: float = 1 / 64
    x_name: str = "x"

    def __post_init__(self):
        self.y_box = np.asarray(self.y_box, dtype=float).reshape(-1, 2)
        self.m = self.y_box.shape[0]
        if self.m not in (1, 2):
            raise PrekopaError("y must have one or two components")
        self.y_names = ("y",) if self.m == 1 else ("y1", "y2")
        if not isinstance(self.phi, Expression):
            self.phi = parse(self.phi, [(self.x_name, REAL)] + [(n, REAL) for n in self.y_names])
        self.x_grid = np.asarray(self.x_grid, dtype=float)
        lo, hi = self.y_box[:, 0], self.y_box[:, 1]
        terms = [f"max({float(lo[i])!r} - {nm}, {nm} - {float(hi[i])!r})" for i, nm in enumerate(self.y_names)]
        rho = terms[0] if self.m == 1 else f"max({terms[0]}, {terms[1]})"
        self.ydom = build_domain(rho, self.y_box, self.h_y, DimKind(REAL, self.m),
                                 names=self.y_names, clip=True)

    @property
    def h_x(self):
        return float(self.x_grid[1] - self.x_grid[0])

    @property
    def y_volume(self):
        return float(np.prod(self.y_box[:, 1] - self.y_box[:, 0]))

    def phi_values(self, x) -> np.ndarray:
        b = self.ydom.binding()
        b[self.x_name] = np.full(self.ydom.size, float(x))
        return np.broadcast_to(np.asarray(self.phi(**b), dtype=float), (self.ydom.size,))

    def log_integral(self, x, p=1.0, normalized=False) -> float:
        """``log int e^{-p phi(x, .)}`` over ``y_box``, stabilised."""
        v = -p * self.phi_values(x)
        if np.any(np.isnan(v)) or np.any(v == np.inf):
            raise PrekopaError(f"e^-phi not integrable at x={x}")
        lw = np.log(self.ydom.weights)
        if normalized:
            lw = lw - math.log(self.ydom.volume)
        return float(logsumexp(v + lw))


def marginal(mp: MarginalProblem) -> np.ndarray:
    """``-log int e^{-phi(x, y)} dy`` at every grid ``x``; ``+inf`` when it underflows."""
    return np.array([-mp.log_integral(x) for x in mp.x_grid])


@dataclass
class ConvexityResult:
    min_second_difference: float
    argmin: int
    tol: float
    second_differences: np.ndarray

    @property
    def verdict(self):
        return "pass" if self.min_second_difference >= -self.tol else "fail"

    @property
    def passed(self):
        return self.verdict == "pass"


def convexity_check(values, h_x, tol=1e-6) -> ConvexityResult:
    """Minimum second difference ``(f[i-1] - 2 f[i] + f[i+1]) / h_x^2`` over finite triples."""
    f = np.asarray(values, dtype=float)
    if np.sum(np.isfinite(f)) < 3:
        raise PrekopaError("need at least 3 finite values")
    with np.errstate(invalid="ignore"):
        d2 = (f[:-2] - 2 * f[1:-1] + f[2:]) / h_x**2
    ok = np.isfinite(d2)
    if not np.any(ok):
        raise PrekopaError("no three consecutive finite values")
    i = int(np.nanargmin(np.where(ok, d2, np.nan)))
    return ConvexityResult(float(d2[i]), i + 1, float(tol), d2)


def p_marginal(mp: MarginalProblem, p: float, normalized=True) -> np.ndarray:
    """``-(1/p) log int e^{-p phi(x, y)} dnu(y)``.

    By default ``nu`` is the uniform probability measure on ``y_box``, so the
    result is the negative log of an ``L^p`` norm on a probability space:
    nonincreasing in ``p`` and tending to ``inf_y phi(x, y)``.  With
    ``normalized=False`` the Lebesgue measure is used instead.
    """
    if p < 1:
        raise PrekopaError("p must be >= 1")
    return np.array([-mp.log_integral(x, p, normalized) / p for x in mp.x_grid])


@dataclass
class MinimumPrincipleReport:
    p_ladder: list
    values: np.ndarray  # (len(p_ladder), len(x_grid))
    inf_phi: np.ndarray
    band: float
    monotone: bool
    max_gap: float

    @property
    def passed(self):
        return self.monotone and self.max_gap <= self.band


def minimum_principle_limit(mp: MarginalProblem, p_ladder=(1, 2, 4, 8, 16, 32, 64, 128, 256),
                            slack=1e-10, quad_err=1e-6) -> MinimumPrincipleReport:
    """Track ``p -> phi_p(x)`` toward ``inf_y phi(x, y)``.

    Asserts monotonicity in ``p`` (nonincreasing, with ``slack``) and a final
    gap of at most ``3 |log vol| / p + quad_err``.  The grid infimum uses the
    ``y`` nodes.
    """
    ps = list(p_ladder)
    if any(b <= a for a, b in zip(ps, ps[1:])):
        raise PrekopaError("p ladder must increase")
    vals = np.array([p_marginal(mp, p) for p in ps])
    inf_phi = np.array([mp.phi_values(x).min() for x in mp.x_grid])
    mono = bool(np.all(np.diff(vals, axis=0) <= slack * (1 + np.abs(vals[1:]))))
    band = 3 * abs(math.log(mp.y_volume)) / ps[-1] + quad_err
    gap = float(np.max(np.abs(vals[-1] - inf_phi)))
    return MinimumPrincipleReport(ps, vals, inf_phi, band, mono, gap)


# ---------------------------------------------------------------- identity


@dataclass
class IdentityResidual:
    lhs: float
    rhs: float

    @property
    def residual(self):
        return abs(self.lhs - self.rhs)


def _expr(e, names):
    if isinstance(e, Expression):
        return e
    return parse(str(e), [(n, REAL) for n in names])


def hessian_identity_residual(phi, gamma, point, h=1e-3, names=None) -> IdentityResidual:
    """Both sides of the expansion of ``sum_jk d_j d_k (gamma_j gamma_k e^{-phi})``.

    The left side differentiates ``T_jk = gamma_j gamma_k e^{-phi}`` directly;
    the right side is
    ``(d_k g_j d_j g_k + d_k d_j^phi(g_j) g_k + d_j^phi g_j d_k^phi g_k
    + g_j d_j d_k^phi g_k + phi_jk g_j g_k) e^{-phi}`` with
    ``d_j^phi = d_j - phi_j``.  All derivatives are central differences with
    step ``h``, so the residual is ``O(h^2)``.
    """
    m = len(gamma)
    names = list(names or [f"x{j}" for j in range(m)])
    if len(names) != m:
        raise PrekopaError("need one gamma component per variable")
    phi = _expr(phi, names)
    gam = [_expr(g, names) for g in gamma]
    if isinstance(point, dict):
        b = {k: float(v) for k, v in point.items()}
    else:
        b = {n: float(v) for n, v in zip(names, np.atleast_1d(point))}
    c = [(n, None) for n in names]

    def T(j, k):
        txt = f"({gam[j].text})*({gam[k].text})*exp(-({phi.text}))"
        return parse(txt, [(n, REAL) for n in names])

    lhs = 0.0
    for j in range(m):
        for k in range(m):
            lhs += float(partial_fd(T(j, k), b, c[j], c[k], h=h))

    val = lambda e: float(e(**b))  # noqa: E731
    d1 = lambda e, j: float(partial_fd(e, b, c[j], h=h))  # noqa: E731
    d2 = lambda e, j, k: float(partial_fd(e, b, c[j], c[k], h=h))  # noqa: E731
    g = [val(e) for e in gam]
    dg = [[d1(gam[j], k) for k in range(m)] for j in range(m)]  # dg[j][k] = d_k g_j
    ph1 = [d1(phi, j) for j in range(m)]
    ph2 = [[d2(phi, j, k) for k in range(m)] for j in range(m)]
    ddg = [[[d2(gam[j], k, l) for l in range(m)] for k in range(m)] for j in range(m)]
    dphi_g = [dg[j][j] - ph1[j] * g[j] for j in range(m)]  # d_j^phi g_j
    rhs = 0.0
    for j in range(m):
        for k in range(m):
            t1 = dg[j][k] * dg[k][j]
            # d_k d_j^phi g_j = d_k d_j g_j - phi_jk g_j - phi_j d_k g_j
            t2 = (ddg[j][k][j] - ph2[j][k] * g[j] - ph1[j] * dg[j][k]) * g[k]
            t3 = dphi_g[j] * dphi_g[k]
            # d_j d_k^phi g_k = d_j d_k g_k - phi_jk g_k - phi_k d_j g_k
            t4 = g[j] * (ddg[k][j][k] - ph2[j][k] * g[k] - ph1[k] * dg[k][j])
            t5 = ph2[j][k] * g[j] * g[k]
            rhs += t1 + t2 + t3 + t4 + t5
    rhs *= math.exp(-val(phi))
    return IdentityResidual(lhs, rhs)


# ------------------------------------------------------------- certificate


@dataclass
class Certificate:
    t: np.ndarray
    k: np.ndarray
    k2_fd: np.ndarray  # finite-difference k'' at interior t
    k2_formula: np.ndarray
    rel_error: float
    min_integrand: float
    integrand_tol: float
    gamma1_edge: float

    @property
    def passed(self):
        return self.rel_error <= 0.05 and self.min_integrand >= -self.integrand_tol


def _derivs(phi, names, t, y, h=1e-4):
    b = {names[0]: np.full_like(y, t), names[1]: y}
    c0, c1 = (names[0], None), (names[1], None)
    f = lambda *cs: np.asarray(partial_fd(phi, b, *cs, h=h), dtype=float)  # noqa: E731
    return dict(v=np.asarray(phi(**b), dtype=float) + 0 * y, p0=f(c0), p1=f(c1),
                p00=f(c0, c0), p01=f(c0, c1), p11=f(c1, c1))


def _gamma1(e, src, y):
    """Solve ``d_y(e gamma1) = src`` from whichever edge is nearer, ``e = e^{-phi}``."""
    lo = cumulative_simpson(src, x=y, initial=0.0)
    total = lo[-1]
    hi = lo - total
    mode = int(np.argmax(e))
    acc = np.where(np.arange(len(y)) <= mode, lo, hi)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        g1 = np.where(e > 0, acc / e, 0.0)
    return g1, abs(total)


def prekopa_certificate(phi, x_grid, y_grid, names=("x0", "x1"), decay=1e-12) -> Certificate:
    """Convexity certificate of ``k(t) = (int e^{-phi(t, y)} dy)^{-1}`` (one ``y``).

    ``gamma0 = k(x0)`` and ``gamma1`` solves ``d_0^phi gamma0 + d_1^phi gamma1 = 0``
    with ``gamma1 -> 0`` at the edges of ``y_grid``.  Then
    ``k''(t) = int (k'^2 + (d_1 gamma1)^2 + phi_00 k^2 + 2 phi_01 k gamma1
    + phi_11 gamma1^2) e^{-phi} dy`` is compared with finite differences of
    ``k`` on ``x_grid`` (5% relative), and the integrand is checked to be
    nonnegative.
    """
    phi = _expr(phi, names)
    t = np.asarray(x_grid, dtype=float)
    y = np.asarray(y_grid, dtype=float)
    ks, ints, mins, edges, scales = [], [], [], [], []
    for ti in t:
        d = _derivs(phi, names, ti, y)
        e = np.exp(-d["v"])
        if max(e[0], e[-1]) > decay * e.max():
            raise PrekopaError("gamma not admissible: e^-phi does not decay on the y box")
        integral = np.trapezoid(e, y)
        k = 1.0 / integral
        kp = k * k * np.trapezoid(d["p0"] * e, y)
        s = kp - d["p0"] * k  # d_0^phi gamma0
        g1, edge = _gamma1(e, -e * s, y)
        dg1 = d["p1"] * g1 - s
        integrand = (kp**2 + dg1**2 + d["p00"] * k**2 + 2 * d["p01"] * k * g1
                     + d["p11"] * g1**2)
        ks.append(k)
        ints.append(np.trapezoid(integrand * e, y))
        mins.append(float(np.min(integrand * e)))
        scales.append(float(np.max(np.abs(integrand * e))))
        edges.append(edge * k)
    ks = np.array(ks)
    ht = t[1] - t[0]
    k2_fd = (ks[:-2] - 2 * ks[1:-1] + ks[2:]) / ht**2
    k2_formula = np.array(ints[1:-1])
    rel = float(np.max(np.abs(k2_fd - k2_formula) / np.abs(k2_formula)))
    tol = 1e-6 * max(scales)
    return Certificate(t=t, k=ks, k2_fd=k2_fd, k2_formula=k2_formula, rel_error=rel,
                       min_integrand=min(mins), integrand_tol=tol, gamma1_edge=max(edges))
