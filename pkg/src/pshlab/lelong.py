"""Lelong numbers, integrability indices and the attenuation function.

The Lelong number of ``phi`` at ``a`` is the slope of ``r -> M(r)`` against
``log r`` as ``r -> 0``, where ``M`` is the mean (or the maximum) of ``phi``
over the sphere ``|z - a| = r``.  The integrability index is the infimum of
``t`` with ``e^{-2 phi / t}`` locally integrable near ``a``.

The attenuation ``phi_eps(z)`` averages ``(1/2) log K_{z,w}(0, 0)`` over
``|w| = eps``, where ``K_{z,w}`` is the Bergman kernel of the unit disk with
normalised area and weight ``2 phi(z + lambda w)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .bergman import BergmanProblem, kernel_diag
from .fibration import scan_field, t_rect, tolerance, truncation_error
from .expr import COMPLEX, Expression, parse
from .quadrature import (
    DimKind,
    SphereRule,
    ball_domain,
    build_domain,
    divergence_probe,
    sphere_average,
    sphere_max,
)

__all__ = [
    "LelongError",
    "PshSample",
    "LelongEstimate",
    "lelong_number",
    "IndexEstimate",
    "integrability_index",
    "slice_kernel",
    "Attenuated",
    "attenuated",
    "attenuated_field",
    "DropReport",
    "attenuation_lelong_drop",
    "chi",
]


class LelongError(Exception):
    pass


def _as_phi(phi, n):
    if isinstance(phi, Expression):
        return phi
    names = ["z"] if n == 1 else ["z1", "z2"]
    return parse(str(phi), [(nm, COMPLEX) for nm in names])


def _phi_callable(phi: Expression, n):
    names = phi.names

    def f(z):
        z = np.asarray(z, dtype=complex)
        if n == 1:
            b = {names[0]: z}
            shape = z.shape
        else:
            b = {nm: z[..., j] for j, nm in enumerate(names)}
            shape = z.shape[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.broadcast_to(np.asarray(phi(**b), dtype=float), shape).copy()

    return f


@dataclass
class PshSample:
    """A function ``phi`` on ``C^n`` sampled near a base point ``a``.

    ``phi`` uses the variable ``z`` (n=1) or ``z1, z2`` (n=2).  The radius
    ladder is ``r0 * 2^-k`` for ``k = 0..K``.
    """

    phi: object
    n: int = 1
    a: object = 0j
    r0: float = 0.1
    K: int = 5
    m: int = 32
    h: float = 1 / 64
    degree: Optional[int] = None
    box: float = 1.0

    def __post_init__(self):
        if self.n not in (1, 2):
            raise LelongError("n must be 1 or 2")
        self.phi = _as_phi(self.phi, self.n)
        if self.K < 4:
            raise LelongError("radius ladder needs K >= 4")
        self.a = np.asarray(self.a, dtype=complex).reshape(()) if self.n == 1 else np.asarray(
            self.a, dtype=complex).reshape(2)

    @property
    def kind(self):
        return DimKind(COMPLEX, self.n)

    @property
    def radii(self):
        return self.r0 * 2.0 ** -np.arange(self.K + 1)

    def f(self):
        return _phi_callable(self.phi, self.n)

    def box_domain(self, h=None):
        """The square ``|re|, |im| < box`` in every coordinate."""
        names = ["z"] if self.n == 1 else ["z1", "z2"]
        b = float(self.box)
        parts = []
        for nm in names:
            parts += [f"re({nm})-{b!r}", f"-{b!r}-re({nm})", f"im({nm})-{b!r}", f"-{b!r}-im({nm})"]
        rho = parts[0]
        for p in parts[1:]:
            rho = f"max({rho}, {p})"
        return build_domain(rho, [[-b, b]], h or self.h, self.kind, names=names, clip=True)


@dataclass
class LelongEstimate:
    estimate: float
    sup_estimate: float
    radii: np.ndarray
    means: np.ndarray
    sups: np.ndarray
    flag: str = ""

    @property
    def agree(self):
        return abs(self.estimate - self.sup_estimate) <= 0.1


def _slope(r, v):
    return float(np.polyfit(np.log(r), v, 1)[0])


def lelong_number(s: PshSample, f=None) -> LelongEstimate:
    """Least-squares slopes of the sphere mean and sphere maximum against ``log r``.

    ``f`` overrides the sample's function (a callable on sphere nodes).
    """
    f = f or s.f()
    r = s.radii
    means, sups = [], []
    flag = ""
    for rk in r:
        rule = SphereRule(s.a, float(rk), s.m, s.kind)
        mx = sphere_max(f, rule)
        if mx == -np.inf:
            return LelongEstimate(math.inf, math.inf, r, np.array(means), np.array(sups),
                                  "dense singularity")
        av = sphere_average(f, rule)
        if av == -np.inf:
            flag = "singular node"
        means.append(av)
        sups.append(mx)
    means, sups = np.array(means), np.array(sups)
    est_sup = _slope(r, sups)
    est = _slope(r, means) if np.all(np.isfinite(means)) else est_sup
    return LelongEstimate(est, est_sup, r, means, sups, flag)


@dataclass
class IndexEstimate:
    estimate: float
    bracket: tuple
    coarse: bool
    history: list = field(default_factory=list)

    @property
    def width(self):
        return self.bracket[1] - self.bracket[0]


def _probe_domains(s: PshSample, levels):
    h0 = s.r0 / 4
    return [ball_domain(s.a, s.r0, h0 / 2**k, s.kind) for k in range(levels)]


def integrability_index(s: PshSample, t_lo=1e-3, t_hi=10.0, width=0.02, levels=None,
                        max_steps=40) -> IndexEstimate:
    """Bisection on ``t`` for integrability of ``e^{-2 phi / t}`` on ``|z - a| < r0``.

    Each step runs :func:`divergence_probe` on a mesh ladder ``r0/4, r0/8, ...``
    (four levels in ``C^1``, three in ``C^2``).  Converged means ``t`` is above
    the index.  Two consecutive inconclusive probes stop the search and the
    bracket is reported as ``coarse``.
    """
    levels = levels or (4 if s.n == 1 else 3)
    doms = _probe_domains(s, levels)
    phis = [s.f()(dk.coords()) for dk in doms]
    lo, hi = t_lo, t_hi
    history = []
    inconclusive = 0

    def probe(t):
        by_size = {dk.size: -2.0 * p / t for dk, p in zip(doms, phis)}
        return divergence_probe(log_f=lambda z: by_size[len(z)], domains=doms)

    # the lower end decides whether the index is below t_lo
    res = probe(lo)
    history.append((lo, res.status))
    if res.converged:
        return IndexEstimate(lo / 2, (0.0, lo), False, history)
    coarse = False
    for _ in range(max_steps):
        if hi - lo <= width:
            break
        mid = 0.5 * (lo + hi)
        res = probe(mid)
        history.append((mid, res.status))
        if res.status == "inconclusive":
            inconclusive += 1
            if inconclusive >= 2:
                coarse = True
                break
            # nudge to the upper third and retry
            mid2 = lo + 2 * (hi - lo) / 3
            res = probe(mid2)
            history.append((mid2, res.status))
            if res.status == "inconclusive":
                coarse = True
                break
            mid = mid2
        inconclusive = 0
        if res.converged:
            hi = mid
        else:
            lo = mid
    return IndexEstimate(0.5 * (lo + hi), (lo, hi), coarse, history)


# ------------------------------------------------------------- attenuation


@lru_cache(maxsize=8)
def _unit_disk(h):
    return ball_domain(0j, 1.0, h, "complex-1", names=["lam"])


def slice_kernel(phi, z, w, n=1, h=1 / 64, degree=8) -> float:
    """``K_{z,w}(0, 0)`` for weight ``2 phi(z + lambda w)`` on the normalised unit disk.

    Returns 0 where the kernel is numerically zero (``-inf`` on the log scale).
    """
    phi = _as_phi(phi, n)
    f = _phi_callable(phi, n)
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if n == 1:
        weight = lambda lam: 2.0 * f(complex(z) + lam * complex(w))  # noqa: E731
    else:
        weight = lambda lam: 2.0 * f(z[None, :] + np.asarray(lam)[..., None] * w[None, :])  # noqa: E731
    p = BergmanProblem(_unit_disk(h), weight, degree, "unit-total-mass")
    ev = kernel_diag(p, 0j)
    return 0.0 if ev.log_value == -math.inf else ev.value


@dataclass
class Attenuated:
    value: float
    singular_nodes: int
    nodes: int


def _sphere_dirs(n, eps, m):
    kind = DimKind(COMPLEX, n)
    return SphereRule(np.zeros(n, dtype=complex) if n == 2 else 0j, eps, m, kind).nodes


def attenuated(phi, z, eps, m=16, n=1, h=1 / 64, degree=8) -> Attenuated:
    """``phi_eps(z)``: mean of ``(1/2) log K_{z,w}(0, 0)`` over ``|w| = eps``.

    A single singular slice makes the value ``-inf``; the count is reported.
    """
    if m < 16:
        raise LelongError("attenuation needs m >= 16 sphere nodes")
    # in C^2 the Hopf rule with m angles per circle is large; use m // 4 per circle
    ws = _sphere_dirs(n, eps, m if n == 1 else max(8, m // 2))
    vals = []
    for w in ws:
        k = slice_kernel(phi, z, w, n, h, degree)
        vals.append(-math.inf if k <= 0 else 0.5 * math.log(k))
    vals = np.array(vals)
    sing = int(np.sum(vals == -np.inf))
    value = -math.inf if sing else float(vals.mean())
    return Attenuated(value, sing, len(vals))


def attenuated_field(phi, z_values, eps, m=16, h=1 / 64, degree=8) -> np.ndarray:
    """``phi_eps`` on an array of points in ``C^1``."""
    z_values = np.asarray(z_values, dtype=complex)
    out = np.empty(z_values.shape)
    for idx in np.ndindex(z_values.shape):
        out[idx] = attenuated(phi, z_values[idx], eps, m, 1, h, degree).value
    return out


def attenuation_z_scan(phi, center=0j, h_z=0.05, eps=0.1, nre=5, nim=5, m=16, h=1 / 64,
                       degree=8, c1=5.0, c2=5.0):
    """Discrete-Laplacian test of ``z -> phi_eps(z)`` on a grid around ``center``.

    The tolerance adds the stencil truncation estimate from fourth differences
    of the field to the fibration budget, with the node error taken from a
    ``2h`` recomputation at four grid points.
    """
    re_, im_ = t_rect(center, h_z, nre, nim)
    Z = re_[:, None] + 1j * im_[None, :]
    f = attenuated_field(phi, Z, eps, m, h, degree)
    sel = (slice(1, -1, nre - 3 or 1), slice(1, -1, nim - 3 or 1))
    f2 = attenuated_field(phi, Z[sel], eps, m, 2 * h, degree)
    d = np.abs(f[sel] - f2)
    q = float(np.max(d[np.isfinite(d)])) if np.any(np.isfinite(d)) else 0.0
    tol = tolerance(f, h_z, q, c1, c2) + c1 * truncation_error(f, h_z)
    rep = scan_field(re_, im_, f, h_z, tol)
    rep.quad_err = q
    return rep


@dataclass
class DropReport:
    tau: float
    estimate: LelongEstimate
    bound: float

    @property
    def passed(self):
        return self.estimate.estimate >= self.bound - 0.1


def attenuation_lelong_drop(phi, a=0j, eps=0.2, tau=None, r0=None, K=4, m=8, slices=16,
                            h=1 / 64, degree=8) -> DropReport:
    """Lelong number at ``a`` of ``z -> phi_eps(z)``, expected ``>= tau - 1``.

    ``tau`` is the Lelong number of ``phi`` at ``a`` (estimated if omitted).
    Radii run from ``r0 = eps / 4`` down by factors of two.
    """
    s = PshSample(phi, 1, a, r0 or eps / 4, K, m, h, degree)
    if tau is None:
        tau = lelong_number(PshSample(phi, 1, a)).estimate

    def f(zs):
        return np.array([attenuated(s.phi, zz, eps, slices, 1, h, degree).value
                         for zz in np.atleast_1d(zs)])

    est = lelong_number(s, f)
    return DropReport(float(tau), est, float(tau) - 1.0)


def chi(phi, a, n=1, dom=None, h=None, degree=None) -> float:
    """``log K(a, a)`` for the weight ``2 phi + 2 (n - 1) log|z - a|``.

    The domain defaults to the sample box.  In one variable the extra term
    vanishes.  Returns ``-inf`` where the kernel is numerically zero.
    """
    phi = _as_phi(phi, n)
    f = _phi_callable(phi, n)
    a = np.asarray(a, dtype=complex)
    if dom is None:
        s = PshSample(phi, n, a, h=h or (1 / 64 if n == 1 else 0.1))
        dom = s.box_domain()
    if n == 1:
        weight = lambda z: 2.0 * f(z)  # noqa: E731
    else:
        def weight(z):
            d2 = np.sum(np.abs(z - a) ** 2, axis=-1)
            with np.errstate(divide="ignore"):
                return 2.0 * f(z) + (n - 1) * np.log(d2)
    p = BergmanProblem(dom, weight, degree)
    return kernel_diag(p, a if n == 1 else a.reshape(1, 2)).log_value
