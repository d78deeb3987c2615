"""Green potentials, energies and Robin functions by finite differences.

The discrete Laplacian is the 5-point (plane) or 7-point (space) stencil on
the node lattice of a :class:`GridDomain`.  Dirichlet data are imposed where
a stencil arm leaves the domain, at the crossing point found by linear
interpolation of ``rho`` along the arm, using the symmetric ghost-node
treatment: with the crossing at fraction ``theta`` of the arm, the row gets
``1/(theta h^2)`` on the diagonal and the boundary value moves to the right
hand side.  The matrix stays symmetric positive definite and the solution is
second-order accurate.

Sign convention: ``Delta g = mu`` with ``g = 0`` on the boundary, so ``g <= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pyamg
from scipy import ndimage, optimize, sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import cg

from .expr import COMPLEX, REAL, Expression, parse, partial_fd
from .fibration import ScanReport, scan_field
from .quadrature import DimKind, EmptyDomainError, GridDomain, build_domain

__all__ = [
    "PotentialError",
    "SolverError",
    "SupportError",
    "UnsupportedFamilyError",
    "Mass",
    "GreenProblem",
    "GreenSolution",
    "green_potential",
    "energy",
    "EnergyFamily",
    "LineScan",
    "energy_scan",
    "RobinProblem",
    "robin_function",
    "SegmentScan",
    "robin_convexity_scan",
    "harmonic_center",
    "ConditionC",
    "condition_C_check",
    "NEWTON",
]

NEWTON = 1 / (4 * math.pi)
THETA_MIN = 1e-3


class PotentialError(Exception):
    pass


class SolverError(PotentialError):
    pass


class SupportError(PotentialError):
    pass


class UnsupportedFamilyError(PotentialError):
    pass


# ------------------------------------------------------------------ lattice


class _Lattice:
    """Node lattice of a domain with the Dirichlet operator assembled once."""

    def __init__(self, dom: GridDomain):
        if dom.dim_kind.field != REAL or dom.d not in (2, 3):
            raise PotentialError("potentials need a real-2 or real-3 domain")
        self.dom = dom
        self.h = dom.h
        self.d = dom.d
        self.axes = dom.grid_axes()
        self.shape = tuple(len(a) for a in self.axes)
        mesh = np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1).reshape(-1, self.d)
        self.points = mesh
        self.rho = dom.rho_values(mesh).reshape(self.shape)
        self.inside = self.rho < 0
        if not np.any(self.inside):
            raise EmptyDomainError("no interior lattice nodes")
        border = np.zeros(self.shape, dtype=bool)
        for ax in range(self.d):
            sl = [slice(None)] * self.d
            sl[ax] = 0
            border[tuple(sl)] = True
            sl[ax] = -1
            border[tuple(sl)] = True
        if np.any(self.inside & border):
            raise PotentialError("domain touches the lattice border")
        self.index = -np.ones(self.shape, dtype=np.int64)
        self.index[self.inside] = np.arange(int(self.inside.sum()))
        self._assemble()
        self._ml = None

    @property
    def n(self):
        return int(self.inside.sum())

    def _assemble(self):
        h2 = self.h * self.h
        idx = np.argwhere(self.inside)
        me = self.index[self.inside]
        diag = np.zeros(self.n)
        rows, cols, vals = [], [], []
        b_rows, b_pts, b_coef = [], [], []
        for ax in range(self.d):
            for sgn in (1, -1):
                nb = idx.copy()
                nb[:, ax] += sgn
                nb_t = tuple(nb.T)
                nb_in = self.inside[nb_t]
                # interior neighbours
                rows.append(me[nb_in])
                cols.append(self.index[nb_t][nb_in])
                vals.append(np.full(int(nb_in.sum()), -1.0 / h2))
                diag[nb_in] += 1.0 / h2
                # boundary crossings
                out = ~nb_in
                ri = self.rho[tuple(idx[out].T)]
                rj = self.rho[tuple(nb[out].T)]
                with np.errstate(divide="ignore", invalid="ignore"):
                    theta = np.where(np.isfinite(rj), ri / (ri - rj), 0.5)
                theta = np.clip(np.nan_to_num(theta, nan=0.5), THETA_MIN, 1.0)
                diag[out] += 1.0 / (theta * h2)
                step = np.zeros(self.d)
                step[ax] = sgn * self.h
                x = self.points[np.ravel_multi_index(tuple(idx[out].T), self.shape)]
                b_rows.append(me[out])
                b_pts.append(x + theta[:, None] * step)
                b_coef.append(1.0 / (theta * h2))
        rows.append(np.arange(self.n))
        cols.append(np.arange(self.n))
        vals.append(diag)
        self.A = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n, self.n),
        )
        self.b_rows = np.concatenate(b_rows)
        self.b_pts = np.concatenate(b_pts)
        self.b_coef = np.concatenate(b_coef)

    def solve(self, rhs):
        """Solve ``A u = rhs`` (``A`` = minus the discrete Laplacian)."""
        if not np.any(rhs):
            return np.zeros(self.n), 0.0
        if self._ml is None:
            self._ml = pyamg.smoothed_aggregation_solver(self.A)
        M = self._ml.aspreconditioner()
        cap = 20 * max(self.shape)
        u, info = cg(self.A, rhs, rtol=1e-10, atol=0.0, maxiter=cap, M=M)
        res = float(np.linalg.norm(self.A @ u - rhs) / np.linalg.norm(rhs))
        if res > 1e-8:
            raise SolverError(f"solver did not converge: relative residual {res:.3e}")
        return u, res

    def full(self, u, fill=0.0):
        out = np.full(self.shape, fill, dtype=float)
        out[self.inside] = u
        return out

    def interpolate(self, grid_values, x):
        f = RegularGridInterpolator(self.axes, grid_values, method="linear")
        return f(np.atleast_2d(x))

    def dist_to_boundary_ok(self, x, margin):
        """True if every lattice node within ``margin`` of ``x`` is inside."""
        x = np.asarray(x, dtype=float)
        k = int(math.ceil(margin / self.h)) + 1
        c = [int(np.argmin(np.abs(ax - x[i]))) for i, ax in enumerate(self.axes)]
        sl = tuple(slice(max(ci - k, 0), ci + k + 1) for ci in c)
        pts = np.stack(np.meshgrid(*[ax[s] for ax, s in zip(self.axes, sl)], indexing="ij"),
                       axis=-1)
        near = np.linalg.norm(pts - x, axis=-1) <= margin
        return bool(np.all(self.inside[sl][near]))


_LATTICES: dict = {}


def _lattice(dom):
    key = id(dom)
    lat = _LATTICES.get(key)
    if lat is None or lat.dom is not dom:
        lat = _Lattice(dom)
        if len(_LATTICES) > 16:
            _LATTICES.clear()
        _LATTICES[key] = lat
    return lat


# -------------------------------------------------------------------- mass


@dataclass
class Mass:
    """Smoothed measure of total mass ``total`` on the lattice.

    ``kind`` is ``"point"`` (bump of radius ``width`` at ``center``),
    ``"ring"`` (radial bump of half-width ``width`` around ``|x - center| = radius``),
    ``"ball"`` (constant density on ``|x - center| < radius``) or ``"zero"``.
    ``width=None`` means ``4 h`` for points and ``2 h`` for rings (a thick ring
    biases the energy upward by about ``0.6 sigma / rho0``).
    """

    kind: str = "point"
    center: Sequence = (0.0, 0.0)
    radius: float = 0.0
    width: Optional[float] = None
    total: float = 1.0

    def density(self, lat) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(lat.shape)
        c = np.asarray(self.center, dtype=float)
        if c.size != lat.d:
            raise PotentialError("mass center has the wrong dimension")
        r = np.linalg.norm(lat.points - c, axis=1).reshape(lat.shape)
        w = self.width
        if w is None:
            w = (2 if self.kind == "ring" else 4) * lat.h
        if self.kind == "point":
            s = r / w
        elif self.kind == "ring":
            s = (r - self.radius) / w
        elif self.kind == "ball":
            s = r / self.radius
            prof = (s < 1).astype(float)
            return self._normalise(prof, lat)
        else:
            raise PotentialError(f"unknown mass kind {self.kind!r}")
        prof = np.where(np.abs(s) < 1, (1 - s * s) ** 2, 0.0)
        return self._normalise(prof, lat)

    def _normalise(self, prof, lat):
        tot = prof.sum() * lat.h**lat.d
        if tot <= 0:
            raise PotentialError("mass profile does not meet any lattice node")
        return prof * (self.total / tot)


def _check_support(lat, mu, margin_cells=3):
    supp = mu > 0
    if not np.any(supp):
        return
    grown = ndimage.binary_dilation(supp, iterations=margin_cells)
    if np.any(grown & ~lat.inside):
        raise SupportError("support exits a fiber: mass support within 3h of the boundary")


@dataclass
class GreenProblem:
    dom: GridDomain
    mu: Mass = field(default_factory=Mass)

    def __post_init__(self):
        self.lattice = _lattice(self.dom)
        self.density = self.mu.density(self.lattice) if isinstance(self.mu, Mass) else np.asarray(
            self.mu, dtype=float)
        if self.density.shape != self.lattice.shape:
            raise PotentialError("density does not match the lattice")
        if np.any(self.density < 0):
            raise PotentialError("mu must be nonnegative")
        _check_support(self.lattice, self.density)

    @property
    def total_mass(self):
        return float(self.density.sum() * self.lattice.h**self.lattice.d)


@dataclass
class GreenSolution:
    values: np.ndarray  # lattice grid, 0 outside
    residual: float
    lattice: object

    def at(self, x):
        return self.lattice.interpolate(self.values, x)


def green_potential(gp: GreenProblem) -> GreenSolution:
    """Solve ``Delta_h g = mu`` with ``g = 0`` on the boundary."""
    lat = gp.lattice
    mu = gp.density[lat.inside]
    u, res = lat.solve(-mu)
    g = lat.full(u)
    if np.any(g > 1e-12):
        raise SolverError("Green potential is positive somewhere")
    return GreenSolution(g, res, lat)


def energy(gp: GreenProblem, sol: Optional[GreenSolution] = None) -> float:
    """``u = sum g mu h^d`` (nonpositive)."""
    sol = sol or green_potential(gp)
    return float(np.sum(sol.values * gp.density) * gp.lattice.h**gp.lattice.d)


# ---------------------------------------------------------------- families


@dataclass
class EnergyFamily:
    """Fibres ``{x : rho(t, x) < 0}`` in the plane (``x, y``) or space (``x, y, z``).

    ``mode="complex"`` takes ``t`` complex on a rectangle (``t_re`` x ``t_im``);
    ``mode="real"`` takes real ``t`` on ``t_re``.  ``shape`` declares the
    family for condition (C): ``"graph"`` (``rho = v(x) - t``, give ``v``) or
    ``"convex"`` (``rho`` jointly convex in ``(t, x)``).
    """

    rho: object = None
    d: int = 2
    mode: str = "complex"
    t_re: np.ndarray = field(default_factory=lambda: np.linspace(-0.2, 0.2, 5))
    t_im: np.ndarray = field(default_factory=lambda: np.linspace(-0.2, 0.2, 5))
    bbox: object = ((-1.5, 1.5),)
    h: float = 1 / 64
    shape: Optional[str] = None
    v: object = None

    def __post_init__(self):
        self.names = ("x", "y") if self.d == 2 else ("x", "y", "z")
        tkind = COMPLEX if self.mode == "complex" else REAL
        decl = [("t", tkind)] + [(n, REAL) for n in self.names]
        if self.mode not in ("complex", "real"):
            raise ValueError("mode must be 'complex' or 'real'")
        if self.v is not None and not isinstance(self.v, Expression):
            self.v = parse(str(self.v), [(n, REAL) for n in self.names])
        if self.rho is None:
            if self.v is None:
                raise ValueError("give rho or a graph function v")
            self.rho = f"({self.v.text}) - t"
            self.shape = self.shape or "graph"
        if not isinstance(self.rho, Expression):
            self.rho = parse(str(self.rho), decl)
        self.t_re = np.asarray(self.t_re, dtype=float)
        self.t_im = np.asarray(self.t_im, dtype=float) if self.mode == "complex" else np.zeros(1)

    @property
    def h_t(self):
        return float(self.t_re[1] - self.t_re[0])

    def t_values(self):
        if self.mode == "complex":
            return self.t_re[:, None] + 1j * self.t_im[None, :]
        return self.t_re[:, None] + 0j

    def fibre(self, t, h=None):
        tv = complex(t) if self.mode == "complex" else float(np.real(t))
        return build_domain(self.rho, self.bbox, h or self.h, DimKind(REAL, self.d),
                            names=self.names, fixed={"t": tv})


@dataclass
class LineScan:
    t: np.ndarray
    u: np.ndarray
    second_differences: np.ndarray
    min_second_difference: float
    argmin: float
    tol: float
    verdict: str

    @property
    def passed(self):
        return self.verdict == "pass"

    def rows(self):
        d2 = np.concatenate([[np.nan], self.second_differences, [np.nan]])
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.t, self.u, d2)]


def _energies(fam, mu, h):
    T = fam.t_values()
    out = np.empty(T.shape)
    for idx in np.ndindex(T.shape):
        out[idx] = energy(GreenProblem(fam.fibre(T[idx], h), mu))
    return out


def _check_boundary_gradient(fam, samples=3):
    """Spot-check that ``grad_x rho`` does not vanish near the fibre boundaries."""
    T = fam.t_values().ravel()
    for t in T[np.linspace(0, len(T) - 1, samples).round().astype(int)]:
        dom = fam.fibre(t)
        lat = _lattice(dom)
        edge = lat.inside & ~ndimage.binary_erosion(lat.inside)
        pts = lat.points[edge.ravel()][:50]
        tv = complex(t) if fam.mode == "complex" else float(np.real(t))
        b = {"t": np.full(len(pts), tv)}
        b.update({n: pts[:, i] for i, n in enumerate(fam.names)})
        g2 = sum(np.asarray(partial_fd(fam.rho, b, (n, None), h=1e-5)) ** 2 for n in fam.names)
        if np.any(g2 < 1e-12):
            raise UnsupportedFamilyError("gradient of rho vanishes on a fibre boundary")


def energy_scan(fam: EnergyFamily, mu: Mass = None, tol=None, c1=5.0, c2=5.0):
    """Scan ``t -> u(t)`` for subharmonicity (complex mode) or convexity (real mode).

    The default tolerance follows the fibration error model with the
    discretisation error ``delta`` taken as the ``t``-variation of
    ``u_h - u_{2h}`` (the self-energy of the smoothed mass is constant in
    ``t`` and cancels in the differences).  Real mode first requires
    :func:`condition_C_check` to pass.
    """
    mu = mu or Mass("point", (0.0,) * fam.d)
    if fam.mode == "real":
        cc = condition_C_check(fam)
        if not cc.passed:
            raise UnsupportedFamilyError(
                f"condition (C) fails for this family (min {cc.min_value:.3g})")
    _check_boundary_gradient(fam)
    u = _energies(fam, mu, fam.h)
    # discretisation noise in t
    T = fam.t_values()
    sel = [tuple(np.array(T.shape) // 2), (0, 0), tuple(np.array(T.shape) - 1)]
    e = []
    for idx in sel:
        u2 = energy(GreenProblem(fam.fibre(T[idx], 2 * fam.h), mu))
        e.append(u[idx] - u2)
    delta = float(max(abs(x - e[0]) for x in e))
    ht = fam.h_t
    if fam.mode == "complex":
        if tol is None:
            tol = c1 * ht**2 * max(1.0, float(np.max(np.abs(u)))) + c2 * 8 * delta / ht**2
        rep = scan_field(fam.t_re, fam.t_im, u, ht, tol)
        rep.quad_err = delta
        return rep
    line = u[:, 0]
    d2 = (line[:-2] - 2 * line[1:-1] + line[2:]) / ht**2
    if tol is None:
        tol = c1 * ht**2 * max(1.0, float(np.max(np.abs(line)))) + c2 * 4 * delta / ht**2
    i = int(np.argmin(d2))
    return LineScan(fam.t_re, line, d2, float(d2[i]), float(fam.t_re[i + 1]), float(tol),
                    "pass" if d2[i] >= -tol else "fail")


# ------------------------------------------------------------------- Robin


@dataclass
class RobinProblem:
    """Convex domain in space for Robin-function evaluation."""

    dom: GridDomain
    check_convex: bool = True

    def __post_init__(self):
        if self.dom.dim_kind != DimKind(REAL, 3):
            raise PotentialError("Robin functions are computed in real dimension 3")
        self.lattice = _lattice(self.dom)
        if self.check_convex:
            rng = np.random.default_rng(0)
            pts = self.lattice.points[self.lattice.inside.ravel()]
            i = rng.integers(0, len(pts), 200)
            j = rng.integers(0, len(pts), 200)
            mid = 0.5 * (pts[i] + pts[j])
            if np.any(self.dom.rho_values(mid) >= 0):
                raise PotentialError("domain failed the convexity spot-check")

    @property
    def h(self):
        return self.lattice.h


def robin_function(rp: RobinProblem, x) -> float:
    """``Lambda(x) = psi(x)`` with ``psi`` harmonic, ``psi = 1/(4 pi |x - .|)`` on the boundary."""
    lat = rp.lattice
    x = np.asarray(x, dtype=float).reshape(3)
    if not lat.dist_to_boundary_ok(x, 4 * lat.h):
        raise PotentialError("evaluation point closer than 4h to the boundary")
    data = NEWTON / np.linalg.norm(lat.b_pts - x, axis=1)
    rhs = np.bincount(lat.b_rows, weights=lat.b_coef * data, minlength=lat.n)
    u, _ = lat.solve(rhs)
    return float(lat.interpolate(lat.full(u), x)[0])


@dataclass
class SegmentScan:
    segments: list
    samples: list  # per segment: (s values, Lambda values, second differences)
    min_second_difference: float
    tol: float

    @property
    def verdict(self):
        return "pass" if self.min_second_difference > self.tol else "fail"

    @property
    def passed(self):
        return self.verdict == "pass"


def robin_convexity_scan(rp: RobinProblem, segments, n=7, tol=1e-3, log=False) -> SegmentScan:
    """Second differences of ``Lambda`` (or ``log Lambda``) along segments.

    Each segment ``(p, q)`` is sampled at ``n`` equally spaced points.  The
    verdict requires the minimum second difference to exceed ``tol`` (strict
    convexity).  With ``log=True`` the samples are ``log Lambda``; the
    subharmonicity check then compares ``min_second_difference`` with
    ``-tol`` rather than using the strict verdict.
    """
    out = []
    mn = math.inf
    for p, q in segments:
        p, q = np.asarray(p, float), np.asarray(q, float)
        s = np.linspace(0, 1, n)
        step = np.linalg.norm(q - p) / (n - 1)
        vals = np.array([robin_function(rp, p + si * (q - p)) for si in s])
        if log:
            vals = np.log(vals)
        d2 = (vals[:-2] - 2 * vals[1:-1] + vals[2:]) / step**2
        out.append((s, vals, d2))
        mn = min(mn, float(d2.min()))
    return SegmentScan([(tuple(p), tuple(q)) for p, q in segments], out, mn, tol)


def harmonic_center(rp: RobinProblem, coarse=3, xtol=None):
    """Minimiser of ``Lambda``: coarse lattice search, then golden section along axes."""
    lat = rp.lattice
    pts = lat.points[lat.inside.ravel()]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    margin = 5 * lat.h
    grids = [np.linspace(lo[i] + margin, hi[i] - margin, coarse) for i in range(3)]
    best, best_x = math.inf, None
    for x in np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, 3):
        if not lat.dist_to_boundary_ok(x, 4 * lat.h):
            continue
        v = robin_function(rp, x)
        if v < best:
            best, best_x = v, x
    if best_x is None:
        raise PotentialError("no admissible point for the harmonic center search")
    x = best_x.copy()
    step = (hi - lo) / (coarse - 1 if coarse > 1 else 1)
    xtol = xtol or lat.h / 4
    for _ in range(2):
        for ax in range(3):
            a, b = x[ax] - step[ax], x[ax] + step[ax]

            def f(s, ax=ax):
                y = x.copy()
                y[ax] = s
                if not lat.dist_to_boundary_ok(y, 4 * lat.h):
                    return math.inf
                return robin_function(rp, y)

            res = optimize.minimize_scalar(f, bracket=None, bounds=(a, b), method="bounded",
                                           options={"xatol": xtol})
            x[ax] = res.x
        step = step / 4
    return x, robin_function(rp, x)


# ------------------------------------------------------------ condition C


@dataclass
class ConditionC:
    shape: str
    min_value: float
    tol: float

    @property
    def passed(self):
        return self.min_value >= -self.tol

    @property
    def verdict(self):
        return "pass" if self.passed else "fail"


def condition_C_check(fam: EnergyFamily, tol=1e-6, pairs=200) -> ConditionC:
    """Condition (C) for graph or convex families.

    Graph families ``{v < t}``: the discrete Laplacian of ``v`` must be
    ``>= -tol`` on the boundary set ``{x : v(x) in [t_min, t_max]}``.  Convex
    families: ``rho`` is spot-checked for joint midpoint convexity on
    ``pairs`` random pairs, which suffices.
    """
    if fam.shape == "graph":
        if fam.v is None:
            raise UnsupportedFamilyError("graph family without v")
        h = fam.h
        bbox = np.asarray(fam.bbox, float).reshape(-1, 2)
        if bbox.shape[0] == 1:
            bbox = np.repeat(bbox, fam.d, axis=0)
        axes = [np.arange(b[0] + h / 2, b[1], h) for b in bbox]
        mesh = np.meshgrid(*axes, indexing="ij")
        b = {n: m for n, m in zip(fam.names, mesh)}
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.asarray(fam.v(**b), dtype=float)
        lap = np.zeros_like(v)
        for ax in range(fam.d):
            lap += np.roll(v, 1, ax) - 2 * v + np.roll(v, -1, ax)
        lap /= h * h
        tr = fam.t_re
        band = (v >= tr.min()) & (v <= tr.max())
        band[[0, -1], ...] = False
        band[:, [0, -1]] = False
        ok = band & np.isfinite(lap)
        if not np.any(ok):
            raise UnsupportedFamilyError("no grid node on the fibre boundaries")
        scale = max(1.0, float(np.max(np.abs(lap[ok]))))
        return ConditionC("graph", float(lap[ok].min()), tol * scale)
    if fam.shape == "convex":
        rng = np.random.default_rng(0)
        bbox = np.asarray(fam.bbox, float).reshape(-1, 2)
        if bbox.shape[0] == 1:
            bbox = np.repeat(bbox, fam.d, axis=0)
        tlo, thi = fam.t_re.min(), fam.t_re.max()
        lo = np.concatenate([[tlo], bbox[:, 0]])
        hi = np.concatenate([[thi], bbox[:, 1]])
        P = rng.uniform(lo, hi, size=(pairs, fam.d + 1))
        Q = rng.uniform(lo, hi, size=(pairs, fam.d + 1))

        def rho(X):
            b = {"t": X[:, 0]}
            b.update({n: X[:, i + 1] for i, n in enumerate(fam.names)})
            return np.asarray(fam.rho(**b), dtype=float)

        gap = 0.5 * (rho(P) + rho(Q)) - rho(0.5 * (P + Q))
        scale = max(1.0, float(np.max(np.abs(rho(P)))))
        return ConditionC("convex", float(gap.min()), tol * scale)
    raise UnsupportedFamilyError("unsupported family shape: declare 'graph' or 'convex'")
