"""Grid discretisation of sublevel sets and quadrature over them.

A :class:`GridDomain` is the node-centred grid of cells of width ``h`` over a
box, restricted to ``{rho < 0}``.  Cells crossing the boundary get the
fraction of a ``3^d`` sub-grid that lies inside as weight; their node is moved
to the centroid of the inside sub-points.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import ndimage
from scipy.special import logsumexp

from .expr import COMPLEX, REAL, Expression, parse

__all__ = [
    "DimKind",
    "GridDomain",
    "QuadratureError",
    "EmptyDomainError",
    "TruncatedDomainError",
    "SingularSampleError",
    "ProbeResult",
    "SphereRule",
    "build_domain",
    "ball_domain",
    "integrate",
    "log_integrate",
    "divergence_probe",
    "sphere_average",
    "sphere_max",
]


class QuadratureError(Exception):
    pass


class EmptyDomainError(QuadratureError):
    pass


class TruncatedDomainError(QuadratureError):
    pass


class SingularSampleError(QuadratureError):
    pass


@dataclass(frozen=True)
class DimKind:
    """``field`` is ``"real"`` (dimension ``d``) or ``"complex"`` (dimension ``n``)."""

    field: str
    n: int

    def __post_init__(self):
        if self.field == REAL and self.n not in (1, 2, 3, 4):
            raise ValueError("real dimension must be 1..4")
        if self.field == COMPLEX and self.n not in (1, 2):
            raise ValueError("complex dimension must be 1 or 2")
        if self.field not in (REAL, COMPLEX):
            raise ValueError(f"unknown field {self.field!r}")

    @property
    def real_dim(self):
        return 2 * self.n if self.field == COMPLEX else self.n

    def default_names(self):
        if self.field == COMPLEX:
            return ["z"] if self.n == 1 else ["z1", "z2"]
        return [["x"], ["x", "y"], ["x", "y", "z"], ["x0", "x1", "x2", "x3"]][self.n - 1]

    @classmethod
    def parse(cls, text):
        """Accept ``"real-2"``, ``"complex-1"``, ``"C1"``, ``"R3"`` ..."""
        if isinstance(text, DimKind):
            return text
        t = str(text).strip().lower()
        if t[0] in "rc" and t[1:].isdigit():
            return cls(REAL if t[0] == "r" else COMPLEX, int(t[1:]))
        fld, _, num = t.partition("-")
        return cls(fld, int(num))

    def __str__(self):
        return f"{self.field}-{self.n}"


def _as_rho(rho, kind, names):
    if isinstance(rho, Expression):
        return rho
    var_kind = COMPLEX if kind.field == COMPLEX else REAL
    return parse(rho, [(name, var_kind) for name in names])


def _to_binding(points, kind, names):
    """Real coordinate array (N, d) -> mapping name -> values."""
    if kind.field == COMPLEX:
        return {
            name: points[:, 2 * j] + 1j * points[:, 2 * j + 1] for j, name in enumerate(names)
        }
    return {name: points[:, j] for j, name in enumerate(names)}


@dataclass(frozen=True, eq=False)
class GridDomain:
    rho: Expression
    bbox: np.ndarray
    h: float
    dim_kind: DimKind
    names: tuple
    shape: tuple
    mask: np.ndarray
    cell_weights: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    fixed: dict = field(default_factory=dict)
    clip: bool = False
    offset: Optional[np.ndarray] = None

    @property
    def d(self):
        return self.dim_kind.real_dim

    @property
    def size(self):
        return len(self.weights)

    @property
    def volume(self):
        return float(self.weights.sum())

    @property
    def center(self):
        return self.bbox.mean(axis=1)

    @property
    def half_width(self):
        return float(0.5 * (self.bbox[:, 1] - self.bbox[:, 0]).max())

    def binding(self, points=None):
        pts = self.points if points is None else np.atleast_2d(points)
        b = dict(self.fixed)
        b.update(_to_binding(pts, self.dim_kind, self.names))
        return b

    def coords(self):
        """Natural coordinates: complex ``(N,)``/``(N, n)`` or real ``(N,)``/``(N, d)``."""
        if self.dim_kind.field == COMPLEX:
            z = self.points[:, 0::2] + 1j * self.points[:, 1::2]
            return z[:, 0] if self.dim_kind.n == 1 else z
        return self.points[:, 0] if self.d == 1 else self.points

    def evaluate(self, f, points=None):
        """Values of a density at the quadrature nodes (or given points)."""
        if isinstance(f, Expression):
            return np.broadcast_to(np.asarray(f(**self.binding(points)), dtype=float),
                                   (len(self.points) if points is None else len(np.atleast_2d(points)),)).copy()
        if callable(f):
            if points is not None:
                raise ValueError("callable densities are evaluated at nodes only")
            return np.asarray(f(self.coords()))
        values = np.asarray(f)
        if values.shape[0] != self.size:
            raise ValueError("density array does not match the node count")
        return values

    def refined(self, h):
        bbox = self.bbox
        if self.offset is not None:
            # keep the offset point a grid vertex, with at least one extra cell of margin
            half = np.max(np.abs(bbox - self.offset[:, None]), axis=1)
            half = np.ceil(half / h - 1e-9) * h + h
            bbox = np.column_stack([self.offset - half, self.offset + half])
        return build_domain(self.rho, bbox, h, self.dim_kind, names=self.names,
                            fixed=self.fixed, clip=self.clip, offset=self.offset)

    def rho_values(self, points):
        """Defining function at absolute real coordinates ``points`` (N, d)."""
        pts = np.atleast_2d(points)
        if self.offset is not None:
            pts = pts - self.offset
        b = dict(self.fixed)
        b.update(_to_binding(pts, self.dim_kind, self.names))
        return np.broadcast_to(np.asarray(self.rho(**b), dtype=float), (len(pts),)).copy()

    def grid_axes(self):
        return [self.bbox[i, 0] + (np.arange(self.shape[i]) + 0.5) * self.h for i in range(self.d)]

    def to_rows(self):
        """Rows ``(coords..., mask, weight)`` over the full grid, for CSV dumps."""
        axes = np.meshgrid(*self.grid_axes(), indexing="ij")
        cols = [a.ravel() for a in axes]
        return np.column_stack(cols + [self.mask.ravel().astype(float), self.cell_weights.ravel()])


def _halfspace_fraction(s, a, rel_floor=1e-4):
    """``P(sum_i V_i < s + sum_i a_i / 2)`` for independent ``V_i ~ U[0, a_i]``.

    This is the volume fraction of a cell ``[-h/2, h/2]^d`` on which
    ``g . u < s`` with ``a_i = |g_i| h``.  Components below ``rel_floor``
    times the largest are dropped (they carry no spread); the remaining ones
    use the inclusion-exclusion formula for sums of uniforms.
    """
    s = np.asarray(s, dtype=float)
    a = -np.sort(-np.asarray(a, dtype=float), axis=1)
    out = np.full(len(s), np.nan)
    amax = a[:, 0]
    keep = (a >= rel_floor * amax[:, None]) & (amax[:, None] > 0)
    dk = keep.sum(axis=1)
    for m in range(1, a.shape[1] + 1):
        rows = np.nonzero(dk == m)[0]
        if not len(rows):
            continue
        am = a[rows, :m]
        x = s[rows] + 0.5 * am.sum(axis=1)
        acc = np.zeros(len(rows))
        for eps in itertools.product((0, 1), repeat=m):
            e = np.array(eps)
            acc += (-1) ** e.sum() * np.maximum(x - am @ e, 0.0) ** m
        out[rows] = np.clip(acc / (math.factorial(m) * np.prod(am, axis=1)), 0.0, 1.0)
    return out


def build_domain(rho, bbox, h, dim_kind, names=None, fixed=None, clip=False,
                 offset=None) -> GridDomain:
    """Discretise ``{rho < 0}`` inside ``bbox`` with cells of width about ``h``.

    Cut cells get the exact volume fraction under the linearisation of
    ``rho`` at the cell centre (gradient from the ``3^d`` subgrid samples),
    falling back to the sampled interior fraction where ``rho`` is not
    finite or the two disagree by more than 0.35 (kinks, high curvature).

    The cell count per axis is ``round(width / h)``, so the grid is aligned with
    the box corners.  With ``clip=False`` any inside cell on the outer layer
    raises :class:`TruncatedDomainError`; ``clip=True`` intersects with the box.
    ``rho`` is evaluated at ``x - offset`` (real coordinates).
    """
    kind = DimKind.parse(dim_kind)
    names = tuple(names or kind.default_names())
    rho = _as_rho(rho, kind, names)
    fixed = dict(fixed or {})
    d = kind.real_dim
    bbox = np.asarray(bbox, dtype=float).reshape(-1, 2)
    if bbox.shape[0] == 1 and d > 1:
        bbox = np.repeat(bbox, d, axis=0)
    if bbox.shape[0] != d:
        raise ValueError(f"bbox has {bbox.shape[0]} axes, domain needs {d}")
    if h <= 0:
        raise ValueError("h must be positive")
    widths = bbox[:, 1] - bbox[:, 0]
    counts = np.maximum(1, np.round(widths / h).astype(int))
    spacing = widths / counts
    if np.ptp(spacing) > 1e-9 * spacing.max():
        # keep square cells: enlarge the box symmetrically
        hs = spacing.max()
        counts = np.ceil(widths / hs - 1e-9).astype(int)
        pad = 0.5 * (counts * hs - widths)
        bbox = np.column_stack([bbox[:, 0] - pad, bbox[:, 1] + pad])
        spacing = np.full(d, hs)
    hh = float(spacing[0])
    shape = tuple(int(c) for c in counts)

    axes = [bbox[i, 0] + (np.arange(shape[i]) + 0.5) * hh for i in range(d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)

    off = None if offset is None else np.asarray(offset, dtype=float)

    def rho_at(pts):
        if off is not None:
            pts = pts - off
        b = dict(fixed)
        b.update(_to_binding(pts, kind, names))
        vals = np.asarray(rho(**b), dtype=float)
        return np.broadcast_to(vals, (len(pts),)).copy()

    R = rho_at(mesh)
    if np.any(np.isnan(R)):
        raise QuadratureError("defining function is NaN at some grid node")
    inside = R < 0
    weights = np.where(inside, hh**d, 0.0)
    pts = mesh.copy()

    # cut-cell candidates: nodes within reach of the zero level set
    Rg = R.reshape(shape)
    Rf = np.where(np.isfinite(Rg), Rg, np.sign(Rg) * 1e300)
    if min(shape) >= 2:
        grads = np.gradient(np.clip(Rf, -1e6, 1e6), hh)
        grads = list(grads) if isinstance(grads, (list, tuple)) else [grads]
        gmag = np.sqrt(sum(g * g for g in grads))
        gmag = ndimage.maximum_filter(gmag, size=3, mode="nearest")
    else:
        gmag = np.full(shape, np.inf)
    reach = 1.5 * gmag * hh * math.sqrt(d) / 2 + 1e-14
    ins = inside.reshape(shape)
    lo = ndimage.minimum_filter(ins.astype(np.int8), size=3, mode="nearest")
    hi = ndimage.maximum_filter(ins.astype(np.int8), size=3, mode="nearest")
    sign_change = lo != hi
    cand = ((np.abs(Rf) <= reach) | sign_change).ravel()
    idx = np.nonzero(cand)[0]
    sampled = weights > 0
    if len(idx):
        grid3 = np.array(list(itertools.product((-1, 0, 1), repeat=d)))
        offs = grid3 * (hh / 3)
        centre = int(np.nonzero(np.all(grid3 == 0, axis=1))[0][0])
        axis_p = [int(np.nonzero((grid3[:, i] == 1) & (np.abs(grid3).sum(axis=1) == 1))[0][0])
                  for i in range(d)]
        axis_m = [int(np.nonzero((grid3[:, i] == -1) & (np.abs(grid3).sum(axis=1) == 1))[0][0])
                  for i in range(d)]
        chunk = max(1, 200_000 // len(offs))
        for start in range(0, len(idx), chunk):
            sel = idx[start:start + chunk]
            sub = (mesh[sel][:, None, :] + offs[None, :, :]).reshape(-1, d)
            sub_r = rho_at(sub).reshape(len(sel), len(offs))
            sub_in = sub_r < 0
            frac = sub_in.mean(axis=1)
            sampled[sel] = frac > 0
            # exact fraction of the cell under the linearised defining function
            g = (sub_r[:, axis_p] - sub_r[:, axis_m]) / (2 * hh / 3)
            lin = _halfspace_fraction(-sub_r[:, centre], np.abs(g) * hh)
            ok = np.all(np.isfinite(sub_r), axis=1) & np.isfinite(lin) & (np.abs(lin - frac) <= 0.35)
            frac = np.where(ok, lin, frac)
            weights[sel] = frac * hh**d
            partial = (frac > 0) & (frac < 1)
            for k in np.nonzero(partial)[0]:
                node = sel[k]
                members = sub.reshape(len(sel), len(offs), d)[k][sub_in[k]]
                if len(members) == 0:
                    # sliver: step from the node across the interface along -grad rho
                    gk = g[k] / max(np.linalg.norm(g[k]), 1e-300)
                    step = sub_r[k, centre] / max(np.linalg.norm(g[k]), 1e-300) + hh / 12
                    pts[node] = mesh[node] - min(step, hh / 2) * gk
                    continue
                c = members.mean(axis=0)
                if rho_at(c[None, :])[0] < 0:
                    pts[node] = c
                else:
                    j = np.argmin(((members - c) ** 2).sum(axis=1))
                    pts[node] = members[j]
            full = frac == 1
            pts[sel[full]] = mesh[sel[full]]

    cell_w = weights.reshape(shape)
    if not np.any(weights > 0):
        raise EmptyDomainError("domain has no interior cells")
    if not clip:
        border = np.zeros(shape, dtype=bool)
        for ax in range(d):
            sl = [slice(None)] * d
            sl[ax] = 0
            border[tuple(sl)] = True
            sl[ax] = -1
            border[tuple(sl)] = True
        # slivers from the linearised fraction alone do not count as truncation
        if np.any(sampled.reshape(shape)[border]):
            raise TruncatedDomainError("domain truncated: interior cells touch the bounding box")
    keep = weights > 0
    return GridDomain(
        rho=rho,
        bbox=bbox,
        h=hh,
        dim_kind=kind,
        names=names,
        shape=shape,
        mask=keep.reshape(shape),
        cell_weights=cell_w,
        points=pts[keep],
        weights=weights[keep],
        fixed=fixed,
        clip=clip,
        offset=off,
    )


def ball_domain(center, radius, h, dim_kind, names=None) -> GridDomain:
    """Ball ``|x - center| < radius`` on a grid having ``center`` as a vertex."""
    kind = DimKind.parse(dim_kind)
    names = tuple(names or kind.default_names())
    d = kind.real_dim
    if kind.field == COMPLEX:
        c = np.atleast_1d(np.asarray(center, dtype=complex))
        shift = np.column_stack([c.real, c.imag]).ravel()
    else:
        shift = np.atleast_1d(np.asarray(center, dtype=float))
    shift = np.broadcast_to(shift, (d,)).astype(float)
    text = " + ".join(f"abs2({nm})" for nm in names) + f" - {float(radius) ** 2!r}"
    cells = 2 * int(math.ceil((radius + 1.5 * h) / h))
    half = cells * h / 2
    bbox = np.column_stack([shift - half, shift + half])
    return build_domain(text, bbox, h, kind, names=names, offset=shift)


# ------------------------------------------------------------- integration


def integrate(f, dom: GridDomain, guard=True):
    """Node-weighted sum of ``f`` over ``dom``.

    ``f`` is an :class:`Expression`, a callable on :meth:`GridDomain.coords`, or
    an array of node values.  ``-inf`` exponents are fine (density 0); ``+inf``
    or NaN samples raise.  With ``guard`` a sample above ``h^-(d+1)`` raises
    :class:`SingularSampleError`; use :func:`divergence_probe` for those.
    """
    values = dom.evaluate(f)
    if np.iscomplexobj(values):
        bad = ~np.isfinite(values)
    else:
        bad = ~np.isfinite(values) & ~(values == -np.inf) | np.isnan(values)
        bad |= values == np.inf
    if np.any(bad):
        raise SingularSampleError("non-integrable sample: +inf or NaN density at a node")
    if guard and np.any(np.abs(values) > dom.h ** -(dom.d + 1)):
        raise SingularSampleError("sample exceeds the singularity guard; use divergence_probe")
    return np.sum(values * dom.weights)


def log_integrate(log_f, dom: GridDomain):
    """``log`` of the integral of ``exp(log_f)``, computed stably."""
    lf = dom.evaluate(log_f).astype(float)
    if np.any(np.isnan(lf)):
        raise SingularSampleError("NaN log-density at a node")
    if np.any(lf == np.inf):
        return np.inf
    return float(logsumexp(lf + np.log(dom.weights)))


def _exp(x):
    return math.exp(x) if x < 700 else math.inf


@dataclass
class ProbeResult:
    status: str  # converged | diverging | inconclusive
    value: float
    rate: float
    hs: list
    log_integrals: list
    log_sup: list

    @property
    def converged(self):
        return self.status == "converged"


def divergence_probe(f=None, dom: GridDomain = None, h_sequence=None, log_f=None,
                     slope_floor=0.02, domains=None) -> ProbeResult:
    """Classify the integral of a density over ``dom`` as converging or diverging.

    The domain is rebuilt for every ``h`` in ``h_sequence``.  If the node
    maximum of the density stays bounded under refinement the integral is
    classified as converged.  Otherwise the increments of the integral are
    fitted as ``C h^s``: ``s > slope_floor`` means converged (the value is the
    extrapolated limit), otherwise diverging with growth exponent ``-s``
    (0 for logarithmic growth).  Pass ``log_f`` instead of ``f`` to avoid
    overflow.  ``domains`` may supply the refined domains, one per ``h``.
    """
    if domains is not None:
        h_sequence = [dk.h for dk in domains]
        dom = dom if dom is not None else domains[0]
    hs = [float(h) for h in h_sequence]
    if len(hs) < 3 or any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("h_sequence must be strictly decreasing with length >= 3")
    if (f is None) == (log_f is None):
        raise ValueError("give exactly one of f and log_f")
    L, M = [], []
    for i, h in enumerate(hs):
        dk = domains[i] if domains is not None else dom.refined(h)
        if log_f is not None:
            lf = np.asarray(dk.evaluate(log_f), dtype=float)
        else:
            vals = np.asarray(dk.evaluate(f), dtype=float)
            if np.any(vals < 0):
                raise QuadratureError("divergence_probe needs a nonnegative density")
            with np.errstate(divide="ignore"):
                lf = np.log(vals)
        if np.any(np.isnan(lf)):
            return ProbeResult("inconclusive", math.nan, math.nan, hs, L, M)
        if np.any(lf == np.inf):
            return ProbeResult("diverging", math.inf, math.inf, hs, L, M)
        L.append(float(logsumexp(lf + np.log(dk.weights))))
        M.append(float(lf.max()))
    dM = np.diff(M)
    scale = max(1.0, max(abs(m) for m in M))
    if abs(dM[-1]) < 1e-6 * scale or abs(dM[-1]) <= 0.6 * abs(dM[-2]):
        # node maximum settles: bounded density
        return ProbeResult("converged", _exp(L[-1]), 0.0, hs, L, M)

    shift = max(L)
    I = np.exp(np.array(L) - shift)
    dI = np.diff(I)
    ratios = np.array(hs[1:]) / np.array(hs[:-1])
    tiny = np.abs(dI) < 1e-9 * I.max()
    alpha_sup = float(np.mean(dM / -np.log(ratios)))
    d = dom.d
    if np.any(tiny) or (np.any(dI > 0) and np.any(dI < 0)):
        if alpha_sup < d - 0.5:
            return ProbeResult("converged", _exp(L[-1]), 0.0, hs, L, M)
        return ProbeResult("inconclusive", math.nan, math.nan, hs, L, M)
    if np.all(dI < 0):
        return ProbeResult("converged", _exp(L[-1]), 0.0, hs, L, M)
    x = np.log(np.array(hs[:-1]))
    y = np.log(dI)
    s = float(np.polyfit(x, y, 1)[0]) if len(x) > 1 else math.nan
    if s > slope_floor:
        r = ratios[-1] ** s
        limit = (I[-1] + dI[-1] * r / (1 - r)) * _exp(shift)
        return ProbeResult("converged", float(limit), s, hs, L, M)
    rate = 0.0 if abs(s) <= slope_floor else -s
    return ProbeResult("diverging", math.inf, rate, hs, L, M)


# ------------------------------------------------------------------ spheres


@dataclass(frozen=True, eq=False)
class SphereRule:
    """Equal-weight nodes on the sphere ``|w - center| = radius``.

    Complex dimension 1 (and real 2): the ``m``-th roots of unity.  Complex
    dimension 2: Hopf-fibre product nodes ``(cos t e^{ia}, sin t e^{ib})`` with
    ``sin^2 t`` at ``max(2, m // 4)`` midpoint levels and ``m`` angles each for
    ``a`` and ``b``.  Real 3: a Fibonacci lattice of ``m`` points.
    """

    center: object
    radius: float
    m: int
    dim_kind: DimKind = DimKind(COMPLEX, 1)

    def __post_init__(self):
        if self.m < 8:
            raise ValueError("rule too coarse: need m >= 8")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def directions(self):
        kind = self.dim_kind
        m = self.m
        if (kind.field == COMPLEX and kind.n == 1) or (kind.field == REAL and kind.n == 2):
            w = np.exp(2j * np.pi * np.arange(m) / m)
            if kind.field == REAL:
                return np.column_stack([w.real, w.imag])
            return w
        if kind.field == COMPLEX and kind.n == 2:
            mu = max(2, m // 4)
            u = (np.arange(mu) + 0.5) / mu
            a = 2 * np.pi * np.arange(m) / m
            b = 2 * np.pi * (np.arange(m) + 0.5) / m
            U, A, B = np.meshgrid(u, a, b, indexing="ij")
            c, s = np.sqrt(1 - U.ravel()), np.sqrt(U.ravel())
            return np.column_stack([c * np.exp(1j * A.ravel()), s * np.exp(1j * B.ravel())])
        if kind.field == REAL and kind.n == 3:
            k = np.arange(m) + 0.5
            zc = 1 - 2 * k / m
            r = np.sqrt(1 - zc * zc)
            th = np.pi * (1 + 5**0.5) * k
            return np.column_stack([r * np.cos(th), r * np.sin(th), zc])
        if kind.field == REAL and kind.n == 1:
            return np.array([[-1.0], [1.0]])
        raise ValueError(f"no sphere rule for {kind}")

    @property
    def nodes(self):
        dirs = self.directions
        c = np.asarray(self.center)
        return c + self.radius * dirs

    @property
    def weights(self):
        n = len(self.directions)
        return np.full(n, 1.0 / n)


def _sphere_values(f, rule):
    nodes = rule.nodes
    if isinstance(f, Expression):
        kind = rule.dim_kind
        names = [nm for nm, _ in f.free_vars]
        if kind.field == COMPLEX and kind.n == 1:
            binding = {names[0]: nodes}
        elif kind.field == COMPLEX:
            binding = {names[j]: nodes[:, j] for j in range(kind.n)}
        else:
            binding = {names[j]: nodes[:, j] for j in range(kind.n)}
        vals = f(**binding)
    else:
        vals = f(nodes)
    return np.broadcast_to(np.asarray(vals, dtype=float), (len(rule.weights),))


def sphere_average(f, rule: SphereRule) -> float:
    """Equal-weight average over the rule; a single ``-inf`` node gives ``-inf``."""
    vals = _sphere_values(f, rule)
    if np.any(np.isnan(vals)) or np.any(vals == np.inf):
        raise QuadratureError("sphere_average needs values in [-inf, inf)")
    if np.any(vals == -np.inf):
        return -math.inf
    return float(np.dot(vals, rule.weights))


def sphere_max(f, rule: SphereRule) -> float:
    vals = _sphere_values(f, rule)
    if np.any(np.isnan(vals)):
        raise QuadratureError("NaN on the sphere")
    return float(vals.max())
