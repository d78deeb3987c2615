"""Families of fibres ``D_t`` with weights ``phi(t, .)`` and scans of ``log K_t``.

A :class:`SliceFamily` couples a joint defining function ``rho(t, z)`` and a
joint weight ``phi(t, z)`` with a rectangular grid of complex parameters
``t``.  :func:`psh_scan` evaluates ``t -> log K_t(z(t), z(t))`` on that grid and
checks that the 5-point Laplacian is nonnegative up to an explicit error
budget, skipping stencils that touch ``-inf`` or empty fibres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bergman import BergmanProblem, kernel_column, kernel_diag, LOG_FLOOR
from .expr import COMPLEX, Expression, parse, wirtinger_fd
from .quadrature import DimKind, EmptyDomainError, GridDomain, build_domain, integrate

__all__ = [
    "VOID",
    "SliceFamily",
    "ScanReport",
    "FieldGrid",
    "t_rect",
    "slice_domain",
    "slice_problem",
    "log_kernel_field",
    "discrete_laplacian",
    "discrete_laplacian_min",
    "tolerance",
    "psh_scan",
    "HessianCheck",
    "hessian_bound_check",
    "MonotoneReport",
    "monotone_limit_suite",
    "FibrationError",
]


class FibrationError(Exception):
    pass


class _Void:
    """Marker for an empty fibre."""

    def __repr__(self):
        return "VOID"

    def __bool__(self):
        return False


VOID = _Void()


def t_rect(center=0j, h_t=0.1, nre=5, nim=5):
    """Rectangular parameter grid ``center + h_t (i + 1j k)``, centred."""
    c = complex(center)
    re = c.real + h_t * (np.arange(nre) - (nre - 1) / 2)
    im = c.imag + h_t * (np.arange(nim) - (nim - 1) / 2)
    return re, im


@dataclass
class SliceFamily:
    """Joint data ``rho(t, z)``, ``phi(t, z)`` and a grid of parameters.

    ``rho`` and ``phi`` are strings or expressions in ``t`` and the fibre
    variables (``z`` for n=1, ``z1, z2`` for n=2), all complex.  In ``"oka"``
    mode the kernel is evaluated at ``z0 + t * direction``.
    """

    rho: object
    phi: object = "0"
    n: int = 1
    bbox: object = ((-1.25, 1.25),)
    t_re: np.ndarray = field(default_factory=lambda: t_rect()[0])
    t_im: np.ndarray = field(default_factory=lambda: t_rect()[1])
    z_mode: str = "fixed"
    z0: object = 0j
    direction: object = 0j
    degree: Optional[int] = None
    h: float = 1 / 32
    normalization: str = "lebesgue"
    t_name: str = "t"

    def __post_init__(self):
        self.kind = DimKind(COMPLEX, self.n)
        self.names = tuple(self.kind.default_names())
        decl = [(self.t_name, COMPLEX)] + [(nm, COMPLEX) for nm in self.names]
        if not isinstance(self.rho, Expression):
            self.rho = parse(self.rho, decl)
        if not isinstance(self.phi, Expression):
            self.phi = parse(self.phi, decl)
        self.t_re = np.asarray(self.t_re, dtype=float)
        self.t_im = np.asarray(self.t_im, dtype=float)
        if self.z_mode not in ("fixed", "oka"):
            raise ValueError("z_mode must be 'fixed' or 'oka'")

    @property
    def h_t(self) -> float:
        steps = np.diff(self.t_re) if len(self.t_re) > 1 else np.diff(self.t_im)
        return float(steps[0])

    def t_values(self):
        """Parameter grid of shape ``(len(t_re), len(t_im))``."""
        return self.t_re[:, None] + 1j * self.t_im[None, :]

    def point(self, t):
        z0 = np.asarray(self.z0, dtype=complex)
        if self.z_mode == "oka":
            return z0 + t * np.asarray(self.direction, dtype=complex)
        return z0


def slice_domain(fam: SliceFamily, t, h=None):
    """Fibre ``D_t`` as a grid domain, or :data:`VOID` if it is empty."""
    try:
        return build_domain(fam.rho, fam.bbox, h or fam.h, fam.kind, names=fam.names,
                            fixed={fam.t_name: complex(t)})
    except EmptyDomainError:
        return VOID


def slice_problem(fam: SliceFamily, t, h=None):
    dom = slice_domain(fam, t, h)
    if dom is VOID:
        return VOID
    return BergmanProblem(dom, fam.phi, fam.degree, fam.normalization)


def _log_k(fam, t, h=None):
    p = slice_problem(fam, t, h)
    if p is VOID:
        return math.nan
    z = fam.point(t)
    if p.dom.rho_values(_real_pt(z, fam.n))[0] >= 0:
        return math.nan  # evaluation point outside the fibre
    return kernel_diag(p, z).log_value


def _real_pt(z, n):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return np.column_stack([z.real, z.imag]).reshape(1, 2 * n)


@dataclass
class FieldGrid:
    """Values of ``log K_t`` on the parameter grid; NaN marks void fibres."""

    t_re: np.ndarray
    t_im: np.ndarray
    values: np.ndarray

    @property
    def void(self):
        return np.isnan(self.values)

    @property
    def neg_inf(self):
        return self.values == -np.inf


def log_kernel_field(fam: SliceFamily, h=None) -> FieldGrid:
    """``log K_t(z(t), z(t))`` at every parameter; ``-inf`` propagated."""
    T = fam.t_values()
    vals = np.empty(T.shape)
    for idx in np.ndindex(T.shape):
        vals[idx] = _log_k(fam, T[idx], h)
    if np.all(np.isnan(vals)):
        raise FibrationError("all fibres are void")
    return FieldGrid(fam.t_re, fam.t_im, vals)


def discrete_laplacian(values, h_t):
    """5-point Laplacian on interior points; NaN where the stencil is invalid."""
    f = np.asarray(values, dtype=float)
    if f.ndim != 2 or min(f.shape) < 3:
        raise FibrationError("need a grid of at least 3x3 values")
    c = f[1:-1, 1:-1]
    st = [f[2:, 1:-1], f[:-2, 1:-1], f[1:-1, 2:], f[1:-1, :-2], c]
    ok = np.all([np.isfinite(s) for s in st], axis=0)
    lap = np.full(c.shape, np.nan)
    with np.errstate(invalid="ignore"):
        full = (st[0] + st[1] + st[2] + st[3] - 4 * c) / h_t**2
    lap[ok] = full[ok]
    return lap


def discrete_laplacian_min(values, h_t):
    """Return ``(min, argmin, skipped)`` of the 5-point Laplacian.

    ``argmin`` indexes the full grid; ``skipped`` counts stencils touching
    ``-inf`` or void cells.
    """
    lap = discrete_laplacian(values, h_t)
    ok = np.isfinite(lap)
    if not np.any(ok):
        raise FibrationError("field too singular: no valid stencil")
    k = np.nanargmin(np.where(ok, lap, np.nan))
    i, j = np.unravel_index(k, lap.shape)
    return float(lap[i, j]), (int(i) + 1, int(j) + 1), int((~ok).sum())


def tolerance(field_values, h_t, quad_err, c1=5.0, c2=5.0):
    """Error budget ``c1 h_t^2 |field| + c2 8 quad_err / h_t^2``.

    The second term is the worst case of a node error ``quad_err`` passed
    through the 5-point stencil.
    """
    f = np.asarray(field_values, dtype=float)
    fin = f[np.isfinite(f)]
    scale = float(np.max(np.abs(fin))) if fin.size else 0.0
    return c1 * h_t**2 * max(scale, 1.0) + c2 * 8.0 * quad_err / h_t**2


def truncation_error(values, h_t):
    """Leading 5-point stencil error ``h_t^2 / 12 (|f_xxxx| + |f_yyyy|)``.

    The fourth derivatives are fourth differences along every row and column
    with five finite values; the largest of each is used.
    """
    f = np.asarray(values, dtype=float)
    out = 0.0
    for g in (f, f.T):
        if g.shape[0] < 5:
            raise FibrationError("need five values along each axis")
        with np.errstate(invalid="ignore"):
            d4 = (g[4:] - 4 * g[3:-1] + 6 * g[2:-2] - 4 * g[1:-3] + g[:-4]) / h_t**4
        d4 = d4[np.isfinite(d4)]
        out += float(np.max(np.abs(d4))) if d4.size else 0.0
    return h_t**2 / 12 * out


def _quad_error(fam, samples=3):
    """Largest change of the field between mesh ``h`` and ``2h`` at a few parameters."""
    T = fam.t_values().ravel()
    idx = np.linspace(0, len(T) - 1, samples).round().astype(int)
    errs = []
    for t in T[idx]:
        a, b = _log_k(fam, t), _log_k(fam, t, 2 * fam.h)
        if np.isfinite(a) and np.isfinite(b):
            errs.append(abs(a - b))
    return max(errs) if errs else 0.0


@dataclass
class ScanReport:
    t_re: np.ndarray
    t_im: np.ndarray
    field: np.ndarray
    laplacian: np.ndarray
    min_laplacian: float
    argmin: complex
    tol: float
    verdict: str
    neg_inf_cells: int
    skipped: int
    quad_err: float = 0.0

    @property
    def passed(self):
        return self.verdict == "pass"

    def rows(self):
        """``(t_re, t_im, field, laplacian)`` rows; interior Laplacian, NaN elsewhere."""
        lap = np.full(self.field.shape, np.nan)
        lap[1:-1, 1:-1] = self.laplacian
        out = []
        for i, a in enumerate(self.t_re):
            for j, b in enumerate(self.t_im):
                out.append((float(a), float(b), float(self.field[i, j]), float(lap[i, j])))
        return out


def scan_field(t_re, t_im, values, h_t, tol) -> ScanReport:
    """Verdict for a precomputed field on a parameter grid."""
    values = np.asarray(values, dtype=float)
    lap = discrete_laplacian(values, h_t)
    mn, (i, j), skipped = discrete_laplacian_min(values, h_t)
    return ScanReport(
        t_re=np.asarray(t_re), t_im=np.asarray(t_im), field=values, laplacian=lap,
        min_laplacian=mn, argmin=complex(t_re[i], t_im[j]), tol=float(tol),
        verdict="pass" if mn >= -tol else "fail",
        neg_inf_cells=int(np.sum(values == -np.inf)), skipped=skipped,
    )


def psh_scan(fam: SliceFamily, tol=None, c1=5.0, c2=5.0) -> ScanReport:
    """Discrete-Laplacian test of ``t -> log K_t`` on the family's grid."""
    fg = log_kernel_field(fam)
    q = _quad_error(fam)
    if tol is None:
        tol = tolerance(fg.values, fam.h_t, q, c1, c2)
    rep = scan_field(fam.t_re, fam.t_im, fg.values, fam.h_t, tol)
    rep.quad_err = q
    return rep


# ------------------------------------------------------------ Hessian bound


@dataclass
class HessianCheck:
    lhs: float
    rhs: float
    margin: float
    tol: float

    @property
    def passed(self):
        return self.margin >= -self.tol


def _weight_hessian(fam, t0, z, hd=1e-3):
    """``phi_tt, phi_tz, phi_zz`` (Wirtinger, ``d^2/da d(conj b)``) at nodes ``z``."""
    b = {fam.t_name: np.full(len(z), complex(t0)), fam.names[0]: z}
    tt = np.real(wirtinger_fd(fam.phi, b, fam.t_name, fam.t_name, hd))
    zz = np.real(wirtinger_fd(fam.phi, b, fam.names[0], fam.names[0], hd))
    tz = wirtinger_fd(fam.phi, b, fam.t_name, fam.names[0], hd)
    return tt, tz, zz


def _hessian_parts(fam, t0, z0, h_t, h):
    dom = slice_domain(fam, t0, h)
    p = BergmanProblem(dom, fam.phi, fam.degree, fam.normalization)
    k = {}
    for dt in (0, h_t, -h_t, 1j * h_t, -1j * h_t):
        pt = BergmanProblem(slice_domain(fam, t0 + dt, h), fam.phi, fam.degree,
                            fam.normalization)
        k[dt] = kernel_diag(pt, z0).value
    lhs = (k[h_t] + k[-h_t] + k[1j * h_t] + k[-1j * h_t] - 4 * k[0]) / (4 * h_t**2)
    z = dom.coords()
    tt, tz, zz = _weight_hessian(fam, t0, z)
    if np.any(zz <= 0):
        raise FibrationError("weight not strictly psh: phi_zz <= 0 at a node")
    D = tt - np.abs(tz) ** 2 / zz
    col = kernel_column(p, z0)
    with np.errstate(over="ignore"):
        w = np.exp(-np.asarray(p.phi(z), dtype=float))
    rhs = float(np.real(integrate(np.abs(col) ** 2 * D * w, dom)))
    return lhs, rhs


def hessian_bound_check(fam: SliceFamily, t0=0j, z0=0j, h_t=0.05, c=5.0) -> HessianCheck:
    """Compare ``d^2 K_t / dt d(conj t)`` with ``int |K(., z0)|^2 D e^{-phi}``.

    ``D = phi_tt - |phi_tz|^2 / phi_zz``.  The tolerance is ``c`` times the
    sum of the finite-difference error (``h_t`` against ``h_t / 2``) and the
    quadrature error of the margin (mesh ``h`` against ``2h``).
    """
    if fam.n != 1:
        raise FibrationError("Hessian bound implemented for one fibre variable")
    lhs, rhs = _hessian_parts(fam, t0, z0, h_t, fam.h)
    lhs2, _ = _hessian_parts(fam, t0, z0, h_t / 2, fam.h)
    lhs_c, rhs_c = _hessian_parts(fam, t0, z0, h_t, 2 * fam.h)
    fd_err = abs(lhs - lhs2)
    q_err = abs((lhs - rhs) - (lhs_c - rhs_c))
    tol = c * (fd_err + q_err) + 1e-10 * abs(lhs)
    return HessianCheck(lhs=lhs, rhs=rhs, margin=lhs - rhs, tol=tol)


# ------------------------------------------------------------ monotone limits


@dataclass
class MonotoneReport:
    scenario: str
    ladder: list
    values: list
    limit: float
    direction: str
    monotone: bool
    converged: bool
    rel_gap: float
    tol: float

    @property
    def passed(self):
        return self.monotone and self.converged


_SCENARIOS = {
    # cutoff weights phi_j = j max(rho, 0)^2 with rho = |z|^2 - 1/4 on the unit disk
    "cutoff-weights": dict(ladder=[1, 10, 100, 1_000, 10_000, 100_000, 1_000_000],
                           direction="increasing", limit=4 / math.pi),
    # increasing domains disk(1 - 1/(j+1)) inside the unit disk
    "increasing-domains": dict(ladder=[2**k for k in range(9)], direction="decreasing",
                               limit=1 / math.pi),
    # decreasing weights |z|^2 / j on the unit disk
    "decreasing-weights": dict(ladder=[2**k for k in range(11)], direction="decreasing",
                               limit=1 / math.pi),
}


def _scenario_problem(name, j, h, degree):
    bbox = [[-1.125, 1.125]]
    if name == "cutoff-weights":
        dom = build_domain("abs2(z)-1", bbox, h, "complex-1")
        return BergmanProblem(dom, f"{float(j)!r}*max(abs2(z)-0.25, 0)^2", degree)
    if name == "increasing-domains":
        r = 1 - 1 / (j + 1)
        dom = build_domain(f"abs2(z)-{r * r!r}", bbox, h, "complex-1")
        return BergmanProblem(dom, None, degree)
    if name == "decreasing-weights":
        dom = build_domain("abs2(z)-1", bbox, h, "complex-1")
        return BergmanProblem(dom, f"abs2(z)/{float(j)!r}", degree)
    raise FibrationError(f"unknown scenario {name!r}")


def _check_weight_order(name, ladder, h, degree):
    """Spot-check pointwise monotonicity of the weights at 100 nodes."""
    if name == "increasing-domains":
        return
    rng = np.random.default_rng(1)
    probs = [_scenario_problem(name, j, h, degree) for j in ladder]
    z = probs[0].dom.coords()
    sel = z[rng.choice(len(z), size=min(100, len(z)), replace=False)]
    vals = np.array([p.phi(sel) for p in probs])
    d = np.diff(vals, axis=0)
    want_up = _SCENARIOS[name]["direction"] == "increasing"
    if (want_up and np.any(d < -1e-12)) or (not want_up and np.any(d > 1e-12)):
        raise FibrationError(f"scenario {name!r}: weights are not monotone in j")


def monotone_limit_suite(scenario: str, ladder=None, h=1 / 64, degree=8, slack=1e-8,
                         quad_tol=0.01) -> MonotoneReport:
    """Kernel ladders ``K_j(0, 0)`` for the three monotone-limit scenarios.

    ``"cutoff-weights"`` increases to the kernel of the half disk ``4/pi``;
    ``"increasing-domains"`` and ``"decreasing-weights"`` decrease to the
    unit-disk value ``1/pi``.  Monotonicity is checked with ``slack``; the
    last value must be within ``2 * quad_tol`` (relative) of the limit.
    """
    spec = _SCENARIOS.get(scenario)
    if spec is None:
        raise FibrationError(f"unknown scenario {scenario!r}")
    ladder = list(ladder or spec["ladder"])
    _check_weight_order(scenario, ladder, h, degree)
    vals = [kernel_diag(_scenario_problem(scenario, j, h, degree), 0j).value for j in ladder]
    d = np.diff(vals)
    if spec["direction"] == "increasing":
        mono = bool(np.all(d >= -slack * np.abs(vals[1:])))
    else:
        mono = bool(np.all(d <= slack * np.abs(vals[1:])))
    gap = abs(vals[-1] - spec["limit"]) / spec["limit"]
    return MonotoneReport(
        scenario=scenario, ladder=ladder, values=vals, limit=spec["limit"],
        direction=spec["direction"], monotone=mono, converged=gap <= 2 * quad_tol,
        rel_gap=gap, tol=2 * quad_tol,
    )
