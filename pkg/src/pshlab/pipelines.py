"""Config validation and the per-subcommand pipelines behind the CLI.

A config is a JSON object.  ``{"catalog": name}`` starts from the shipped
entry's parameters; any other key overrides it.  Unknown keys are rejected
and numeric fields are range-checked before any computation starts.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import catalog
from .bergman import BergmanProblem, kernel_diag
from .expr import ExpressionError
from .fibration import SliceFamily, psh_scan, t_rect
from .lelong import PshSample, attenuated, integrability_index, lelong_number
from .potential import (EnergyFamily, GreenProblem, Mass, RobinProblem,
                        SupportError, UnsupportedFamilyError, energy, energy_scan,
                        green_potential, harmonic_center, robin_convexity_scan, robin_function)
from .prekopa import MarginalProblem, convexity_check, marginal, minimum_principle_limit
from .quadrature import DimKind, QuadratureError, build_domain
from .report import Report

__all__ = ["ConfigError", "SCHEMAS", "resolve_config", "PIPELINES"]


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------- validators


def _str(v):
    if not isinstance(v, str) or not v.strip():
        raise ConfigError("expected a nonempty string")
    return v


def _num(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError("expected a number")
    return float(v)


def _pos(v):
    v = _num(v)
    if not v > 0:
        raise ConfigError("expected a positive number")
    return v


def _posint(v):
    if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
        raise ConfigError("expected a positive integer")
    return v


def _bool(v):
    if not isinstance(v, bool):
        raise ConfigError("expected true or false")
    return v


def _complex(v):
    """A complex scalar: a number, a string like ``"0.3+0.1j"`` or ``{"re": .., "im": ..}``."""
    if isinstance(v, dict):
        if set(v) != {"re", "im"}:
            raise ConfigError("complex numbers as objects need keys re and im")
        return complex(_num(v["re"]), _num(v["im"]))
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", ""))
        except ValueError:
            raise ConfigError(f"bad complex number {v!r}") from None
    return complex(_num(v))


def _cvec(v):
    """A point of C^1 (complex scalar) or C^2 (list of two complex scalars)."""
    if isinstance(v, list):
        if len(v) != 2:
            raise ConfigError("points in C^2 are [z1, z2]")
        return [_complex(x) for x in v]
    return _complex(v)


def _bbox(v):
    if not isinstance(v, list) or not v:
        raise ConfigError("bbox must be a list of [lo, hi] pairs")
    out = []
    for p in v:
        if not isinstance(p, list) or len(p) != 2:
            raise ConfigError("bbox must be a list of [lo, hi] pairs")
        lo, hi = _num(p[0]), _num(p[1])
        if not hi > lo:
            raise ConfigError("bbox needs lo < hi")
        out.append([lo, hi])
    return out


def _grid(v):
    if isinstance(v, dict):
        extra = set(v) - {"start", "stop", "num"}
        if extra or len(v) != 3:
            raise ConfigError("grid must have keys start, stop, num")
        g = np.linspace(_num(v["start"]), _num(v["stop"]), _posint(v["num"]))
    elif isinstance(v, list):
        g = np.array([_num(x) for x in v])
    else:
        raise ConfigError("grid must be {start, stop, num} or a list")
    if len(g) < 3 or np.any(np.diff(g) <= 0):
        raise ConfigError("grid needs at least 3 increasing values")
    if not np.allclose(np.diff(g), g[1] - g[0], rtol=1e-9, atol=1e-12):
        raise ConfigError("grid must be equally spaced")
    return g


def _list(item):
    def f(v):
        if not isinstance(v, list):
            raise ConfigError("expected a list")
        return [item(x) for x in v]
    return f


def _opt(fn):
    return lambda v: None if v is None else fn(v)


def _one_of(*opts):
    def f(v):
        if v not in opts:
            raise ConfigError(f"expected one of {', '.join(map(str, opts))}")
        return v
    return f


def _point3(v):
    if not isinstance(v, list) or len(v) != 3:
        raise ConfigError("expected [x, y, z]")
    return [_num(x) for x in v]


def _segment(v):
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError("a segment is [[x, y, z], [x, y, z]]")
    return [_point3(v[0]), _point3(v[1])]


def _mass(v):
    if not isinstance(v, dict):
        raise ConfigError("mass must be an object")
    allowed = {"kind": _one_of("point", "ring", "ball", "zero"), "center": _list(_num),
               "radius": _pos, "width": _pos, "total": _pos}
    return _check(v, allowed, "mass")


def _family(v):
    if not isinstance(v, dict):
        raise ConfigError("family must be an object")
    allowed = {"rho": _str, "v": _str, "mode": _one_of("complex", "real"), "t_re": _grid,
               "t_im": _grid, "shape": _one_of("graph", "convex")}
    out = _check(v, allowed, "family")
    if ("rho" in out) == ("v" in out) and "shape" not in out:
        raise ConfigError("family needs exactly one of rho or v")
    return out


def _check(d, allowed, where):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    out = {}
    for k, v in d.items():
        try:
            out[k] = allowed[k](v)
        except ConfigError as e:
            raise ConfigError(f"{where}.{k}: {e}") from None
    return out


SCHEMAS: dict[str, dict[str, Callable]] = {
    "psh-scan": dict(rho=_str, phi=_str, n=_one_of(1, 2), bbox=_bbox, t_center=_complex, h_t=_pos,
                     nre=_posint, nim=_posint, t_re=_grid, t_im=_grid,
                     z_mode=_one_of("fixed", "oka"), z0=_cvec, direction=_cvec,
                     degree=_posint, h=_pos, normalization=_one_of("lebesgue", "unit-total-mass"),
                     tol=_opt(_pos)),
    "bergman": dict(rho=_str, phi=_str, n=_one_of(1, 2), bbox=_bbox, h=_pos, degree=_posint,
                    normalization=_one_of("lebesgue", "unit-total-mass"), points=_list(_cvec),
                    expected=_opt(_list(_pos)), tol=_pos),
    "prekopa": dict(phi=_str, x_grid=_grid, y_box=_bbox, h_y=_pos, tol=_pos,
                    p_ladder=_opt(_list(_pos))),
    "lelong": dict(phi=_str, tau_ladder=_list(_num), n=_one_of(1, 2), a=_cvec, r0=_pos, K=_posint,
                   m=_posint, h=_pos, index=_bool, expected=_opt(_num), tol=_pos,
                   eps=_list(_pos), degree=_posint),
    "green": dict(rho=_str, d=_one_of(2, 3), bbox=_bbox, h=_pos, mass=_mass, family=_family,
                  expected_energy=_opt(_num), tol=_opt(_pos)),
    "robin": dict(rho=_str, bbox=_bbox, h=_pos, points=_list(_point3),
                  expected=_opt(_list(_pos)), tol=_pos, segments=_list(_segment),
                  center=_bool, center_expected=_opt(_point3)),
}

REQUIRED = {
    "psh-scan": ("rho",),
    "bergman": ("rho", "points"),
    "prekopa": ("phi", "x_grid", "y_box"),
    "lelong": ("phi",),
    "green": (),
    "robin": ("rho",),
}


def resolve_config(command: str, raw: dict, overrides: dict | None = None) -> dict:
    """Merge a catalog entry, the raw config and CLI overrides; validate."""
    if command not in SCHEMAS:
        raise ConfigError(f"no config schema for {command!r}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    base = {}
    if "catalog" in raw:
        name = raw.pop("catalog")
        try:
            e = catalog.get(name)
        except catalog.CatalogError as err:
            raise ConfigError(str(err)) from None
        if e.command != command:
            raise ConfigError(f"catalog entry {name!r} is for {e.command!r}, not {command!r}")
        base = dict(e.params)
    base.update(raw)
    schema = SCHEMAS[command]
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in schema:
            raise ConfigError(f"--{k} does not apply to {command}")
        base[k] = v
    cfg = _check(base, schema, command)
    for k in REQUIRED[command]:
        if k not in cfg:
            raise ConfigError(f"{command}: missing required key {k!r}")
    if command == "green" and "family" not in cfg and "rho" not in cfg:
        raise ConfigError("green: give rho or a family")
    return cfg


# -------------------------------------------------------------- pipelines


def _fmt_t(t):
    return f"t={complex(t).real:.6g}{complex(t).imag:+.6g}i"


def run_psh_scan(cfg) -> Report:
    re_, im_ = t_rect(cfg.get("t_center", 0j), cfg.get("h_t", 0.1), cfg.get("nre", 5), cfg.get("nim", 5))
    fam = SliceFamily(
        cfg["rho"], cfg.get("phi", "0"), cfg.get("n", 1), cfg.get("bbox", [[-1.25, 1.25]]),
        cfg.get("t_re", re_), cfg.get("t_im", im_), cfg.get("z_mode", "fixed"), cfg.get("z0", 0j),
        cfg.get("direction", 0j), cfg.get("degree"), cfg.get("h", 1 / 32),
        cfg.get("normalization", "lebesgue"))
    r = psh_scan(fam, cfg.get("tol"))
    rep = Report("psh-scan", columns=["t_re", "t_im", "log_K", "laplacian"])
    lap = np.full(r.field.shape, np.nan)
    lap[1:-1, 1:-1] = r.laplacian
    for i, a in enumerate(r.t_re):
        for j, b in enumerate(r.t_im):
            rep.rows.append([a, b, r.field[i, j], lap[i, j]])
    rep.add("scan", "discrete Laplacian in t", r.verdict,
            _fmt_t(r.argmin) if r.verdict == "fail" else None,
            dict(min_laplacian=r.min_laplacian, argmin=r.argmin, tol=r.tol, quad_err=r.quad_err,
                 neg_inf_cells=r.neg_inf_cells, skipped=r.skipped))
    rep.provenance.update(h=fam.h, degree=fam.degree, h_t=fam.h_t, tol=r.tol)
    return rep


def _point_cols(n):
    return ["z_re", "z_im"] if n == 1 else ["z1_re", "z1_im", "z2_re", "z2_im"]


def _point_vals(z):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return [v for c in z for v in (c.real, c.imag)]


def run_bergman(cfg) -> Report:
    n = cfg.get("n", 1)
    dom = build_domain(cfg["rho"], cfg.get("bbox", [[-1.125, 1.125]]), cfg.get("h", 1 / 64),
                       DimKind("complex", n))
    p = BergmanProblem(dom, cfg.get("phi", "0"), cfg.get("degree"), cfg.get("normalization", "lebesgue"))
    rep = Report("bergman", columns=_point_cols(n) + ["K", "log_K", "gram_condition", "truncated"])
    exp = cfg.get("expected")
    tol = cfg.get("tol", 0.03)
    if exp is not None and len(exp) != len(cfg["points"]):
        raise ConfigError("expected must have one value per point")
    for i, z in enumerate(cfg["points"]):
        zz = z if n == 1 else np.asarray(z, dtype=complex).reshape(1, 2)
        if n == 2 and not isinstance(z, list):
            raise ConfigError("points in C^2 are [z1, z2]")
        ev = kernel_diag(p, zz)
        rep.rows.append(_point_vals(z) + [ev.value, ev.log_value, ev.gram_condition, ev.truncated])
        if exp is not None:
            err = abs(ev.value - exp[i]) / exp[i]
            ok = err <= tol
            rep.add(f"point-{i}", "kernel against expected value", "pass" if ok else "fail",
                    None if ok else f"z={z}", dict(value=ev.value, expected=exp[i], rel_err=err, tol=tol))
    if exp is None:
        rep.add("evaluated", "kernel evaluated at all points", "pass", None,
                dict(points=len(cfg["points"])))
    rep.provenance.update(h=dom.h, degree=p.degree, nodes=dom.size)
    return rep


def run_prekopa(cfg) -> Report:
    mp = MarginalProblem(cfg["phi"], cfg["x_grid"], cfg["y_box"], cfg.get("h_y", 1 / 64))
    m = marginal(mp)
    c = convexity_check(m, mp.h_x, cfg.get("tol", 1e-6))
    d2 = np.concatenate([[np.nan], c.second_differences, [np.nan]])
    rep = Report("prekopa", columns=["x", "marginal", "second_difference"],
                 rows=[[a, b, e] for a, b, e in zip(mp.x_grid, m, d2)])
    rep.add("convexity", "marginal convexity", c.verdict,
            f"x={mp.x_grid[c.argmin]:.6g}" if not c.passed else None,
            dict(min_second_difference=c.min_second_difference, tol=c.tol))
    if cfg.get("p_ladder"):
        r = minimum_principle_limit(mp, cfg["p_ladder"])
        ok = r.passed
        rep.add("minimum-principle", "p-marginals tend to inf_y phi", "pass" if ok else "fail",
                None if ok else ("p ladder" if not r.monotone else f"p={r.p_ladder[-1]}"),
                dict(monotone=r.monotone, max_gap=r.max_gap, band=r.band, p_ladder=r.p_ladder))
    rep.provenance.update(h_y=mp.h_y, h_x=mp.h_x)
    return rep


def run_lelong(cfg) -> Report:
    n = cfg.get("n", 1)
    a = cfg.get("a", 0j if n == 1 else [0j, 0j])
    tol = cfg.get("tol", 0.05)
    if "tau_ladder" in cfg:
        if "{tau}" not in cfg["phi"]:
            raise ConfigError("phi must contain {tau} when tau_ladder is given")
        samples = [(cfg["phi"].format(tau=t), t) for t in cfg["tau_ladder"]]
    else:
        samples = [(cfg["phi"], cfg.get("expected"))]
    rep = Report("lelong", columns=["phi", "quantity", "parameter", "value"])
    kw = {k: cfg[k] for k in ("r0", "K", "m", "h", "degree") if k in cfg}
    for phi, want in samples:
        s = PshSample(phi, n, a, **kw)
        e = lelong_number(s)
        rep.rows += [[phi, "lelong_mean", "", e.estimate], [phi, "lelong_sup", "", e.sup_estimate]]
        if not math.isfinite(e.estimate) or not e.agree:
            rep.add(f"lelong {phi}", "mean and sup estimators agree", "inconclusive", None,
                    dict(estimate=e.estimate, sup_estimate=e.sup_estimate, flag=e.flag))
        elif want is not None:
            ok = abs(e.estimate - want) <= tol
            rep.add(f"lelong {phi}", "Lelong number", "pass" if ok else "fail",
                    None if ok else f"phi={phi}", dict(estimate=e.estimate, expected=want, tol=tol))
        else:
            rep.add(f"lelong {phi}", "Lelong number", "pass", None, dict(estimate=e.estimate))
        if cfg.get("index"):
            ix = integrability_index(s)
            rep.rows.append([phi, "integrability_index", "", ix.estimate])
            lo, hi = ix.bracket
            w = ix.width
            g = e.estimate
            ok = lo - w <= g + tol and g - tol <= n * (hi + w)
            verdict = "inconclusive" if ix.coarse else ("pass" if ok else "fail")
            rep.add(f"index {phi}", "iota <= gamma <= n iota", verdict,
                    f"phi={phi}" if verdict == "fail" else None,
                    dict(index=ix.estimate, bracket=[lo, hi], gamma=g, n=n))
        if cfg.get("eps"):
            vals = []
            for eps in cfg["eps"]:
                v = attenuated(phi, a if n == 1 else np.asarray(a, dtype=complex), eps, n=n).value
                vals.append(v)
                rep.rows.append([phi, "phi_eps", eps, v])
            order = np.argsort(cfg["eps"])
            vs = [vals[i] for i in order]
            ok = all(y >= x - 1e-6 * (1 + abs(x)) for x, y in zip(vs, vs[1:]) if x > -math.inf)
            rep.add(f"eps-monotone {phi}", "phi_eps increases with eps", "pass" if ok else "fail",
                    None if ok else f"phi={phi}", dict(eps=cfg["eps"], values=vals))
    rep.provenance.update({k: v for k, v in kw.items()})
    return rep


def run_green(cfg) -> Report:
    d = cfg.get("d", 2)
    names = ["x", "y"] if d == 2 else ["x", "y", "z"]
    mass_cfg = dict(cfg.get("mass", {"kind": "point"}))
    mass_cfg.setdefault("center", [0.0] * d)
    mu = Mass(**mass_cfg)
    h = cfg.get("h", 1 / 64)
    bbox = cfg.get("bbox", [[-1.5, 1.5]])
    if "family" in cfg:
        f = dict(cfg["family"])
        kw = dict(d=d, bbox=bbox, h=h, mode=f.get("mode", "complex"))
        for k in ("rho", "v", "shape", "t_re", "t_im"):
            if k in f:
                kw[k] = f[k]
        fam = EnergyFamily(**kw)
        rep = Report("green")
        try:
            r = energy_scan(fam, mu, cfg.get("tol"))
        except UnsupportedFamilyError as e:
            rep.add("energy-scan", "energy scan precondition", "fail", "precondition: condition (C)",
                    dict(error=str(e)))
            return rep
        except SupportError as e:
            rep.add("energy-scan", "energy scan precondition", "fail", "support exits a fiber",
                    dict(error=str(e)))
            return rep
        if fam.mode == "complex":
            rep.columns = ["t_re", "t_im", "u", "laplacian"]
            lap = np.full(r.field.shape, np.nan)
            lap[1:-1, 1:-1] = r.laplacian
            for i, a in enumerate(r.t_re):
                for j, b in enumerate(r.t_im):
                    rep.rows.append([a, b, r.field[i, j], lap[i, j]])
            rep.add("energy-scan", "energy subharmonic in t", r.verdict,
                    _fmt_t(r.argmin) if r.verdict == "fail" else None,
                    dict(min_laplacian=r.min_laplacian, tol=r.tol, delta=r.quad_err))
        else:
            rep.columns = ["t", "u", "second_difference"]
            rep.rows = [list(x) for x in r.rows()]
            rep.add("energy-scan", "energy convex in t", r.verdict,
                    f"t={r.argmin:.6g}" if r.verdict == "fail" else None,
                    dict(min_second_difference=r.min_second_difference, tol=r.tol))
        rep.provenance.update(h=h, mass=mass_cfg)
        return rep
    dom = build_domain(cfg["rho"], bbox, h, DimKind("real", d), names=names)
    rep = Report("green", columns=names + ["g"])
    try:
        gp = GreenProblem(dom, mu)
    except SupportError as e:
        rep.add("green", "Green potential", "fail", "support exits the domain", dict(error=str(e)))
        return rep
    sol = green_potential(gp)
    u = energy(gp, sol)
    lat = gp.lattice
    # values along the first axis through the mass center
    c = np.asarray(mass_cfg["center"], dtype=float)
    xs = lat.axes[0][(lat.axes[0] > c[0]) & (lat.axes[0] < lat.axes[0][-1])]
    pts = np.column_stack([xs] + [np.full(len(xs), ci) for ci in c[1:]])
    g = sol.at(pts)
    inside = dom.rho_values(pts) < 0
    for p, v in zip(pts[inside], g[inside]):
        rep.rows.append(list(p) + [v])
    rep.add("green", "Green potential solved, g <= 0", "pass", None,
            dict(residual=sol.residual, energy=u, total_mass=gp.total_mass))
    if cfg.get("expected_energy") is not None:
        ex = cfg["expected_energy"]
        tol = cfg.get("tol") or 0.05
        err = abs(u - ex) / abs(ex)
        ok = err <= tol
        rep.add("energy", "energy against expected value", "pass" if ok else "fail",
                None if ok else "energy", dict(energy=u, expected=ex, rel_err=err, tol=tol))
    rep.provenance.update(h=h, mass=mass_cfg, residual=sol.residual)
    return rep


def run_robin(cfg) -> Report:
    bbox = cfg.get("bbox", [[-1.25, 1.25]])
    if len(bbox) == 1:
        bbox = bbox * 3
    dom = build_domain(cfg["rho"], bbox, cfg.get("h", 1 / 16), DimKind("real", 3),
                       names=["x", "y", "z"])
    rp = RobinProblem(dom)
    rep = Report("robin", columns=["x1", "x2", "x3", "Lambda"])
    exp = cfg.get("expected")
    pts = cfg.get("points", [])
    if exp is not None and len(exp) != len(pts):
        raise ConfigError("expected must have one value per point")
    tol = cfg.get("tol", 0.03)
    for i, x in enumerate(pts):
        v = robin_function(rp, x)
        rep.rows.append(list(x) + [v])
        if exp is not None:
            err = abs(v - exp[i]) / exp[i]
            ok = err <= tol
            rep.add(f"point-{i}", "Robin function against expected value", "pass" if ok else "fail",
                    None if ok else f"x={x}", dict(value=v, expected=exp[i], rel_err=err, tol=tol))
    if cfg.get("segments"):
        sc = robin_convexity_scan(rp, cfg["segments"], tol=1e-3)
        rep.add("convexity", "Robin function strictly convex on segments", sc.verdict,
                None if sc.passed else "segments", dict(min_second_difference=sc.min_second_difference,
                                                        tol=sc.tol))
    if cfg.get("center"):
        c, v = harmonic_center(rp)
        rep.rows.append(list(c) + [v])
        want = cfg.get("center_expected")
        if want is not None:
            dist = float(np.linalg.norm(c - np.asarray(want)))
            ok = dist <= 2 * rp.h
            rep.add("center", "harmonic center at the symmetry point", "pass" if ok else "fail",
                    None if ok else f"x={c.tolist()}", dict(center=c, distance=dist, tol=2 * rp.h))
        else:
            rep.add("center", "harmonic center located", "pass", None, dict(center=c, value=v))
    if not rep.checks:
        rep.add("evaluated", "Robin function evaluated", "pass", None, dict(points=len(pts)))
    rep.provenance.update(h=rp.h)
    return rep


PIPELINES = {
    "psh-scan": run_psh_scan,
    "bergman": run_bergman,
    "prekopa": run_prekopa,
    "lelong": run_lelong,
    "green": run_green,
    "robin": run_robin,
}

# errors meaning the input itself is unusable; they map to exit code 2
INPUT_ERRORS = (ConfigError, ExpressionError, QuadratureError, catalog.CatalogError, ValueError)
