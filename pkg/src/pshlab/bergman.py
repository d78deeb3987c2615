"""Weighted Bergman kernels from monomial Gram matrices.

For a grid domain ``D`` and a weight ``phi`` the Bergman space is the space of
holomorphic functions with ``int_D |h|^2 e^{-phi} < inf``.  It is approximated
by polynomials of total degree ``<= N`` in coordinates centred at the box
centre and scaled by its half-width.  With ``G`` the Gram matrix of that basis
on the quadrature, ``K(z, z) = b(z)^T G^+ conj(b(z))`` where ``G^+`` inverts
``G`` on eigenvalues above ``1e-12 * lambda_max`` (after Jacobi scaling).
Truncation only shrinks the competitor class, so ``K`` is approximated from
below.

In one variable, a weight with a non-integrable point singularity (for
instance ``2 tau log|z|`` with ``tau >= 1``) is handled by locating the
singular point ``a`` and multiplying the basis by ``(z - a)^m``, where ``m`` is
the least order making ``|z - a|^{2m} e^{-phi}`` integrable.  Every element of
the Bergman space vanishes to that order at ``a``, so the kernel is exactly 0
there.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, optimize

from .expr import COMPLEX, Expression, parse
from .quadrature import GridDomain, ProbeResult, divergence_probe

__all__ = [
    "LOG_FLOOR",
    "BergmanError",
    "NotRadialError",
    "Divisor",
    "BergmanProblem",
    "Gram",
    "KernelEvaluation",
    "gram_matrix",
    "kernel_diag",
    "kernel_offdiag",
    "kernel_column",
    "kernel_diag_radial",
    "extremal_oracle",
    "log_kernel",
]

LOG_FLOOR = -40.0
PSD_CUTOFF = 1e-12
NORMALIZATIONS = ("lebesgue", "unit-total-mass")


class BergmanError(Exception):
    pass


class NotRadialError(BergmanError):
    pass


def multi_indices(n: int, degree: int) -> list:
    """Multi-indices with ``|alpha| <= degree``, graded, then lexicographic."""
    idx = [a for a in itertools.product(range(degree + 1), repeat=n) if sum(a) <= degree]
    return sorted(idx, key=lambda a: (sum(a), tuple(-x for x in a)))


@dataclass(frozen=True)
class Divisor:
    """Point ``a`` where every Bergman function vanishes to order ``order``.

    ``nu`` is the estimated log-singularity coefficient of the weight at ``a``
    (``phi ~ nu log|z - a|``).
    """

    point: complex
    nu: float
    order: int


def _weight_function(weight, dom: GridDomain):
    """Return a callable on complex coordinates giving phi."""
    names = list(dom.names)
    if weight is None:
        return lambda z: np.zeros(np.shape(z) if dom.dim_kind.n == 1 else np.shape(z)[:-1])
    if isinstance(weight, str):
        weight = parse(weight, [(nm, COMPLEX) for nm in names])
    if isinstance(weight, Expression):
        expr = weight

        def f(z):
            z = np.asarray(z, dtype=complex)
            if dom.dim_kind.n == 1:
                binding = {names[0]: z if z.ndim <= 1 else z[..., 0]}
            else:
                binding = {nm: z[..., j] for j, nm in enumerate(names)}
            binding.update(dom.fixed)
            shape = z.shape if dom.dim_kind.n == 1 or z.ndim <= 1 else z.shape[:-1]
            if dom.dim_kind.n == 2 and z.ndim == 1:
                shape = ()
            return np.broadcast_to(np.asarray(expr(**binding), dtype=float), shape).copy()

        return f
    if callable(weight):
        def g(z):
            z = np.asarray(z, dtype=complex)
            shape = z.shape if dom.dim_kind.n == 1 else z.shape[:-1]
            return np.broadcast_to(np.asarray(weight(z), dtype=float), shape).copy()

        return g
    raise TypeError("weight must be an Expression, a string, a callable or None")


def _circle_mean(phi, center, r, m=16):
    w = center + r * np.exp(2j * np.pi * (np.arange(m) + 0.25) / m)
    return float(np.mean(phi(w)))


def find_divisor(phi, dom: GridDomain) -> Optional[Divisor]:
    """Locate a non-integrable point singularity of ``e^{-phi}`` in a planar domain."""
    z = dom.coords()
    vals = np.asarray(phi(z), dtype=float)
    if np.any(np.isnan(vals)):
        raise BergmanError("weight is NaN at a quadrature node")
    i = int(np.argmin(vals))
    if vals[i] == -np.inf:
        a = complex(z[i])
    else:
        # cheap screen: for phi ~ nu log|z - a| with a inside the cell of node i
        # the circle means at 2h and 4h about the node differ by nu log 2
        with np.errstate(divide="ignore", invalid="ignore"):
            m4 = _circle_mean(phi, z[i], 4 * dom.h)
            m2 = _circle_mean(phi, z[i], 2 * dom.h)
        if np.isfinite(m4) and np.isfinite(m2) and (m4 - m2) / math.log(2) < 1.5:
            return None
        lo, hi = dom.bbox[0], dom.bbox[1]

        def obj(x):
            v = float(phi(np.array([x[0] + 1j * x[1]]))[0])
            return v if not math.isnan(v) else math.inf

        x0 = np.array([z[i].real, z[i].imag])
        simplex = np.array([x0, x0 + [dom.h, 0], x0 + [0, dom.h]])
        res = optimize.minimize(
            obj, x0, method="Nelder-Mead",
            bounds=[tuple(lo), tuple(hi)],
            options={"xatol": 1e-12, "fatol": np.inf, "maxiter": 4000,
                     "initial_simplex": simplex},
        )
        a = complex(res.x[0], res.x[1])
        if not np.isfinite(res.fun) and res.fun != -np.inf:
            return None
    pt = np.array([[a.real, a.imag]])
    if dom.rho_values(pt)[0] >= 0:
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        m1 = _circle_mean(phi, a, 1e-4)
        m2 = _circle_mean(phi, a, 1e-6)
    if not (np.isfinite(m1) and np.isfinite(m2)):
        return None
    nu = (m1 - m2) / (math.log(1e-4) - math.log(1e-6))
    if abs(nu - round(nu)) < 1e-3:
        nu = float(round(nu))
    if nu < 2:
        return None
    order = int(math.floor(nu / 2 - 1)) + 1
    return Divisor(point=a, nu=nu, order=order)


class BergmanProblem:
    """Weighted Bergman problem on a complex grid domain.

    Parameters
    ----------
    dom : GridDomain
        Complex dimension 1 or 2.
    weight : Expression, str, callable or None
        The weight ``phi``; the measure is ``e^{-phi} dV``.  Strings are
        parsed with the domain's variable names as complex variables.
    degree : int, optional
        Maximal total degree ``N``; defaults to 8 (n=1) or 4 (n=2).
    normalization : {"lebesgue", "unit-total-mass"}
        The latter divides the measure by the domain volume.
    singular : {"auto", "off"}
        Divisor detection for one-variable weights.
    """

    def __init__(self, dom: GridDomain, weight=None, degree=None, normalization="lebesgue",
                 singular="auto"):
        if dom.dim_kind.field != COMPLEX:
            raise BergmanError("Bergman problems need a complex domain")
        if normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        self.dom = dom
        self.n = dom.dim_kind.n
        self.weight = weight
        self.degree = int(degree if degree is not None else (8 if self.n == 1 else 4))
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        self.normalization = normalization
        self.phi = _weight_function(weight, dom)
        self.divisor = None
        if singular == "auto" and self.n == 1:
            self.divisor = find_divisor(self.phi, dom)
        self.alphas = multi_indices(self.n, self.degree)
        c = dom.center
        self._c = c[0::2] + 1j * c[1::2]
        self._scale = dom.half_width
        self._gram = None

    # basis -----------------------------------------------------------------

    @property
    def size(self):
        return len(self.alphas)

    def _zs(self, z):
        z = np.asarray(z, dtype=complex)
        if self.n == 1:
            z = z.reshape(-1, 1)
        else:
            z = z.reshape(-1, 2)
        return z

    def basis(self, z) -> np.ndarray:
        """Scaled basis values, shape ``(len(z), size)``."""
        z = self._zs(z)
        s = (z - self._c) / self._scale
        cols = []
        for a in self.alphas:
            v = np.ones(len(z), dtype=complex)
            for j, k in enumerate(a):
                if k:
                    v = v * s[:, j] ** k
            cols.append(v)
        B = np.column_stack(cols)
        if self.divisor is not None:
            q = ((z[:, 0] - self.divisor.point) / self._scale) ** self.divisor.order
            B = B * q[:, None]
        return B

    def log_density(self) -> np.ndarray:
        """``-phi`` at the nodes plus ``log`` of the normalised cell weight."""
        with np.errstate(divide="ignore"):
            lw = np.log(self.dom.weights)
        if self.normalization == "unit-total-mass":
            lw = lw - math.log(self.dom.volume)
        with np.errstate(invalid="ignore"):
            phi = np.asarray(self.phi(self.dom.coords()), dtype=float)
        if np.any(np.isnan(phi)):
            raise BergmanError("weight is NaN at a quadrature node")
        ld = -phi + lw
        if self.divisor is not None:
            # nodes sitting on the divisor: |q|^2 e^{-phi} is integrable, drop the sample
            z = self.dom.coords()
            on = np.abs(z - self.divisor.point) < 1e-12 * self._scale
            ld = np.where(on, -np.inf, ld)
        if np.any(ld == np.inf):
            raise BergmanError(
                f"weight not admissible at degree {self.degree}: e^-phi is infinite at a node"
            )
        return ld

    def check_admissible(self, h_sequence) -> ProbeResult:
        """Probe integrability of the constant (or divisor) basis element."""
        phi = self.phi
        div = self.divisor

        def log_f(z):
            with np.errstate(divide="ignore"):
                out = -phi(z)
                if div is not None:
                    out = out + 2 * div.order * np.log(np.abs(z - div.point))
            return out

        res = divergence_probe(dom=self.dom, h_sequence=h_sequence, log_f=log_f)
        if res.status == "diverging":
            raise BergmanError(f"weight not admissible at degree {self.degree}")
        return res

    def with_weight(self, weight):
        return BergmanProblem(self.dom, weight, self.degree, self.normalization,
                              "auto" if self.divisor is not None or self.n == 1 else "off")

    # linear algebra ----------------------------------------------------------

    def _factor(self):
        if self._gram is not None:
            return self._gram
        ld = self.log_density()
        finite = np.isfinite(ld)
        if not np.any(finite):
            raise BergmanError("kernel numerically zero: the measure vanishes on the grid")
        shift = float(ld[finite].max())
        dens = np.exp(ld[finite] - shift)
        B = self.basis(self.dom.coords()[finite] if self.n == 1 else self.dom.coords()[finite])
        A = (B.conj().T * dens) @ B  # A[a, b] = int conj(b_a) b_b
        A = 0.5 * (A + A.conj().T)
        diag = np.real(np.diag(A)).copy()
        if np.any(~np.isfinite(A)):
            raise BergmanError(f"weight not admissible at degree {self.degree}")
        scale = np.where(diag > 0, 1 / np.sqrt(np.where(diag > 0, diag, 1)), 0.0)
        As = A * scale[:, None] * scale[None, :]
        lam, V = linalg.eigh(As)
        lmax = float(lam.max()) if lam.size else 0.0
        if lmax <= 0:
            raise BergmanError("kernel numerically zero: Gram matrix fully below cutoff")
        keep = lam > PSD_CUTOFF * lmax
        self._gram = dict(A=A, shift=shift, scale=scale, lam=lam, V=V, keep=keep)
        return self._gram

    def _coefficients(self, z):
        """``Lambda^{-1/2} V^* D conj(b(z))`` for the kept eigenvectors."""
        g = self._factor()
        B = self.basis(z)
        V = g["V"][:, g["keep"]]
        lam = g["lam"][g["keep"]]
        y = (V.conj().T @ (g["scale"][:, None] * B.conj().T)) / np.sqrt(lam)[:, None]
        return y  # (kept, len(z))

    def _on_divisor(self, z):
        if self.divisor is None:
            return np.zeros(len(self._zs(z)), dtype=bool)
        return np.abs(self._zs(z)[:, 0] - self.divisor.point) < 1e-8 * self._scale


@dataclass
class Gram:
    """Gram matrix in the centred monomial basis ``(z - c)^alpha`` (times the divisor factor)."""

    matrix: np.ndarray
    min_eig: float
    max_eig: float
    condition: float
    truncated: bool


@dataclass
class KernelEvaluation:
    value: float
    degree: int
    gram_condition: float
    truncated: bool

    @property
    def log_value(self) -> float:
        if self.value <= 0 or math.log(self.value) < LOG_FLOOR:
            return -math.inf
        return math.log(self.value)

    @property
    def singular(self) -> bool:
        return self.log_value == -math.inf


def gram_matrix(p: BergmanProblem) -> Gram:
    """``G[a, b] = int (z-c)^a conj((z-c)^b) e^{-phi}`` with eigenvalue estimates."""
    g = p._factor()
    R = np.array([p._scale ** sum(a) for a in p.alphas], dtype=float)
    if p.divisor is not None:
        R = R * p._scale ** p.divisor.order
    G = np.conj(g["A"]) * math.exp(g["shift"]) * R[:, None] * R[None, :]
    lam = linalg.eigvalsh(G)
    lam_s = g["lam"]
    kept = lam_s[g["keep"]]
    return Gram(
        matrix=G,
        min_eig=float(lam.min()),
        max_eig=float(lam.max()),
        condition=float(kept.max() / kept.min()),
        truncated=bool(not np.all(g["keep"])),
    )


def _evaluation(p, value):
    g = p._factor()
    kept = g["lam"][g["keep"]]
    return KernelEvaluation(
        value=float(value),
        degree=p.degree,
        gram_condition=float(kept.max() / kept.min()),
        truncated=bool(not np.all(g["keep"])),
    )


def kernel_diag(p: BergmanProblem, z) -> KernelEvaluation:
    """``K(z, z)`` by the truncated pseudo-inverse of the Gram matrix."""
    if p._on_divisor(z)[0]:
        return _evaluation(p, 0.0)
    y = p._coefficients(z)[:, 0]
    val = float(np.sum(np.abs(y) ** 2)) * math.exp(-p._factor()["shift"])
    return _evaluation(p, val)


def kernel_offdiag(p: BergmanProblem, zeta, z) -> complex:
    """``K(zeta, z)``, holomorphic in ``zeta`` and antiholomorphic in ``z``."""
    yz = p._coefficients(z)[:, 0]
    yw = p._coefficients(zeta)[:, 0]
    val = np.vdot(yw, yz) * math.exp(-p._factor()["shift"])
    if p._on_divisor(z)[0] or p._on_divisor(zeta)[0]:
        return 0j
    return complex(val)


def kernel_column(p: BergmanProblem, z, zeta=None) -> np.ndarray:
    """``K(zeta_i, z)`` at all nodes (or at given points ``zeta``)."""
    if zeta is None:
        zeta = p.dom.coords()
    yz = p._coefficients(z)[:, 0]
    Y = p._coefficients(zeta)
    out = (Y.conj().T @ yz) * math.exp(-p._factor()["shift"])
    if p._on_divisor(z)[0]:
        out[:] = 0
    return out


def log_kernel(p: BergmanProblem, z) -> float:
    return kernel_diag(p, z).log_value


def kernel_diag_radial(p: BergmanProblem, rotations=8, tol=1e-8) -> float:
    """``(int e^{-phi})^{-1}``, the exact ``K(0, 0)`` for rotation-invariant problems."""
    dom = p.dom
    z = dom.coords()
    rng = np.random.default_rng(0)
    sel = rng.choice(len(z), size=min(64, len(z)), replace=False)
    zs = z[sel]
    phi0 = p.phi(zs)
    rho0 = dom.rho_values(dom.points[sel])
    for k in range(1, rotations + 1):
        w = np.exp(2j * np.pi * k / (rotations + 1))
        zr = zs * w
        phir = p.phi(zr)
        both = np.isfinite(phi0) & np.isfinite(phir)
        if np.any(np.isfinite(phi0) != np.isfinite(phir)) or np.any(
            np.abs(phir[both] - phi0[both]) > tol * (1 + np.abs(phi0[both]))
        ):
            raise NotRadialError("not radial: weight changes under rotation")
        zr = np.atleast_2d(zr.T).T if zr.ndim == 1 else zr
        pts = np.column_stack([zr.real, zr.imag]) if p.n == 1 else np.column_stack(
            [zr[:, 0].real, zr[:, 0].imag, zr[:, 1].real, zr[:, 1].imag])
        rhor = dom.rho_values(pts)
        if np.any(np.abs(rhor - rho0) > 1e-6 * (1 + np.abs(rho0))):
            raise NotRadialError("not radial: domain changes under rotation")
    ld = p.log_density()
    finite = ld[np.isfinite(ld)]
    if finite.size == 0:
        return math.inf
    m = finite.max()
    return float(math.exp(-m) / np.sum(np.exp(finite - m)))


def extremal_oracle(p: BergmanProblem, z) -> float:
    """``sup |h(z)|^2`` over unit-norm polynomials via a generalized eigenproblem."""
    if p.size > 64:
        raise BergmanError("extremal oracle limited to basis size <= 64")
    if p._on_divisor(z)[0]:
        return 0.0
    g = p._factor()
    V = g["V"][:, g["keep"]]
    D = g["scale"]
    b = p.basis(z)[0] * D
    # competitor coefficients c = D V x; |h(z)|^2 = |b^T V x|^2, |h|^2 = x^* Q x
    u = V.T @ b
    P = np.outer(u.conj(), u)
    As = g["A"] * D[:, None] * D[None, :]
    Q = V.conj().T @ As @ V
    Q = 0.5 * (Q + Q.conj().T)
    top = linalg.eigh(P, Q, eigvals_only=True)[-1]
    return float(top) * math.exp(-g["shift"])
