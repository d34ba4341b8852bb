"""Grid calculus in ``R^d``: jets, inversions, cutoffs and the Whitney extension.

Fields are carried by their 2-jets (value, gradient, Hessian) sampled on a
tensor grid made of Gauss-Legendre nodes in ``log r`` times the angular
quadrature of :mod:`artifact.harmonics`.  For a :class:`SpectralField` the
jets are exact (closed-form differentiation of the expansion), so every
integral below is a quadrature of exact pointwise data.

The inversion ``iota_c(x) = c^2 x / |x|^2`` fixes directions, so the jets of
``u o iota_c`` at ``r omega`` only need the jets of ``u`` at ``(c^2/r)
omega``, which the homogeneous decomposition of a spectral field provides
for all radii at once.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .annulus import SpectralField
from .checks import LemmaCheck, PreconditionError
from .harmonics import angular_quadrature, laplace_eigenvalue
from .lorentz import sampled_lorentz_norm
from .specfun import DomainError, sphere_area

__all__ = [
    "Jet",
    "GridField",
    "Cutoff",
    "log_radial_rule",
    "radial_jet",
    "inversion_jacobians",
    "compose_inversion",
    "spectral_jets",
    "invert_pullback",
    "inversion_identity_residuals",
    "WhitneyExtension",
    "whitney_extend",
    "WHITNEY_K",
    "GAMMA_W",
    "whitney_norms",
    "whitney_lines",
    "verify_whitney_lines",
    "norm_equivalence_norms",
    "verify_norm_equivalence",
    "neumann_characteristic",
    "neumann_eigenvalues",
    "verify_poincare_wirtinger",
    "poincare_sobolev_ratio",
    "estimate_poincare_sobolev",
    "verify_cutoff_bounds",
]

WHITNEY_K = 1.0 + 160.0 * ((2.0 * math.log(2.0)) ** 0.25 + 4.0 * 30.0 ** 0.25)
GAMMA_W = 28.0 * 2.0 ** 0.25 * math.sqrt(math.pi) * WHITNEY_K


# ---------------------------------------------------------------------------
# Jets
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Jet:
    """Value, gradient and Hessian of a (possibly vector-valued) field.

    Shapes are ``(P, *c)``, ``(P, *c, d)`` and ``(P, *c, d, d)`` where ``c``
    is the component shape (empty for scalar fields).
    """

    val: np.ndarray
    grad: np.ndarray
    hess: np.ndarray

    @property
    def d(self) -> int:
        return self.grad.shape[-1]

    def __add__(self, other: "Jet") -> "Jet":
        return Jet(self.val + other.val, self.grad + other.grad, self.hess + other.hess)

    def __sub__(self, other: "Jet") -> "Jet":
        return Jet(self.val - other.val, self.grad - other.grad, self.hess - other.hess)

    def scaled(self, c: float) -> "Jet":
        return Jet(c * self.val, c * self.grad, c * self.hess)

    def shifted(self, c) -> "Jet":
        """Add a constant (scalar or component vector) to the value."""
        return Jet(self.val + c, self.grad, self.hess)

    def times(self, g: "Jet") -> "Jet":
        """Product with a scalar jet ``g`` (Leibniz rule)."""
        extra = self.val.ndim - 1
        gv = g.val.reshape(g.val.shape + (1,) * extra)
        gg = g.grad.reshape(g.grad.shape[:1] + (1,) * extra + g.grad.shape[1:])
        gh = g.hess.reshape(g.hess.shape[:1] + (1,) * extra + g.hess.shape[1:])
        val = gv * self.val
        grad = gv[..., None] * self.grad + self.val[..., None] * gg
        cross = self.grad[..., :, None] * gg[..., None, :]
        hess = (gv[..., None, None] * self.hess + self.val[..., None, None] * gh
                + cross + np.swapaxes(cross, -1, -2))
        return Jet(val, grad, hess)

    def laplacian(self) -> np.ndarray:
        return np.trace(self.hess, axis1=-2, axis2=-1)

    def take(self, index) -> "Jet":
        return Jet(self.val[index], self.grad[index], self.hess[index])

    @classmethod
    def constant(cls, npts: int, d: int, value=0.0) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = value.shape
        return cls(np.broadcast_to(value, (npts,) + c).copy(), np.zeros((npts,) + c + (d,)),
                   np.zeros((npts,) + c + (d, d)))

    @classmethod
    def concat(cls, jets: list) -> "Jet":
        return cls(np.concatenate([j.val for j in jets]), np.concatenate([j.grad for j in jets]),
                   np.concatenate([j.hess for j in jets]))


def radial_jet(points: np.ndarray, f0, f1, f2) -> Jet:
    """Jet of ``phi(|x|)`` from the radial values ``phi, phi', phi''`` at ``|x|``."""
    x = np.asarray(points, dtype=float)
    r = np.linalg.norm(x, axis=1)
    e = x / r[:, None]
    d = x.shape[1]
    ee = e[:, :, None] * e[:, None, :]
    f0, f1, f2 = (np.broadcast_to(np.asarray(v, dtype=float), r.shape) for v in (f0, f1, f2))
    hess = f2[:, None, None] * ee + (f1 / r)[:, None, None] * (np.eye(d)[None] - ee)
    return Jet(np.array(f0), f1[:, None] * e, hess)


def inversion_jacobians(points: np.ndarray, c: float = 1.0) -> tuple:
    """``iota_c(x)``, ``D iota_c`` (``[k, i] = d_i iota_k``) and ``D^2 iota_c``."""
    x = np.asarray(points, dtype=float)
    d = x.shape[1]
    r2 = np.einsum("pi,pi->p", x, x)
    y = (c * c) * x / r2[:, None]
    eye = np.eye(d)
    xx = x[:, :, None] * x[:, None, :]
    jac = (c * c) * (eye[None] / r2[:, None, None] - 2.0 * xx / r2[:, None, None] ** 2)
    # d_i d_j (x_k / r^2) = -2 (d_ik x_j + d_jk x_i + d_ij x_k) / r^4 + 8 x_i x_j x_k / r^6
    t = (np.einsum("ik,pj->pkij", eye, x) + np.einsum("jk,pi->pkij", eye, x)
         + np.einsum("ij,pk->pkij", eye, x))
    xxx = np.einsum("pi,pj,pk->pkij", x, x, x)
    hess = (c * c) * (-2.0 * t / r2[:, None, None, None] ** 2
                      + 8.0 * xxx / r2[:, None, None, None] ** 3)
    return y, jac, hess


def compose_inversion(jet_at_image: Jet, points: np.ndarray, c: float = 1.0) -> Jet:
    """Jet of ``u o iota_c`` at ``points`` from the jet of ``u`` at ``iota_c(points)``."""
    _, jac, h = inversion_jacobians(points, c)
    g = np.einsum("p...k,pki->p...i", jet_at_image.grad, jac)
    hess = (np.einsum("p...kl,pki,plj->p...ij", jet_at_image.hess, jac, jac)
            + np.einsum("p...k,pkij->p...ij", jet_at_image.grad, h))
    return Jet(jet_at_image.val.copy(), g, hess)


def _radial_tensors(pieces: list, radii: np.ndarray, j: int) -> np.ndarray:
    """``D^j`` of a homogeneous decomposition at ``radii x nodes`` (shape ``(R, M, ...)``)."""
    total = None
    for h, jets in pieces:
        t = jets[j]
        scale = radii ** (h - j)
        term = scale.reshape((-1,) + (1,) * t.ndim) * t[None]
        total = term if total is None else total + term
    return total


def spectral_jets(u: SpectralField, radii, nodes: np.ndarray) -> Jet:
    """Exact jets of ``u`` at ``r omega`` for every radius and node (radius-major)."""
    radii = np.asarray(radii, dtype=float)
    pieces = u.angular_jets(nodes, 2)
    R, M, d = radii.size, nodes.shape[0], u.d
    if not pieces:
        return Jet.constant(R * M, d)
    vals = [_radial_tensors(pieces, radii, j) for j in range(3)]
    return Jet(vals[0].reshape(R * M), vals[1].reshape(R * M, d), vals[2].reshape(R * M, d, d))


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------
def log_radial_rule(breaks, npts: int = 16, max_ratio: float = 2.0) -> tuple:
    """Gauss-Legendre nodes in ``log r`` on sub-shells of ratio ``<= max_ratio``.

    Returns
    -------
    radii, weights : numpy.ndarray
        ``sum w g(r) ~ int g(r) dr`` over ``[breaks[0], breaks[-1]]``.
    """
    x, w = np.polynomial.legendre.leggauss(npts)
    radii, weights = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if not 0.0 < lo < hi:
            raise DomainError(f"bad radial interval ({lo}, {hi})")
        pieces = max(1, math.ceil(math.log(hi / lo) / math.log(max_ratio) - 1e-12))
        edges = np.linspace(math.log(lo), math.log(hi), pieces + 1)
        for la, lb in zip(edges[:-1], edges[1:]):
            r = np.exp(0.5 * (lb - la) * x + 0.5 * (la + lb))
            radii.append(r)
            weights.append(0.5 * (lb - la) * w * r)
    return np.concatenate(radii), np.concatenate(weights)


@dataclass(frozen=True)
class GridField:
    """Sampled 2-jet on a tensor grid ``radii x angular nodes``.

    Attributes
    ----------
    d : int
    radii : numpy.ndarray, shape (R,)
    nodes : numpy.ndarray, shape (M, d)
        Unit vectors of the angular rule.
    weights : numpy.ndarray, shape (R*M,)
        Volume quadrature weights; points are ordered radius-major.
    jet : Jet
    sphere_valued : bool
        When set, ``|u| = 1`` is enforced to ``1e-10``.
    """

    d: int
    radii: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    jet: Jet
    sphere_valued: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.d not in (3, 4):
            raise DomainError("grid fields are provided for d in {3, 4}")
        P = self.radii.size * self.nodes.shape[0]
        if self.weights.shape != (P,) or self.jet.val.shape[0] != P:
            raise DomainError("grid, weights and jets disagree in size")
        if self.sphere_valued:
            norms = np.linalg.norm(self.jet.val.reshape(P, -1), axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-10):
                raise DomainError("sphere-valued field has |u| != 1")

    # -- construction -------------------------------------------------------
    @staticmethod
    def grid(d: int, breaks, n_radial: int = 16, level: int = 8) -> tuple:
        """``(radii, nodes, points, weights)`` of the tensor rule on ``breaks``."""
        radii, wr = log_radial_rule(breaks, n_radial)
        quad = angular_quadrature(d, level)
        points = (radii[:, None, None] * quad.nodes[None]).reshape(-1, d)
        weights = ((wr * radii ** (d - 1))[:, None] * quad.weights[None]).ravel()
        return radii, quad.nodes, points, weights

    @classmethod
    def sample(cls, fun: Callable, d: int, breaks, n_radial: int = 16, level: int = 8,
               sphere_valued: bool = False) -> "GridField":
        """Sample ``fun(points) -> (val, grad, hess)`` on the tensor grid."""
        radii, nodes, points, weights = cls.grid(d, breaks, n_radial, level)
        val, grad, hess = fun(points)
        return cls(d, radii, nodes, weights, Jet(np.asarray(val, float), np.asarray(grad, float),
                                                  np.asarray(hess, float)), sphere_valued)

    @classmethod
    def from_spectral(cls, u: SpectralField, r0: float | None = None, r1: float | None = None,
                      n_radial: int = 16, level: int | None = None) -> "GridField":
        """Exact jets of a spectral field on ``B_{r1} \\ B_{r0}``."""
        r0 = u.a if r0 is None else r0
        r1 = u.b if r1 is None else r1
        level = level if level is not None else 2 * u.N + 3
        radii, nodes, _, weights = cls.grid(u.d, [r0, r1], n_radial, level)
        return cls(u.d, radii, nodes, weights, spectral_jets(u, radii, nodes))

    @property
    def points(self) -> np.ndarray:
        return (self.radii[:, None, None] * self.nodes[None]).reshape(-1, self.d)

    @property
    def r(self) -> np.ndarray:
        return np.repeat(self.radii, self.nodes.shape[0])

    @property
    def values(self) -> np.ndarray:
        return self.jet.val

    @property
    def grad(self) -> np.ndarray:
        return self.jet.grad

    # -- quadrature ---------------------------------------------------------
    def integrate(self, density) -> float:
        return float(self.weights @ np.asarray(density, dtype=float))

    def volume(self) -> float:
        return float(self.weights.sum())

    def mean(self):
        """Plain average of the values over the grid domain."""
        return np.tensordot(self.weights, self.jet.val, axes=(0, 0)) / self.volume()

    def magnitude(self, kind: str) -> np.ndarray:
        """Pointwise ``|u|``, ``|grad u|``, ``|D^2 u|``, ``|Delta u|`` or ``|grad u|/|x|``."""
        P = self.weights.size
        if kind == "value":
            a = self.jet.val
        elif kind == "grad":
            a = self.jet.grad
        elif kind == "hess":
            a = self.jet.hess
        elif kind == "laplacian":
            a = self.jet.laplacian()
        elif kind == "grad_over_r":
            return self.magnitude("grad") / self.r
        else:
            raise DomainError(f"unknown quantity {kind!r}")
        return np.sqrt((a * a).reshape(P, -1).sum(axis=1))

    def lp_norm(self, kind: str, p: float = 2.0) -> float:
        m = self.magnitude(kind)
        if math.isinf(p):
            return float(m.max()) if m.size else 0.0
        return self.integrate(m ** p) ** (1.0 / p)

    def lorentz_norm(self, kind: str, p: float, q: float, flavor: str = "norm") -> float:
        """Lorentz quantity of a magnitude, treating each node as a cell of its weight."""
        return sampled_lorentz_norm(self.magnitude(kind), self.weights, p, q, flavor)

    # -- export -------------------------------------------------------------
    def to_csv(self, kind: str = "value") -> str:
        """CSV text with columns ``r, omega_index, value``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["r", "omega_index", kind])
        mag = self.magnitude(kind).reshape(self.radii.size, -1)
        for i, r in enumerate(self.radii):
            for j, v in enumerate(mag[i]):
                writer.writerow([repr(float(r)), j, repr(float(v))])
        return buf.getvalue()


def invert_pullback(u: GridField, c: float = 1.0) -> GridField:
    """``v = u o iota_c`` on the image grid.

    The node ``c^2 omega / r`` of the result carries the jet of ``u`` at
    ``r omega``; weights follow the change of variables
    ``dx' = (c/|x|)^{2d} dx``, so ``w' = w (c/r)^{2d}``.
    """
    pts = u.points
    if np.any(np.linalg.norm(pts, axis=1) == 0.0):
        raise DomainError("the inversion is undefined at the origin")
    d = u.d
    order = np.arange(u.radii.size)[::-1]
    new_radii = (c * c) / u.radii[order]
    M = u.nodes.shape[0]
    idx = (order[:, None] * M + np.arange(M)[None]).ravel()
    jet_src = u.jet.take(idx)
    new_points = (new_radii[:, None, None] * u.nodes[None]).reshape(-1, d)
    jet = compose_inversion(jet_src, new_points, c)
    w = u.weights[idx] * (c / u.r[idx]) ** (2 * d)
    return GridField(d, new_radii, u.nodes, w, jet, u.sphere_valued)


def inversion_identity_residuals(u: GridField, v: GridField) -> dict:
    """Pointwise residuals of the conformal identities for ``v = u o iota_1``.

    With ``x`` a node of ``v`` and ``y = iota(x)`` the matching node of ``u``:

    * ``|grad v(x)|^2 = |grad u(y)|^2 / |x|^4``,
    * ``|D^2 v(x)|^2 = |x|^{-8} (|D^2 u|^2 + 8|x|^2 |grad u|^2 + 8 (x.grad u)^2
      + 8 x^T D^2 u grad u - 4 (x.grad u) Delta u)``, where the derivatives of
      ``u`` are taken at ``y`` and ``x`` is the point itself.  In dimension
      ``d`` the coefficient ``8`` of ``(x.grad u)^2`` becomes ``4(d-2)``.

    ``l4_gradient`` compares ``int |grad v|^4`` with ``int |grad u|^4``,
    an identity of dimension 4 only (``nan`` otherwise).

    Residuals are relative to the size of the left-hand sides.
    """
    M = u.nodes.shape[0]
    order = np.arange(u.radii.size)[::-1]
    idx = (order[:, None] * M + np.arange(M)[None]).ravel()
    x = v.points
    gu, hu = u.jet.grad[idx], u.jet.hess[idx]
    rx2 = np.einsum("pi,pi->p", x, x)
    g2u = np.einsum("pi,pi->p", gu, gu)
    lhs1 = np.einsum("pi,pi->p", v.jet.grad, v.jet.grad)
    rhs1 = g2u / rx2 ** 2
    xg = np.einsum("pi,pi->p", x, gu)
    d = u.d
    rhs2 = (np.einsum("pij,pij->p", hu, hu) + 8.0 * rx2 * g2u + 4.0 * (d - 2) * xg ** 2
            + 8.0 * np.einsum("pi,pij,pj->p", x, hu, gu)
            - 4.0 * xg * np.trace(hu, axis1=1, axis2=2)) / rx2 ** 4
    lhs2 = np.einsum("pij,pij->p", v.jet.hess, v.jet.hess)
    l4u = u.integrate(np.einsum("pi,pi->p", u.jet.grad, u.jet.grad) ** 2)
    l4v = v.integrate(lhs1 ** 2)
    s1 = max(float(np.max(np.abs(lhs1))), 1e-300)
    s2 = max(float(np.max(np.abs(lhs2))), 1e-300)
    return {
        "gradient": float(np.max(np.abs(lhs1 - rhs1))) / s1,
        "hessian": float(np.max(np.abs(lhs2 - rhs2))) / s2,
        "l4_gradient": abs(l4v - l4u) / max(l4u, 1e-300) if d == 4 else math.nan,
    }


# ---------------------------------------------------------------------------
# Cutoff
# ---------------------------------------------------------------------------
def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)


@dataclass(frozen=True)
class Cutoff:
    """``chi_r(x) = eta(|x|/r)`` with ``eta = 1`` on ``[0,1]``, ``0`` on ``[2, inf)``.

    On ``[1, 2]`` the profile is ``1 - S(t-1)`` with the quintic smoothstep
    ``S(s) = 10 s^3 - 15 s^4 + 6 s^5``, which is ``C^2`` across both ends with
    ``max |eta'| = 15/8`` and ``max |eta''| = 10/sqrt(3)``.
    """

    r: float = 1.0

    @staticmethod
    def eta(t, derivative: int = 0):
        t = np.asarray(t, dtype=float)
        s = t - 1.0
        inside = (s > 0.0) & (s < 1.0)
        sc = np.clip(s, 0.0, 1.0)
        if derivative == 0:
            return 1.0 - _smoothstep(s)
        if derivative == 1:
            return np.where(inside, -30.0 * sc ** 2 * (1.0 - sc) ** 2, 0.0)
        if derivative == 2:
            return np.where(inside, -60.0 * sc * (1.0 - sc) * (1.0 - 2.0 * sc), 0.0)
        raise DomainError("derivatives up to order 2 are provided")

    MAX_SLOPE = 15.0 / 8.0
    MAX_CURVATURE = 10.0 / math.sqrt(3.0)

    def __call__(self, points) -> Jet:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        t = np.linalg.norm(x, axis=1) / self.r
        return radial_jet(x, self.eta(t), self.eta(t, 1) / self.r, self.eta(t, 2) / self.r ** 2)


def verify_cutoff_bounds(r: float = 1.0, d: int = 4, n_radial: int = 64,
                         level: int = 4) -> tuple[LemmaCheck, LemmaCheck]:
    """Pointwise ``|grad chi_r| <= 2/r`` and ``|D^2 chi_r| <= 4/(r|x|)`` on a grid.

    The second bound cannot hold for any ``C^2`` profile falling from 1 to 0
    on ``[1, 2]`` with flat ends: such a profile has ``|eta''| >= 4``
    somewhere, while the bound needs ``|eta''| <= 4 r/|x| <= 4``.  The check
    reports the observed worst ratio.
    """
    radii, nodes, points, _ = GridField.grid(d, [r, 2.0 * r], n_radial, level)
    jet = Cutoff(r)(points)
    rr = np.linalg.norm(points, axis=1)
    g = np.linalg.norm(jet.grad, axis=1)
    h = np.sqrt(np.einsum("pij,pij->p", jet.hess, jet.hess))
    worst_g = float(np.max(g * r / 2.0))
    worst_h = float(np.max(h * r * rr / 4.0))
    return (
        LemmaCheck.compare("cutoff_gradient", worst_g, 1.0, tol=0.0, r=r,
                           max_slope=Cutoff.MAX_SLOPE),
        LemmaCheck.compare("cutoff_hessian", worst_h, 1.0, tol=0.0, r=r,
                           max_curvature=Cutoff.MAX_CURVATURE,
                           min_curvature_any_profile=4.0),
    )


# ---------------------------------------------------------------------------
# Whitney extension
# ---------------------------------------------------------------------------
def _power_mean(d: int, p: float, lo: float, hi: float) -> float:
    """Average of ``|x|^p`` over ``B_hi \\ B_lo`` in ``R^d``."""
    def mono(e):
        if e == -1:
            return math.log(hi / lo)
        return (hi ** (e + 1) - lo ** (e + 1)) / (e + 1)
    return mono(p + d - 1) / mono(d - 1)


@dataclass(frozen=True)
class WhitneyExtension:
    """Extension of a harmonic field on ``B_b \\ B_a`` (``d = 4``, ``2a < b``) to ``R^4``.

    With ``eta`` the profile of :class:`Cutoff`:

    * on ``a/2 < |x| < a``: ``eta(a/|x|) u(a^2 x/|x|^2) + (1 - eta(a/|x|)) m_a``,
    * on ``a <= |x| <= b``: ``u``,
    * on ``b < |x| < 2b``: ``eta(|x|/b) u(b^2 x/|x|^2) + (1 - eta(|x|/b)) m_b``,

    and the constants ``m_a`` inside ``B_{a/2}``, ``m_b`` outside ``B_{2b}``.
    Here ``m_a`` is the mean of ``u`` on ``B_{2a} \\ B_a`` and ``m_b`` the mean
    of ``u o iota_b`` on ``B_{2b} \\ B_b``.  The gradient of the extension is
    supported in ``B_{2b} \\ B_{a/2}``.  The inversions reverse the radial
    derivative, so the extension is only Lipschitz across ``|x| = a`` and
    ``|x| = b``; :meth:`gradient_jumps` measures the jump of ``d_r``.
    """

    u: SpectralField
    m_a: float
    m_b: float

    @property
    def a(self) -> float:
        return self.u.a

    @property
    def b(self) -> float:
        return self.u.b

    def region_jets(self, region: str, radii, nodes) -> Jet:
        """Jets of the extension on ``radii x nodes`` inside one region."""
        radii = np.asarray(radii, dtype=float)
        d = self.u.d
        points = (radii[:, None, None] * nodes[None]).reshape(-1, d)
        if region == "middle":
            return spectral_jets(self.u, radii, nodes)
        if region == "inner":
            c, m = self.a, self.m_a
            t = c / radii
            g0 = Cutoff.eta(t)
            g1 = -c / radii ** 2 * Cutoff.eta(t, 1)
            g2 = 2.0 * c / radii ** 3 * Cutoff.eta(t, 1) + c * c / radii ** 4 * Cutoff.eta(t, 2)
        elif region == "outer":
            c, m = self.b, self.m_b
            t = radii / c
            g0 = Cutoff.eta(t)
            g1 = Cutoff.eta(t, 1) / c
            g2 = Cutoff.eta(t, 2) / c ** 2
        else:
            raise DomainError(f"unknown region {region!r}")
        M = nodes.shape[0]
        rep = lambda a: np.repeat(a, M)
        g = radial_jet(points, rep(g0), rep(g1), rep(g2))
        image = spectral_jets(self.u, c * c / radii, nodes)
        v = compose_inversion(image, points, c).shifted(-m)
        return v.times(g).shifted(m)

    def grid(self, n_radial: int = 16, level: int | None = None) -> GridField:
        """The extension on ``B_{2b} \\ B_{a/2}``, the support of its gradient."""
        level = level if level is not None else 2 * self.u.N + 3
        parts = []
        for region, lo, hi in (("inner", self.a / 2, self.a), ("middle", self.a, self.b),
                               ("outer", self.b, 2 * self.b)):
            radii, nodes, _, w = GridField.grid(self.u.d, [lo, hi], n_radial, level)
            parts.append((radii, w, self.region_jets(region, radii, nodes)))
        radii = np.concatenate([p[0] for p in parts])
        weights = np.concatenate([p[1] for p in parts])
        jet = Jet.concat([p[2] for p in parts])
        return GridField(self.u.d, radii, nodes, weights, jet,
                         meta={"regions": [len(p[0]) for p in parts]})

    def gradient_jumps(self, level: int | None = None) -> dict:
        """``int |[d_r u~]| dH^3`` over ``|x| = a`` and ``|x| = b``."""
        level = level if level is not None else 2 * self.u.N + 3
        quad = angular_quadrature(self.u.d, level)
        out = {}
        for name, c, inside, outside in (("a", self.a, "inner", "middle"),
                                         ("b", self.b, "middle", "outer")):
            r = np.array([c])
            lo = self.region_jets(inside, r, quad.nodes)
            hi = self.region_jets(outside, r, quad.nodes)
            jump = np.einsum("pi,pi->p", hi.grad - lo.grad, quad.nodes)
            out[name] = float(quad.integrate(np.abs(jump))) * c ** (self.u.d - 1)
        return out


def whitney_extend(u: SpectralField) -> WhitneyExtension:
    """Build the extension of a ``d = 4`` annulus field with ``2a < b``."""
    if u.d != 4:
        raise PreconditionError("the extension is constructed in dimension 4")
    if u.is_ball or not 2.0 * u.a < u.b:
        raise PreconditionError(f"need 2a < b, got a={u.a}, b={u.b}")
    d = u.d
    a0, b0 = float(u.A[0][0]), float(u.B[0][0])
    mu = d - 2
    # only the degree-0 part has a nonzero mean over a centred annulus
    m_a = a0 + b0 * _power_mean(d, -mu, u.a, 2.0 * u.a)
    # u o iota_b has degree-0 part a0 + b0 b^{-2 mu} |x|^{mu}
    m_b = a0 + b0 * u.b ** (-2 * mu) * _power_mean(d, mu, u.b, 2.0 * u.b)
    return WhitneyExtension(u, m_a, m_b)


def whitney_norms(u: SpectralField, n_radial: int = 16, level: int | None = None) -> dict:
    """All norms entering the eight extension inequalities.

    Norms of the extension are over ``R^4`` with the absolutely continuous
    part of its Hessian; norms of ``u`` are over its annulus.
    """
    ext = whitney_extend(u)
    G = ext.grid(n_radial, level)
    F = GridField.from_spectral(u, n_radial=n_radial, level=level)
    return {
        "ext_hess": G.lp_norm("hess"),
        "ext_weighted": G.lp_norm("grad_over_r"),
        "ext_l42": G.lorentz_norm("grad", 4.0, 2.0),
        "ext_l4": G.lp_norm("grad", 4.0),
        "hess": F.lp_norm("hess"),
        "weighted": F.lp_norm("grad_over_r"),
        "l4": F.lp_norm("grad", 4.0),
        "jumps": ext.gradient_jumps(level),
    }


def whitney_lines(norms: dict) -> list:
    """``(label, lhs, rhs)`` of the eight inequalities."""
    H, W, G = norms["hess"], norms["weighted"], norms["l4"]
    K = WHITNEY_K
    q = 2.0 ** 0.25
    sp = math.sqrt(math.pi)
    return [
        ("hess_weighted", norms["ext_hess"], 19.0 * H + 289.0 * W),
        ("hess_l4", norms["ext_hess"], 7.0 * H + K * G),
        ("weighted_weighted", norms["ext_weighted"], math.sqrt(51.0) * W),
        ("weighted_l4", norms["ext_weighted"], 196.0 * q * sp * H + 28.0 * q * sp * K * G),
        ("l42_weighted", norms["ext_l42"], 261.0 * H + 4046.0 * W),
        ("l42_l4", norms["ext_l42"], 98.0 * H + 14.0 * K * G),
        ("l4_weighted", norms["ext_l4"], 261.0 * q * H + 4046.0 * q * W),
        ("l4_l4", norms["ext_l4"], 98.0 * q * H + 14.0 * q * K * G),
    ]


def verify_whitney_lines(u: SpectralField, n_radial: int = 16,
                         level: int | None = None) -> list[LemmaCheck]:
    """One :class:`LemmaCheck` per extension inequality (id ``whitney_extension_dim4``)."""
    norms = whitney_norms(u, n_radial, level)
    out = []
    for label, lhs, rhs in whitney_lines(norms):
        out.append(LemmaCheck.compare("whitney_extension_dim4", lhs, rhs, tol=1e-10,
                                      atol=1e-12, line=label, a=u.a, b=u.b,
                                      ratio=lhs / rhs if rhs > 0 else 0.0,
                                      jump_a=norms["jumps"]["a"], jump_b=norms["jumps"]["b"]))
    return out


def norm_equivalence_norms(u: SpectralField, n_radial: int = 16,
                           level: int | None = None) -> dict:
    """``N_{2,2}``, ``N_{2,4}`` and ``N_{2,(4,2)}`` of a field on its annulus."""
    F = GridField.from_spectral(u, n_radial=n_radial, level=level)
    H = F.lp_norm("hess")
    return {
        "N22": H + F.lp_norm("grad_over_r"),
        "N24": H + F.lp_norm("grad", 4.0),
        "N2_42": H + F.lorentz_norm("grad", 4.0, 2.0),
    }


def verify_norm_equivalence(u: SpectralField, n_radial: int = 16,
                            level: int | None = None) -> LemmaCheck:
    """``max(N22, N2_42) <= Gamma_W N24`` and ``max(N24, N2_42) <= Gamma_W N22``.

    The record's sides are the largest ratio among the four bounds and
    ``Gamma_W``.
    """
    if u.d != 4 or u.is_ball or not 2.0 * u.a < u.b:
        raise PreconditionError("norm equivalence needs d = 4 and 2a < b")
    n = norm_equivalence_norms(u, n_radial, level)
    ratios = []
    for num, den in (("N22", "N24"), ("N2_42", "N24"), ("N24", "N22"), ("N2_42", "N22")):
        if n[den] > 0.0:
            ratios.append(n[num] / n[den])
        elif n[num] > 1e-12:
            ratios.append(math.inf)
        else:
            ratios.append(0.0)
    return LemmaCheck.compare("whitney_extension_dim4_equiv_norms", max(ratios), GAMMA_W,
                              tol=0.0, **n)


# ---------------------------------------------------------------------------
# Poincare-Wirtinger on a dyadic annulus
# ---------------------------------------------------------------------------
def neumann_characteristic(mu: float, d: int, n: int, length: float = math.log(2.0)) -> float:
    """Zero set = Neumann spectrum of ``Y'' + (d-2) Y' - lambda_n Y = -mu Y`` on ``[0, L]``.

    With ``c = (d-2)/2`` and ``s^2 = c^2 + lambda_n - mu`` the Neumann
    conditions at both ends reduce to ``(mu - lambda_n) sinh(s L)/s = 0``
    (``sin(|s| L)/|s|`` when ``s^2 < 0``).
    """
    lam = laplace_eigenvalue(d, n)
    c = 0.5 * (d - 2)
    s2 = c * c + lam - mu
    if s2 > 0:
        s = math.sqrt(s2)
        shape = math.sinh(s * length) / s
    elif s2 < 0:
        s = math.sqrt(-s2)
        shape = math.sin(s * length) / s
    else:
        shape = length
    return (mu - lam) * shape


def neumann_eigenvalues(d: int, n: int, count: int = 3, length: float = math.log(2.0)) -> list:
    """Smallest ``count`` Neumann eigenvalues for one mode, by bracketing and ``brentq``."""
    if d < 3:
        raise PreconditionError("need d >= 3")
    lam = laplace_eigenvalue(d, n)
    c2 = 0.25 * (d - 2) ** 2
    top = lam + c2 + ((count + 1) * math.pi / length) ** 2
    grid = np.linspace(-1.0, top, 4000 * (count + 1))
    f = np.array([neumann_characteristic(m, d, n, length) for m in grid])
    roots = []
    for i in range(grid.size - 1):
        if f[i] == 0.0:
            roots.append(float(grid[i]))
        elif f[i] * f[i + 1] < 0.0:
            roots.append(brentq(neumann_characteristic, grid[i], grid[i + 1],
                                args=(d, n, length), xtol=1e-14, rtol=1e-14))
    if len(roots) < count:
        raise DomainError("root bracketing failed")
    return roots[:count]


def verify_poincare_wirtinger(d: int, n: int) -> LemmaCheck:
    """Certify the weighted constant ``4/(d-2)^2`` on mode ``n``.

    The constant holds on the mode iff its smallest nonzero Neumann
    eigenvalue ``mu`` exceeds ``(d-2)^2/4``; the record compares the two.
    ``params`` also report whether the stronger ``mu > (d-2)^2/4 + lambda_n``
    holds (it fails for every ``n >= 1``, where ``mu = lambda_n``).
    """
    if d < 3:
        raise PreconditionError("need d >= 3")
    c2 = 0.25 * (d - 2) ** 2
    lam = laplace_eigenvalue(d, n)
    roots = neumann_eigenvalues(d, n, count=3)
    nonzero = [m for m in roots if m > 1e-10]
    mu = nonzero[0]
    return LemmaCheck.compare("dyadic_poincare_wirtinger", c2, mu, tol=0.0, d=d, n=n,
                              mu=mu, lambda_n=lam, weighted_constant=1.0 / c2,
                              plain_constant_over_r2=4.0 / c2,
                              shifted_bound_holds=bool(mu > c2 + lam),
                              strict=bool(mu > c2))


# ---------------------------------------------------------------------------
# Poincare-Sobolev on a dyadic annulus
# ---------------------------------------------------------------------------
def poincare_sobolev_ratio(u: SpectralField, n_radial: int = 16,
                           level: int | None = None) -> float:
    """``||u - mean||_4 / (||grad u||_2 + r ||D^2 u||_2)`` on ``B_{2r} \\ B_r``."""
    F = GridField.from_spectral(u, n_radial=n_radial, level=level)
    dev = F.jet.val - F.mean()
    num = F.integrate(dev ** 4) ** 0.25
    den = F.lp_norm("grad") + u.a * F.lp_norm("hess")
    if den == 0.0:
        return 0.0
    return num / den


def estimate_poincare_sobolev(size: int = 16, seed: int = 0, N: int = 4, r: float = 1.0,
                              stability: float = 0.1) -> dict:
    """Largest ratio over ``size`` random fields, with a doubling-stability flag."""
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(2 * size):
        u = SpectralField.random(4, r, 2.0 * r, N, rng)
        ratios.append(poincare_sobolev_ratio(u))
    half = max(ratios[:size])
    full = max(ratios)
    return {"constant": full, "half_ensemble": half,
            "stable": bool(abs(full - half) <= stability * full), "size": 2 * size}
