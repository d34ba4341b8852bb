"""Second variation, Pohozaev flux and Hardy-Rellich forms for biharmonic maps.

Target manifolds are round spheres ``S^m`` in ``R^{m+1}``, for which the
nearest-point projection is ``Pi(y) = y/|y|``, the tangential projection is
``P_u = I - u u^T`` and the second fundamental form is
``A_u(X, Y) = -<X, Y> u``.  With ``E(u) = (1/2) int |Delta u|^2`` and a
tangent variation ``w`` the path ``Pi(u + t w)`` equals
``u + t w + (t^2/2) A_u(w, w) + O(t^3)``, so

    Q_u(w) = d^2/dt^2 E(Pi(u + t w)) at 0 = int |Delta w|^2 + <Delta u, Delta(A_u(w, w))>.

The Hardy-Rellich forms are written for ``u = g(t) Y_n(omega)`` in
``t = log(|x|/a)`` on ``B_b \\ B_a`` in ``R^4``, where every form has
constant coefficients:

* ``int (Delta u)^2 = beta int (g'' + 2 g' - lambda_n g)^2 dt``,
* ``int u^2/|x|^4 = beta int g^2 dt``,
* ``int |grad u|^2/|x|^2 = beta int (g'^2 + lambda_n g^2) dt``,

with ``beta = |S^3|`` common to all and dropped.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.linalg import eigh, qr, solve_triangular

from .calculus import GridField, Jet, log_radial_rule, radial_jet
from .checks import LemmaCheck, PreconditionError
from .harmonics import angular_quadrature, laplace_eigenvalue, solid_harmonics, sphere_gradient
from .specfun import DomainError

__all__ = [
    "PolynomialMap",
    "SphereMap",
    "jet_dot",
    "jet_power",
    "normalize",
    "second_fundamental_form",
    "second_variation",
    "second_variation_direct",
    "energy_along",
    "first_variation_fd",
    "second_variation_fd",
    "bump_profile",
    "tangent_variation",
    "d2_lower_bound_terms",
    "verify_d2_lower_bound",
    "fit_d2_constant",
    "pohozaev_flux",
    "pohozaev_sides",
    "verify_pohozaev_identity",
    "verify_flux_constancy",
    "RELLICH_A_THRESHOLD",
    "rellich_b_threshold",
    "rellich_a_bound",
    "rellich_b_bound",
    "RellichForms",
    "rellich_forms",
    "generalized_spectrum",
    "mode_minima",
    "verify_rellich_A",
    "verify_rellich_B",
    "verify_rellich_C",
    "rellich_c_constant",
    "cross_mode_coupling",
    "spectra_csv",
    "dirichlet_ball_eigenvalue",
    "NeckWeight",
    "neck_integrals",
    "assemble_neck_positivity",
    "verify_neck_stability",
]


# ---------------------------------------------------------------------------
# Scalar operations on jets
# ---------------------------------------------------------------------------
def jet_dot(a: Jet, b: Jet) -> Jet:
    """``<a, b>`` of two vector jets with components on axis 1."""
    val = np.einsum("pc,pc->p", a.val, b.val)
    grad = np.einsum("pci,pc->pi", a.grad, b.val) + np.einsum("pc,pci->pi", a.val, b.grad)
    hess = (np.einsum("pcij,pc->pij", a.hess, b.val) + np.einsum("pc,pcij->pij", a.val, b.hess)
            + np.einsum("pci,pcj->pij", a.grad, b.grad) + np.einsum("pcj,pci->pij", a.grad, b.grad))
    return Jet(val, grad, hess)


def jet_power(s: Jet, p: float) -> Jet:
    """``s^p`` for a positive scalar jet."""
    if np.any(s.val <= 0.0):
        raise DomainError("jet_power needs a positive base")
    f0 = s.val ** p
    f1 = p * s.val ** (p - 1.0)
    f2 = p * (p - 1.0) * s.val ** (p - 2.0)
    grad = f1[:, None] * s.grad
    hess = f2[:, None, None] * s.grad[:, :, None] * s.grad[:, None, :] + f1[:, None, None] * s.hess
    return Jet(f0, grad, hess)


def normalize(y: Jet) -> Jet:
    """Jet of ``Pi(y) = y/|y|``, the projection onto the unit sphere."""
    return y.times(jet_power(jet_dot(y, y), -0.5))


def second_fundamental_form(u, X, Y) -> np.ndarray:
    """``A_u(X, Y) = -<X, Y> u`` pointwise (arrays of shape ``(P, m)``)."""
    return -np.einsum("pc,pc->p", X, Y)[:, None] * u


# ---------------------------------------------------------------------------
# Test maps
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PolynomialMap:
    """Vector polynomial ``x -> sum_t c_t x^{e_t}`` with exact derivatives.

    Attributes
    ----------
    exponents : numpy.ndarray, shape (T, d)
    coefs : numpy.ndarray, shape (T, m)
    """

    exponents: np.ndarray
    coefs: np.ndarray

    @property
    def d(self) -> int:
        return self.exponents.shape[1]

    @property
    def m(self) -> int:
        return self.coefs.shape[1]

    def derivative(self, axis: int) -> "PolynomialMap":
        e = self.exponents
        keep = e[:, axis] > 0
        ne = e[keep].copy()
        nc = self.coefs[keep] * e[keep, axis][:, None]
        ne[:, axis] -= 1
        if not np.any(keep):
            ne = np.zeros((1, self.d), dtype=int)
            nc = np.zeros((1, self.m))
        return PolynomialMap(ne, nc)

    def __call__(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        mono = np.prod(x[:, None, :] ** self.exponents[None], axis=2)
        return mono @ self.coefs

    def laplacian(self) -> "PolynomialMap":
        parts = [self.derivative(i).derivative(i) for i in range(self.d)]
        return PolynomialMap(np.concatenate([p.exponents for p in parts]),
                             np.concatenate([p.coefs for p in parts])).combined()

    def combined(self) -> "PolynomialMap":
        """Merge repeated exponents."""
        exps, inv = np.unique(self.exponents, axis=0, return_inverse=True)
        coefs = np.zeros((exps.shape[0], self.m))
        np.add.at(coefs, inv.ravel(), self.coefs)
        return PolynomialMap(exps, coefs)

    def jet(self, points) -> Jet:
        d = self.d
        x = np.atleast_2d(np.asarray(points, dtype=float))
        first = [self.derivative(i) for i in range(d)]
        grad = np.stack([f(x) for f in first], axis=-1)
        hess = np.stack([np.stack([first[i].derivative(j)(x) for j in range(d)], axis=-1)
                         for i in range(d)], axis=-2)
        return Jet(self(x), grad, hess)

    def radial_data(self, points) -> dict:
        """``u_r, u_rr, u_rrr, Delta u, d_r Delta u`` at ``points``."""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        e = x / np.linalg.norm(x, axis=1)[:, None]
        d = self.d
        first = [self.derivative(i) for i in range(d)]
        second = [[f.derivative(j) for j in range(d)] for f in first]
        ur = sum(e[:, i, None] * first[i](x) for i in range(d))
        urr = sum(e[:, i, None] * e[:, j, None] * second[i][j](x)
                  for i in range(d) for j in range(d))
        urrr = sum(e[:, i, None] * e[:, j, None] * e[:, k, None] * second[i][j].derivative(k)(x)
                   for i in range(d) for j in range(d) for k in range(d))
        lap = self.laplacian()
        lap_r = sum(e[:, i, None] * lap.derivative(i)(x) for i in range(d))
        return {"ur": ur, "urr": urr, "urrr": urrr, "lap": lap(x), "lap_r": lap_r}

    def is_biharmonic(self, tol: float = 1e-12) -> bool:
        bi = self.laplacian().laplacian()
        return bool(np.all(np.abs(bi.coefs) <= tol * max(1.0, np.abs(self.coefs).max())))

    @classmethod
    def constant(cls, value) -> "PolynomialMap":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(np.zeros((1, 4), dtype=int), value[None, :])

    @classmethod
    def random_biharmonic(cls, rng: np.random.Generator, m: int, d: int = 4) -> "PolynomialMap":
        """Random cubic plus ``|x|^2`` times harmonic quadratics and cubics."""
        terms = {}

        def add(exp, vec):
            key = tuple(exp)
            terms[key] = terms.get(key, 0.0) + vec

        for deg in range(4):
            for exp in itertools.product(range(deg + 1), repeat=d):
                if sum(exp) == deg:
                    add(exp, rng.standard_normal(m) / (1 + deg))
        # harmonic polynomials h of degree 2 and 3; |x|^2 h is biharmonic
        harmonics = []
        for i, j in itertools.combinations(range(d), 2):
            e = [0] * d
            e[i] = e[j] = 1
            harmonics.append([(e, 1.0)])
            ei, ej = [0] * d, [0] * d
            ei[i], ej[j] = 2, 2
            harmonics.append([(ei, 1.0), (ej, -1.0)])
        e = [0] * d
        e[0] = e[1] = e[2] = 1
        harmonics.append([(e, 1.0)])
        for h in harmonics:
            vec = rng.standard_normal(m) / 6.0
            for k in range(d):
                for exp, c in h:
                    ex = list(exp)
                    ex[k] += 2
                    add(ex, c * vec)
        exps = np.array(list(terms.keys()), dtype=int)
        coefs = np.array(list(terms.values()))
        poly = cls(exps, coefs)
        if not poly.is_biharmonic(1e-10):
            raise DomainError("construction did not produce a biharmonic polynomial")
        return poly


def _radial_projection_jet(points) -> Jet:
    x = np.atleast_2d(np.asarray(points, dtype=float))
    d = x.shape[1]
    r = np.linalg.norm(x, axis=1)
    e = x / r[:, None]
    eye = np.eye(d)
    grad = (eye[None] - e[:, :, None] * e[:, None, :]) / r[:, None, None]
    # d_i d_j (x_c/r) = -(d_ci x_j + d_cj x_i + d_ij x_c)/r^3 + 3 x_c x_i x_j / r^5
    t = (np.einsum("ci,pj->pcij", eye, x) + np.einsum("cj,pi->pcij", eye, x)
         + np.einsum("ij,pc->pcij", eye, x))
    hess = -t / r[:, None, None, None] ** 3 + 3.0 * np.einsum("pc,pi,pj->pcij", x, x, x) / r[
        :, None, None, None] ** 5
    return Jet(e, grad, hess)


def _radial_projection_data(points) -> dict:
    x = np.atleast_2d(np.asarray(points, dtype=float))
    d = x.shape[1]
    r = np.linalg.norm(x, axis=1)[:, None]
    e = x / r
    z = np.zeros_like(e)
    return {"ur": z, "urr": z, "urrr": z, "lap": -(d - 1) * e / r ** 2,
            "lap_r": 2.0 * (d - 1) * e / r ** 3}


def _translated_projection_fns(center: np.ndarray):
    """Jet and radial data of ``(x - c)/|x - c|``."""

    def jet(points) -> Jet:
        return _radial_projection_jet(np.atleast_2d(np.asarray(points, dtype=float)) - center)

    def radial(points) -> dict:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        d = x.shape[1]
        e = x / np.linalg.norm(x, axis=1)[:, None]
        y = x - center
        A = np.einsum("pc,pc->p", y, y)[:, None]
        B = 2.0 * np.einsum("pc,pc->p", y, e)[:, None]
        # derivatives of h(s) = (A + B s + s^2)^(-1/2) at s = 0
        h0 = A ** -0.5
        h1 = -0.5 * A ** -1.5 * B
        h2 = 0.75 * A ** -2.5 * B ** 2 - A ** -1.5
        h3 = -15.0 / 8.0 * A ** -3.5 * B ** 3 + 4.5 * A ** -2.5 * B
        ry = np.sqrt(A)
        ye = 0.5 * B
        return {"ur": e * h0 + y * h1, "urr": 2.0 * e * h1 + y * h2,
                "urrr": 3.0 * e * h2 + y * h3, "lap": -(d - 1) * y / ry ** 3,
                "lap_r": -(d - 1) * (e / ry ** 3 - 3.0 * y * ye / ry ** 5)}

    return jet, radial


@dataclass(frozen=True)
class SphereMap:
    """A map into ``S^m`` (or a first-order perturbation of one) with exact jets.

    Attributes
    ----------
    name : str
    d : int
        Domain dimension.
    m : int
        Target sphere dimension; values live in ``R^{m+1}``.
    jet_fn : callable
        ``points -> Jet`` with components on axis 1.
    radial_fn : callable
        ``points -> dict`` with ``ur, urr, urrr, lap, lap_r``.
    regular_at_origin : bool
    unit : bool
        Whether ``|u| = 1`` holds exactly.
    """

    name: str
    d: int
    m: int
    jet_fn: Callable
    radial_fn: Callable
    regular_at_origin: bool
    unit: bool = True

    @classmethod
    def radial_projection(cls, d: int = 4) -> "SphereMap":
        """``u(x) = x/|x|`` into ``S^{d-1}``; biharmonic away from 0 in ``d = 4``."""
        return cls("radial_projection", d, d - 1, _radial_projection_jet,
                   _radial_projection_data, regular_at_origin=False)

    @classmethod
    def translated_projection(cls, center) -> "SphereMap":
        """``u(x) = (x - c)/|x - c|``; smooth on every ball ``B_R`` with ``R < |c|``."""
        c = np.asarray(center, dtype=float)
        if np.linalg.norm(c) == 0.0:
            return cls.radial_projection(c.size)
        jet, radial = _translated_projection_fns(c)
        return cls("translated_projection", c.size, c.size - 1, jet, radial,
                   regular_at_origin=True)

    @classmethod
    def constant(cls, point, d: int = 4) -> "SphereMap":
        p = np.asarray(point, dtype=float)
        if abs(np.linalg.norm(p) - 1.0) > 1e-12:
            raise DomainError("a constant sphere map needs a unit vector")
        poly = PolynomialMap(np.zeros((1, d), dtype=int), p[None, :])
        return cls("constant", d, p.size - 1, poly.jet, poly.radial_data, regular_at_origin=True)

    @classmethod
    def perturbed(cls, point, h: PolynomialMap, eps: float) -> "SphereMap":
        """``p + eps h`` with ``h`` biharmonic: the first-order expansion of ``Pi(p + eps h)``.

        The result satisfies ``Delta^2 u = 0`` exactly but ``|u| = 1`` only
        to ``O(eps)``; it is flagged as non-unit.
        """
        p = np.asarray(point, dtype=float)
        if not h.is_biharmonic():
            raise DomainError("h must be biharmonic")
        poly = PolynomialMap(np.concatenate([np.zeros((1, h.d), dtype=int), h.exponents]),
                             np.concatenate([p[None, :], eps * h.coefs]))
        return cls("perturbed", h.d, p.size - 1, poly.jet, poly.radial_data,
                   regular_at_origin=True, unit=False)

    def grid(self, breaks, n_radial: int = 16, level: int = 8) -> GridField:
        radii, nodes, points, weights = GridField.grid(self.d, breaks, n_radial, level)
        return GridField(self.d, radii, nodes, weights, self.jet_fn(points),
                         sphere_valued=self.unit)


# ---------------------------------------------------------------------------
# Second variation
# ---------------------------------------------------------------------------
def _check_pair(u: GridField, w: GridField):
    if not u.sphere_valued:
        raise DomainError("the second variation needs a unit (sphere-valued) map")
    if u.weights.shape != w.weights.shape or u.jet.val.shape != w.jet.val.shape:
        raise DomainError("u and w must be sampled on the same grid")
    dot = np.einsum("pc,pc->p", u.jet.val, w.jet.val)
    scale = max(float(np.abs(w.jet.val).max()), 1e-300)
    if np.max(np.abs(dot)) > 1e-10 * scale:
        raise PreconditionError("w must be tangent: <u, w> = 0")


def second_variation(u: GridField, w: GridField, form: str = "corrected") -> float:
    """``Q_u(w)`` assembled from ``A, grad A, Delta A, P, grad P, Delta P``.

    ``form="corrected"`` uses ``-<<Delta P_u, Delta u>, A_u(w, w)>`` and the
    coefficient 4 in front of ``(grad A_u)(grad w, w)``, as the integration
    by parts of ``<Delta^2 u, A_u(w, w)>`` gives; ``form="printed"`` uses
    ``+`` and 2.  For spheres the coefficient change has no effect because
    ``<A_u(grad u, grad u), (grad A_u)(grad w, w)>`` vanishes pointwise.
    """
    if form not in ("corrected", "printed"):
        raise DomainError("form must be 'corrected' or 'printed'")
    _check_pair(u, w)
    uv, gu = u.jet.val, u.jet.grad
    lu = u.jet.laplacian()
    wv, gw = w.jet.val, w.jet.grad
    lw = w.jet.laplacian()
    grad_u2 = np.einsum("pci,pci->p", gu, gu)
    au = -grad_u2[:, None] * uv                                        # A(grad u, grad u)
    w2 = np.einsum("pc,pc->p", wv, wv)
    dA_ww = -w2[:, None] * lu                                          # (Delta A)(w, w)
    gw_w = np.einsum("pci,pc->pi", gw, wv)                             # <d_i w, w>
    nA_gw_w = -np.einsum("pi,pci->pc", gw_w, gu)                       # (grad A)(grad w, w)
    A_gw_gw = -np.einsum("pci,pci->p", gw, gw)[:, None] * uv           # A(grad w, grad w)
    A_w_lw = -np.einsum("pc,pc->p", wv, lw)[:, None] * uv              # A(w, Delta w)
    c_grad = 4.0 if form == "corrected" else 2.0
    t1 = np.einsum("pc,pc->p", au, dA_ww + c_grad * nA_gw_w + 2.0 * A_gw_gw + 2.0 * A_w_lw)
    u_lu = np.einsum("pc,pc->p", uv, lu)
    gu_lu = np.einsum("pci,pc->pi", gu, lu)
    dP_lu = -(gu * u_lu[:, None, None] + uv[:, :, None] * gu_lu[:, None, :])   # (d_i P) Delta u
    rhs2 = -w2[:, None, None] * gu - 2.0 * uv[:, :, None] * gw_w[:, None, :]  # (d_i A)(w,w) + 2A(d_i w, w)
    t2 = -2.0 * np.einsum("pci,pci->p", dP_lu, rhs2)
    lu2 = np.einsum("pc,pc->p", lu, lu)
    ddP_lu = -(lu * u_lu[:, None] + 2.0 * np.einsum("pci,pi->pc", gu, gu_lu) + uv * lu2[:, None])
    sign = -1.0 if form == "corrected" else 1.0
    t3 = sign * np.einsum("pc,pc->p", ddP_lu, -w2[:, None] * uv)
    dens = np.einsum("pc,pc->p", lw, lw) + t1 + t2 + t3
    return u.integrate(dens)


def second_variation_direct(u: GridField, w: GridField) -> float:
    """``int |Delta w|^2 + <Delta u, Delta(A_u(w, w))>`` from jet algebra."""
    _check_pair(u, w)
    aww = u.jet.times(jet_dot(w.jet, w.jet)).scaled(-1.0)
    lw = w.jet.laplacian()
    dens = np.einsum("pc,pc->p", lw, lw) + np.einsum("pc,pc->p", u.jet.laplacian(),
                                                      aww.laplacian())
    return u.integrate(dens)


def energy_along(u: GridField, w: GridField, t: float) -> float:
    """``(1/2) int |Delta Pi(u + t w)|^2`` over the grid."""
    n = normalize(u.jet + w.jet.scaled(t))
    lap = n.laplacian()
    return 0.5 * u.integrate(np.einsum("pc,pc->p", lap, lap))


def first_variation_fd(u: GridField, w: GridField, h: float = 1e-3) -> float:
    return (energy_along(u, w, h) - energy_along(u, w, -h)) / (2.0 * h)


def second_variation_fd(u: GridField, w: GridField, steps=(1e-2, 5e-3)) -> float:
    """Central second differences at two steps combined by Richardson extrapolation."""
    e0 = energy_along(u, w, 0.0)
    diffs = [(energy_along(u, w, h) - 2.0 * e0 + energy_along(u, w, -h)) / (h * h)
             for h in steps]
    ratio = steps[0] / steps[1]
    return diffs[1] + (diffs[1] - diffs[0]) / (ratio ** 2 - 1.0)


def bump_profile(r0: float, r1: float) -> Callable:
    """``psi(r) = (4 (r - r0)(r1 - r)/(r1 - r0)^2)^3`` and its two derivatives."""
    h = (r1 - r0) ** 2 / 4.0

    def psi(r):
        q = (r - r0) * (r1 - r) / h
        q1 = (r0 + r1 - 2.0 * r) / h
        q2 = -2.0 / h
        return q ** 3, 3.0 * q * q * q1, 6.0 * q * q1 * q1 + 3.0 * q * q * q2

    return psi


def tangent_variation(u: GridField, rng: np.random.Generator, r0: float, r1: float,
                      degree: int = 2) -> GridField:
    """Random tangent ``w = psi(|x|) P_u V`` vanishing to second order at ``r0, r1``."""
    d = u.d
    m1 = u.jet.val.shape[1]
    exps = [e for e in itertools.product(range(degree + 1), repeat=d) if sum(e) <= degree]
    V = PolynomialMap(np.array(exps, dtype=int), rng.standard_normal((len(exps), m1)))
    points = u.points
    vj = V.jet(points)
    f0, f1, f2 = bump_profile(r0, r1)(np.linalg.norm(points, axis=1))
    psi = radial_jet(points, f0, f1, f2)
    tangent = vj - u.jet.times(jet_dot(vj, u.jet))
    return GridField(d, u.radii, u.nodes, u.weights, tangent.times(psi))


def d2_lower_bound_terms(u: GridField, w: GridField) -> dict:
    """The integrals appearing in the elementary lower bound for ``Q_u``."""
    gu2 = np.einsum("pci,pci->p", u.jet.grad, u.jet.grad)
    lu = np.linalg.norm(u.jet.laplacian(), axis=1)
    gw2 = np.einsum("pci,pci->p", w.jet.grad, w.jet.grad)
    w2 = np.einsum("pc,pc->p", w.jet.val, w.jet.val)
    lw = w.jet.laplacian()
    return {
        "Q": second_variation(u, w),
        "lap_w": u.integrate(np.einsum("pc,pc->p", lw, lw)),
        "grad_terms": u.integrate((gu2 + lu) * gw2),
        "lap_u_terms": u.integrate(lu ** 2 * w2),
        "quartic_terms": u.integrate(gu2 ** 2 * w2),
    }


def _needed_constant(t: dict, eps: float) -> float:
    deficit = (1.0 - eps) * t["lap_w"] - t["Q"]
    if deficit <= 0.0:
        return 0.0
    return deficit / (t["grad_terms"] + t["lap_u_terms"] + t["quartic_terms"] / eps)


def verify_d2_lower_bound(u: GridField, w: GridField, eps: float, constant: float = 2.0,
                          tol: float = 1e-10) -> LemmaCheck:
    """``Q_u(w) >= (1-eps) int |Delta w|^2 - C (...)`` with a given ``C``.

    For sphere targets ``C = 2`` is admissible: pointwise,
    ``2|grad u|^2 |w||Delta w| <= eps |Delta w|^2 + |grad u|^4 |w|^2/eps`` and
    ``4|grad u||Delta u||grad w||w| <= 2|Delta u||grad w|^2 + |grad u|^4|w|^2
    + |Delta u|^2 |w|^2``.  ``params`` carry the smallest constant this
    ``(u, w)`` needs.
    """
    if not 0.0 < eps < 1.0:
        raise PreconditionError("eps must lie in (0, 1)")
    t = d2_lower_bound_terms(u, w)
    lower = ((1.0 - eps) * t["lap_w"] - constant * (t["grad_terms"] + t["lap_u_terms"])
             - constant / eps * t["quartic_terms"])
    scale = max(t["lap_w"], 1e-300)
    return LemmaCheck.compare("elementary_d2_lower_bound", lower / scale, t["Q"] / scale, tol=0.0,
                              atol=tol, eps=eps, constant=constant,
                              needed_constant=_needed_constant(t, eps), **t)


def fit_d2_constant(pairs: list, eps: float) -> float:
    """Smallest constant making the lower bound hold for every ``(u, w)`` pair."""
    return max(_needed_constant(d2_lower_bound_terms(u, w), eps) for u, w in pairs)


# ---------------------------------------------------------------------------
# Pohozaev
# ---------------------------------------------------------------------------
def _sphere_rule(d: int, R: float, level: int):
    quad = angular_quadrature(d, level)
    return R * quad.nodes, quad.weights * R ** (d - 1)


def pohozaev_flux(u: SphereMap, R: float, level: int = 8) -> float:
    """``int_{dB_R} (r/2 |Delta u|^2 + r u_r.(Delta u)_r - r u_rr.Delta u - u_r.Delta u)``."""
    if u.d != 4:
        raise DomainError("the Pohozaev flux is set up in dimension 4")
    pts, w = _sphere_rule(u.d, R, level)
    q = u.radial_fn(pts)
    dens = (0.5 * R * np.einsum("pc,pc->p", q["lap"], q["lap"])
            + R * np.einsum("pc,pc->p", q["ur"], q["lap_r"])
            - R * np.einsum("pc,pc->p", q["urr"], q["lap"])
            - np.einsum("pc,pc->p", q["ur"], q["lap"]))
    return float(w @ dens)


def pohozaev_sides(u: SphereMap, R: float, level: int = 8) -> tuple[float, float]:
    """Radial-derivative side and spherical-Laplacian side of the identity on ``dB_R``.

    They satisfy ``rhs - lhs = 2 Q(R)/R`` with ``Q`` the flux, so they agree
    exactly when the flux vanishes.
    """
    if u.d != 4:
        raise DomainError("the Pohozaev identity is set up in dimension 4")
    pts, w = _sphere_rule(u.d, R, level)
    q = u.radial_fn(pts)
    ur, urr, urrr, lap, lap_r = q["ur"], q["urr"], q["urrr"], q["lap"], q["lap_r"]
    dot = lambda a, b: np.einsum("pc,pc->p", a, b)
    lhs = dot(urr, urr) + 3.0 / R ** 2 * dot(ur, ur) - 2.0 * dot(ur, urrr + 2.0 / R * urr)
    lap_s = R ** 2 * (lap - urr - 3.0 / R * ur)
    lap_s_r = (2.0 * R * (lap - urr - 3.0 / R * ur)
               + R ** 2 * (lap_r - urrr + 3.0 / R ** 2 * ur - 3.0 / R * urr))
    rhs = dot(lap_s, lap_s) / R ** 4 + 2.0 / R ** 2 * dot(ur, lap_s_r)
    return float(w @ lhs), float(w @ rhs)


def verify_flux_constancy(u: SphereMap, radii=(0.5, 1.0, 2.0), target: float | None = None,
                          tol: float = 1e-7, level: int = 8) -> LemmaCheck:
    """``Q(R)`` is the same at every radius (and equals ``target`` if given)."""
    values = [pohozaev_flux(u, R, level) for R in radii]
    ref = target if target is not None else values[0]
    scale = abs(ref) if ref != 0.0 else 1.0
    spread = max(abs(v - ref) for v in values) / scale
    return LemmaCheck.compare("pohozaev_flux", spread, tol, tol=0.0, radii=list(radii),
                              values=values, target=ref, map=u.name)


def verify_pohozaev_identity(u: SphereMap, radii=(0.25, 0.5, 0.9), tol: float = 1e-6,
                             level: int = 24) -> LemmaCheck:
    """Both sides of the identity agree on every sampled sphere.

    Maps singular at the origin are routed to :func:`verify_flux_constancy`
    and the failed identity is reported in its ``params``.  ``level`` is the
    angular quadrature level; maps whose singularity lies just outside the
    largest sphere need a fine rule.
    """
    sides = [pohozaev_sides(u, R, level) for R in radii]
    if not u.regular_at_origin:
        check = verify_flux_constancy(u, radii, level=level)
        check.params["identity_sides"] = [list(s) for s in sides]
        check.params["identity_holds"] = False
        return check
    gap = max(abs(l - r) / max(1.0, abs(l), abs(r)) for l, r in sides)
    return LemmaCheck.compare("pohozaev_identity", gap, tol, tol=0.0, radii=list(radii),
                              sides=[list(s) for s in sides], map=u.name)


# ---------------------------------------------------------------------------
# Hardy-Rellich forms
# ---------------------------------------------------------------------------
RELLICH_A_THRESHOLD = 15.0 * math.sqrt(4.0 + 3.0 * math.pi * (math.pi + 1.0)) / 2.0


def _rellich_b_term(n: int) -> float:
    k = n * (n + 2)
    s = 8.0 + 204.0 * k
    return (math.pi * math.sqrt(s + math.sqrt(s * s + 4.0 * k + 16.0 * k * k))
            / math.sqrt(32.0 * k + 16.0 * k * k))


def rellich_b_threshold(nmax: int = 50) -> dict:
    """The conformal-class threshold of the gradient bound: its value at ``n = 1`` and the sup."""
    values = [_rellich_b_term(n) for n in range(1, nmax + 1)]
    return {"n1": values[0], "sup": max(values), "argmax": int(np.argmax(values)) + 1}


def rellich_a_bound(L: float) -> float:
    return (4.0 + math.pi ** 2 / L ** 2) * math.pi ** 2 / L ** 2


def rellich_b_bound(L: float) -> float:
    """The gradient bound exactly as stated (note ``pi^4/L^2``, not ``pi^4/L^4``)."""
    L2 = L * L
    return (9.0 + 10.0 * math.pi ** 2 / L2 + math.pi ** 4 / L2) / (3.0 + math.pi ** 2 / L2)


@dataclass(frozen=True)
class RellichForms:
    """Square-root matrices of the mode-``n`` quadratic forms on a trial basis.

    Each form is ``F = R^T R`` with ``R`` sampled at composite Gauss nodes in
    ``t``, so generalized eigenvalues come from a QR of the denominator root
    without ever forming ill-conditioned Gram matrices.
    """

    L: float
    n: int
    size: int
    roots: dict

    def matrix(self, name: str) -> np.ndarray:
        R = self.roots[name]
        return R.T @ R


def _trial_basis(size: int, L: float, t: np.ndarray):
    """``(s(1-s))^2 T_k(2s-1)`` with ``s = t/L`` and derivatives in ``t``."""
    x = 2.0 * t / L - 1.0
    bump = C.chebfromroots([1.0, 1.0, -1.0, -1.0])
    vals = np.empty((3, t.size, size))
    for k in range(size):
        coef = C.chebmul(bump, np.eye(size)[k])
        for j in range(3):
            vals[j, :, k] = C.chebval(x, C.chebder(coef, j) if j else coef) * (2.0 / L) ** j
    return vals


def _composite_gauss(L: float, npts: int = 48):
    pieces = max(4, math.ceil(L))
    x, w = np.polynomial.legendre.leggauss(npts)
    edges = np.linspace(0.0, L, pieces + 1)
    t = np.concatenate([0.5 * (b - a) * x + 0.5 * (a + b) for a, b in zip(edges[:-1], edges[1:])])
    wt = np.concatenate([0.5 * (b - a) * w for a, b in zip(edges[:-1], edges[1:])])
    return t, wt


def rellich_forms(L: float, n: int, size: int = 40, beta: float | None = None,
                  d: int = 4) -> RellichForms:
    """Forms ``lap`` (``int (Delta u)^2``), ``hardy``, ``grad`` and, with ``beta``, ``weighted``."""
    if d != 4:
        raise DomainError("the log-variable forms are written for d = 4")
    lam = laplace_eigenvalue(d, n)
    t, w = _composite_gauss(L)
    g, g1, g2 = _trial_basis(size, L, t)
    sw = np.sqrt(w)[:, None]
    roots = {
        "lap": sw * (g2 + 2.0 * g1 - lam * g),
        "hardy": sw * g,
        "grad": np.vstack([sw * g1, math.sqrt(lam) * sw * g]),
    }
    if beta is not None:
        rho = np.exp(beta * (t - L)) + np.exp(-beta * t)
        sr = np.sqrt(w * rho)[:, None]
        roots["weighted"] = np.vstack([math.sqrt(1.0 + lam) * sr * g, sr * g1])
    return RellichForms(L, n, size, roots)


def generalized_spectrum(num_root: np.ndarray, den_root: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of ``num^T num x = mu den^T den x``."""
    _, R = qr(den_root, mode="economic")
    M = solve_triangular(R, num_root.T, trans="T").T
    s = np.linalg.svd(M, compute_uv=False)
    return np.sort(s ** 2)


def mode_minima(L: float, denominator: str, modes=range(11), size: int = 40,
                beta: float | None = None) -> dict:
    """Smallest Rayleigh quotient of ``int (Delta u)^2`` against a form, per mode."""
    out = {}
    for n in modes:
        f = rellich_forms(L, n, size, beta)
        out[n] = float(generalized_spectrum(f.roots["lap"], f.roots[denominator])[0])
    return out


def _conformal_length(a: float, b: float) -> float:
    if not 0.0 < a < b:
        raise PreconditionError("need 0 < a < b")
    return math.log(b / a)


def verify_rellich_A(a: float = 1.0, b: float = math.exp(50.0), modes=range(11),
                     size: int = 40) -> LemmaCheck:
    """Rayleigh minima of ``int (Delta u)^2 / int u^2/|x|^4`` against the stated bound."""
    L = _conformal_length(a, b)
    if L < RELLICH_A_THRESHOLD:
        raise PreconditionError(f"log(b/a) = {L} is below the threshold {RELLICH_A_THRESHOLD}")
    minima = mode_minima(L, "hardy", modes, size)
    bound = rellich_a_bound(L)
    worst = min(minima, key=minima.get)
    return LemmaCheck.compare("th:bound_biharmonic0", bound, minima[worst], tol=0.0, L=L,
                              size=size, worst_mode=worst, minima=minima, bound=bound)


def verify_rellich_B(a: float = 1.0, b: float = math.exp(30.0), modes=range(11),
                     size: int = 40) -> LemmaCheck:
    """Rayleigh minima of ``int (Delta u)^2 / int |grad u|^2/|x|^2`` against the stated bound."""
    L = _conformal_length(a, b)
    th = rellich_b_threshold()
    if L < th["sup"]:
        raise PreconditionError(f"log(b/a) = {L} is below the threshold {th['sup']}")
    minima = mode_minima(L, "grad", modes, size)
    bound = rellich_b_bound(L)
    worst = min(minima, key=minima.get)
    symbol = (9.0 + 10.0 * math.pi ** 2 / L ** 2 + math.pi ** 4 / L ** 4) / (3.0 + math.pi ** 2 / L ** 2)
    return LemmaCheck.compare("th:bound_biharmonic1", bound, minima[worst], tol=0.0, L=L,
                              size=size, worst_mode=worst, minima=minima, bound=bound,
                              bound_quartic=symbol, threshold=th["sup"])


def rellich_c_constant(a: float, b: float, beta: float, modes=range(11), size: int = 40) -> float:
    """Best constant of the weighted inequality on the trial space (min over modes)."""
    L = _conformal_length(a, b)
    return min(mode_minima(L, "weighted", modes, size, beta).values())


def verify_rellich_C(a: float = 1.0, b: float = math.exp(10.0), beta: float = 1.0,
                     modes=range(11), size: int = 40, coarse: int = 30,
                     stability: float = 0.01) -> LemmaCheck:
    """``C_beta > 0`` and stable between two nested basis sizes."""
    if beta <= 0.0:
        raise PreconditionError("beta must be positive")
    fine = rellich_c_constant(a, b, beta, modes, size)
    rough = rellich_c_constant(a, b, beta, modes, coarse)
    change = abs(rough - fine) / fine if fine > 0 else math.inf
    ok = bool(fine > 0.0 and change <= stability and fine <= rough * (1.0 + 1e-9))
    return LemmaCheck("th:bound_biharmonic2", 0.0, fine, fine, ok,
                      {"beta": beta, "L": math.log(b / a), "size": size, "coarse": coarse,
                       "coarse_constant": rough, "relative_change": change, "tol": stability})


def cross_mode_coupling(n: int, m: int, d: int = 4, level: int = 12) -> float:
    """``int_S (Y_n Y_m + grad Y_n . grad Y_m)`` for the first harmonic of degrees ``n, m``.

    Every mode form is a combination of these two pairings, so a vanishing
    value for ``n != m`` means the forms do not couple different degrees.
    """
    quad = angular_quadrature(d, level)
    top = max(n, m)
    sol = solid_harmonics(d, top, quad.nodes)
    yn, ym = sol[n][0][:, 0], sol[m][0][:, 0]
    gn = sphere_gradient(d, n, quad.nodes)[:, 0, :]
    gm = sphere_gradient(d, m, quad.nodes)[:, 0, :]
    return float(quad.integrate(yn * ym + np.einsum("pi,pi->p", gn, gm)))


def spectra_csv(L: float, denominator: str, modes=range(11), size: int = 40, count: int = 5,
                beta: float | None = None) -> str:
    """CSV rows ``mode, index, value`` of the smallest generalized eigenvalues."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mode", "index", "value"])
    for n in modes:
        f = rellich_forms(L, n, size, beta)
        spec = generalized_spectrum(f.roots["lap"], f.roots[denominator])
        for i, v in enumerate(spec[:count]):
            writer.writerow([n, i, repr(float(v))])
    return buf.getvalue()


def dirichlet_ball_eigenvalue(d: int = 4, size: int = 12) -> float:
    """First Dirichlet eigenvalue of the unit ball from the radial Rayleigh problem.

    Trial functions ``(1 - r^2) r^{2k}``; the forms ``int f'^2 r^{d-1}`` and
    ``int f^2 r^{d-1}`` are exact monomial integrals.
    """
    # f = sum_k c_k (r^{2k} - r^{2k+2}); entries via int r^p = 1/(p+1)
    def mono(p):
        return 1.0 / (p + 1.0)
    K = np.empty((size, size))
    M = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            pi = [(2 * i, 1.0), (2 * i + 2, -1.0)]
            pj = [(2 * j, 1.0), (2 * j + 2, -1.0)]
            M[i, j] = sum(ci * cj * mono(ei + ej + d - 1) for ei, ci in pi for ej, cj in pj)
            K[i, j] = sum(ci * cj * ei * ej * mono(ei + ej - 2 + d - 1)
                          for ei, ci in pi for ej, cj in pj if ei > 0 and ej > 0)
    return float(eigh(K, M, eigvals_only=True)[0])


# ---------------------------------------------------------------------------
# Neck assembly
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class NeckWeight:
    """``omega(x) = |x|^{-4} ((|x|/alpha)^{2 beta} + (rho/(alpha |x|))^{2 beta} + 1/log^2(alpha^2/rho))``.

    Defined on ``B_alpha \\ B_{rho/alpha}`` and continued by its boundary
    values inside and outside.
    """

    alpha: float
    rho: float
    beta: float

    def __post_init__(self):
        if not (0.0 < self.rho < self.alpha ** 2 and 0.0 < self.beta):
            raise DomainError("need 0 < rho < alpha^2 and beta > 0")

    @property
    def inner(self) -> float:
        return self.rho / self.alpha

    @property
    def log_ratio(self) -> float:
        return math.log(self.alpha ** 2 / self.rho)

    def core(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        b2 = 2.0 * self.beta
        return r ** -4 * ((r / self.alpha) ** b2 + (self.inner / r) ** b2
                          + 1.0 / self.log_ratio ** 2)

    def __call__(self, r) -> np.ndarray:
        r = np.clip(np.asarray(r, dtype=float), self.inner, self.alpha)
        return self.core(r)


def neck_integrals(v: GridField, a: float, b: float, beta: float) -> dict:
    """``int |Delta v|^2``, ``int |grad v|^2/|x|^2``, ``int |v|^2/|x|^4`` and the weighted term."""
    r = v.r
    P = v.weights.size
    lap = v.jet.laplacian().reshape(P, -1)
    v2 = (v.jet.val.reshape(P, -1) ** 2).sum(axis=1)
    g2 = (v.jet.grad.reshape(P, -1) ** 2).sum(axis=1)
    weight = (r / b) ** (2.0 * beta) + (a / r) ** (2.0 * beta)
    return {
        "lap": v.integrate((lap ** 2).sum(axis=1)),
        "grad": v.integrate(g2 / r ** 2),
        "hardy": v.integrate(v2 / r ** 4),
        "weighted": v.integrate(v2 * weight / r ** 4),
    }


def assemble_neck_positivity(v: GridField, a: float, b: float, beta: float,
                             c2beta: float | None = None, tol: float = 1e-10) -> LemmaCheck:
    """``(3/4) int |Delta v|^2 >= (1/2) G + (2 pi^2/L^2) H + (C_{2 beta}/12) W``.

    The split ``3/4 = 1/6 + 1/2 + 1/12`` applies the gradient bound
    (``>= 3``), the Hardy bound and the weighted bound to the three parts;
    the gradient term therefore carries ``3/6 = 1/2``.  ``params`` report
    whether the same inequality with coefficient 1 on ``G`` holds for ``v``.
    """
    L = _conformal_length(a, b)
    if L < RELLICH_A_THRESHOLD or L < rellich_b_threshold()["sup"]:
        raise PreconditionError("the annulus is below the Hardy-Rellich thresholds")
    if c2beta is None:
        c2beta = rellich_c_constant(a, b, 2.0 * beta)
    s = neck_integrals(v, a, b, beta)
    lhs = 0.75 * s["lap"]
    rhs = 0.5 * s["grad"] + 2.0 * math.pi ** 2 / L ** 2 * s["hardy"] + c2beta / 12.0 * s["weighted"]
    printed = s["grad"] + 2.0 * math.pi ** 2 / L ** 2 * s["hardy"] + c2beta / 12.0 * s["weighted"]
    split = (rellich_b_bound(L) / 6.0 * s["grad"] + 0.5 * rellich_a_bound(L) * s["hardy"]
             + c2beta / 12.0 * s["weighted"])
    return LemmaCheck.compare("neck_positive", rhs, lhs, tol=tol, L=L, beta=beta,
                              c2beta=c2beta, split_rhs=split, printed_rhs=printed,
                              printed_holds=bool(printed <= lhs * (1 + tol)), **s)


def verify_neck_stability(u: GridField, v: GridField, weight: NeckWeight,
                          c2beta: float | None = None, tol: float = 1e-10) -> LemmaCheck:
    """``Q_u(v) >= (1/4) G + pi^2/L^2 H + (C_{2 beta}/12) W`` on the neck of ``weight``.

    ``params`` include ``int omega |v|^2`` for the neck weight, which
    bounds the last two terms from below by ``min(pi^2, C/12)`` times it.
    """
    a, b, beta = weight.inner, weight.alpha, weight.beta
    L = weight.log_ratio
    if c2beta is None:
        c2beta = rellich_c_constant(a, b, 2.0 * beta)
    s = neck_integrals(v, a, b, beta)
    P = v.weights.size
    v2 = (v.jet.val.reshape(P, -1) ** 2).sum(axis=1)
    omega_int = v.integrate(weight(v.r) * v2)
    Q = second_variation(u, v)
    rhs = 0.25 * s["grad"] + math.pi ** 2 / L ** 2 * s["hardy"] + c2beta / 12.0 * s["weighted"]
    return LemmaCheck.compare("ineq:stability_ineq", rhs, Q, tol=tol, L=L, beta=beta,
                              c2beta=c2beta, omega_integral=omega_int, **s)
