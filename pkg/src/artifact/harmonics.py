"""Spherical harmonics on ``S^{d-1}``.

Conventions
-----------
The basis is normalised so that the *sphere average* of ``(Y_n^k)^2`` is one,
hence ``int_{S^{d-1}} (Y_n^k)^2 = beta(d)``.  Most references use unit
``L^2`` norm instead; every norm identity in :mod:`artifact.annulus` relies
on the average convention.

The basis is built from the Gegenbauer ladder.  A solid harmonic of degree
``n`` in ``R^d`` is

    P(x) = r^m C^{l+(d-2)/2}_m(x_d / r) * Q(x_1, ..., x_{d-1}),   m = n - l,

where ``Q`` is a solid harmonic of degree ``l`` in one dimension less and
``r = |x|``.  Expanding the Gegenbauer factor in powers of ``x_d`` and
``r^2`` makes ``P`` an explicit polynomial, so values, gradients and
Hessians are exact.  In ``d = 3`` this is the associated Legendre times
trigonometric basis; in ``d = 4`` it is the ladder ``C^{l+1}_{n-l}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._kernels import ladder_partials
from .specfun import DomainError, sphere_area

__all__ = [
    "HarmonicIndex",
    "dim_harmonics",
    "laplace_eigenvalue",
    "basis_labels",
    "solid_harmonics",
    "eval_basis",
    "sphere_gradient",
    "AngularQuadrature",
    "angular_quadrature",
    "bochner_hessian_integral",
    "sphere_hessian_sq_quadrature",
]


class UnsupportedDimension(DomainError):
    """Pointwise bases are only provided for d in {3, 4}."""


@dataclass(frozen=True)
class HarmonicIndex:
    """Label ``(d, n, k)`` of a basis harmonic, ``1 <= k <= N_d(n)``."""

    d: int
    n: int
    k: int

    def __post_init__(self):
        if self.d < 3 or self.n < 0:
            raise DomainError(f"invalid harmonic index {self}")
        if not 1 <= self.k <= dim_harmonics(self.d, self.n):
            raise DomainError(f"k={self.k} outside 1..N_{self.d}({self.n})")


def dim_harmonics(d: int, n: int) -> int:
    """Dimension ``N_d(n)`` of degree-``n`` spherical harmonics on ``S^{d-1}``.

    Computed as ``C(n+d-1, d-1) - C(n+d-3, d-1)`` with exact integers.
    ``d = 2`` is accepted for internal use (``N_2(0) = 1``, else ``2``).
    """
    d, n = int(d), int(n)
    if d < 2 or n < 0:
        raise DomainError(f"dim_harmonics needs d >= 2, n >= 0 (got {d}, {n})")
    first = math.comb(n + d - 1, d - 1)
    second = math.comb(n + d - 3, d - 1) if n + d - 3 >= 0 else 0
    return first - second


def laplace_eigenvalue(d: int, n: int) -> float:
    """Eigenvalue ``n(n+d-2)`` of ``-Delta`` on ``S^{d-1}``."""
    if d < 2 or n < 0:
        raise DomainError("laplace_eigenvalue needs d >= 2, n >= 0")
    return float(n * (n + d - 2))


# ---------------------------------------------------------------------------
# Ladder bookkeeping
# ---------------------------------------------------------------------------
@lru_cache(maxsize=None)
def basis_labels(d: int, n: int) -> tuple:
    """Ladder labels of the degree-``n`` basis, in the order ``k = 1, 2, ...``.

    For ``d = 2`` the labels are ``(m, 'c')`` / ``(m, 's')``; for ``d >= 3``
    a label is ``(l, sub)`` with ``sub`` a label one dimension down.
    """
    if d == 2:
        return ((0, "c"),) if n == 0 else ((n, "c"), (n, "s"))
    out = []
    for l in range(n + 1):
        for sub in basis_labels(d - 1, l):
            out.append((l, sub))
    return tuple(out)


@lru_cache(maxsize=None)
def _ladder_coefficients(m: int, lam: float) -> tuple:
    """Coefficients ``c_j`` with ``r^m C^lam_m(x/r) = sum_j c_j x^{m-2j} r^{2j}``."""
    coefs = []
    for j in range(m // 2 + 1):
        rising = 1.0
        for i in range(m - j):
            rising *= lam + i
        c = (-1) ** j * rising / (math.factorial(j) * math.factorial(m - 2 * j))
        coefs.append(c * 2.0 ** (m - 2 * j))
    return tuple(coefs)


@lru_cache(maxsize=None)
def _square_integral(d: int, n: int, label) -> float:
    """``int_{S^{d-1}} P^2`` for the unnormalised ladder polynomial ``P``."""
    if d == 2:
        return 2.0 * math.pi if n == 0 else math.pi
    l, sub = label
    m = n - l
    lam = l + (d - 2) / 2.0
    # int_{-1}^{1} (C^lam_m)^2 (1-t^2)^{lam-1/2} dt
    log_h = (math.log(math.pi) + (1.0 - 2.0 * lam) * math.log(2.0)
             + math.lgamma(m + 2.0 * lam) - math.lgamma(m + 1.0)
             - math.log(m + lam) - 2.0 * math.lgamma(lam))
    return math.exp(log_h) * _square_integral(d - 1, l, sub)


@lru_cache(maxsize=None)
def _norm_factors(d: int, n: int) -> np.ndarray:
    beta = sphere_area(d)
    return np.array([math.sqrt(beta / _square_integral(d, n, lab)) for lab in basis_labels(d, n)])


# ---------------------------------------------------------------------------
# Evaluation of solid harmonics (values, gradients, Hessians)
# ---------------------------------------------------------------------------
def _ladder_factor(m: int, lam: float, xd: np.ndarray, s: np.ndarray, order: int):
    """Ladder factor ``G = sum c_j xd^{m-2j} s^j`` and its partials in (xd, s)."""
    coefs = np.asarray(_ladder_coefficients(m, lam))
    return tuple(ladder_partials(coefs, m, xd, s))


def _raw_solid(d: int, nmax: int, x: np.ndarray, order: int) -> list:
    """Unnormalised ladder polynomials for degrees ``0..nmax``.

    Returns a list indexed by degree of tuples ``(val, grad, hess)`` with
    shapes ``(M, N)``, ``(M, N, d)``, ``(M, N, d, d)`` (``None`` when the
    derivative order is not requested).
    """
    m_pts = x.shape[0]
    if d == 2:
        z = x[:, 0] + 1j * x[:, 1]
        out = []
        for n in range(nmax + 1):
            if n == 0:
                val = np.ones((m_pts, 1))
                grad = np.zeros((m_pts, 1, 2)) if order >= 1 else None
                hess = np.zeros((m_pts, 1, 2, 2)) if order >= 2 else None
            else:
                zn = z ** n
                val = np.stack([zn.real, zn.imag], axis=1)
                grad = hess = None
                if order >= 1:
                    dz = n * z ** (n - 1)
                    # d/dx z^n = n z^{n-1}, d/dy z^n = i n z^{n-1}
                    gx = dz
                    gy = 1j * dz
                    grad = np.empty((m_pts, 2, 2))
                    grad[:, 0, 0], grad[:, 0, 1] = gx.real, gy.real
                    grad[:, 1, 0], grad[:, 1, 1] = gx.imag, gy.imag
                if order >= 2:
                    ddz = n * (n - 1) * z ** (n - 2) if n >= 2 else np.zeros_like(z)
                    hxx, hxy, hyy = ddz, 1j * ddz, -ddz
                    hess = np.empty((m_pts, 2, 2, 2))
                    for comp, part in ((0, np.real), (1, np.imag)):
                        hess[:, comp, 0, 0] = part(hxx)
                        hess[:, comp, 0, 1] = part(hxy)
                        hess[:, comp, 1, 0] = part(hxy)
                        hess[:, comp, 1, 1] = part(hyy)
            out.append((val, grad, hess))
        return out

    lower = _raw_solid(d - 1, nmax, x[:, : d - 1], order)
    xd = x[:, d - 1]
    s = np.einsum("ij,ij->i", x, x)
    out = []
    for n in range(nmax + 1):
        vals, grads, hesses = [], [], []
        for l in range(n + 1):
            q_val, q_grad, q_hess = lower[l]
            m = n - l
            lam = l + (d - 2) / 2.0
            g, gx, gs, gxx, gxs, gss = _ladder_factor(m, lam, xd, s, order)
            vals.append(g[:, None] * q_val)
            if order >= 1:
                # Cartesian gradient of G
                dg = 2.0 * gs[:, None] * x
                dg[:, d - 1] += gx
                # pad Q's gradient with a zero in the x_d slot
                qg = np.zeros(q_grad.shape[:2] + (d,))
                qg[:, :, : d - 1] = q_grad
                grads.append(dg[:, None, :] * q_val[:, :, None] + g[:, None, None] * qg)
            if order >= 2:
                eye = np.eye(d)
                hg = 4.0 * gss[:, None, None] * x[:, :, None] * x[:, None, :]
                hg += 2.0 * gs[:, None, None] * eye[None]
                cross = 2.0 * gxs[:, None] * x
                hg[:, d - 1, :] += cross
                hg[:, :, d - 1] += cross
                hg[:, d - 1, d - 1] += gxx
                qh = np.zeros(q_hess.shape[:2] + (d, d))
                qh[:, :, : d - 1, : d - 1] = q_hess
                term = hg[:, None] * q_val[:, :, None, None]
                term += dg[:, None, :, None] * qg[:, :, None, :]
                term += qg[:, :, :, None] * dg[:, None, None, :]
                term += g[:, None, None, None] * qh
                hesses.append(term)
        val = np.concatenate(vals, axis=1)
        grad = np.concatenate(grads, axis=1) if order >= 1 else None
        hess = np.concatenate(hesses, axis=1) if order >= 2 else None
        out.append((val, grad, hess))
    return out


def solid_harmonics(d: int, nmax: int, points, order: int = 0) -> list:
    """Normalised solid harmonics ``r^n Y_n^k(x/r)`` and their derivatives.

    Parameters
    ----------
    d : int
        Dimension, ``>= 3``.
    nmax : int
        Highest degree.
    points : array_like, shape (M, d)
        Cartesian evaluation points (need not lie on the sphere).
    order : {0, 1, 2}
        Highest derivative order to return.

    Returns
    -------
    list of tuple
        ``out[n] = (val, grad, hess)`` with ``val`` of shape ``(M, N_d(n))``,
        ``grad`` of shape ``(M, N_d(n), d)`` and ``hess`` of shape
        ``(M, N_d(n), d, d)``; unrequested orders are ``None``.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[1] != d:
        raise DomainError(f"points must have {d} columns")
    raw = _raw_solid(d, nmax, x, order)
    out = []
    for n, (val, grad, hess) in enumerate(raw):
        f = _norm_factors(d, n)
        out.append((val * f,
                    None if grad is None else grad * f[None, :, None],
                    None if hess is None else hess * f[None, :, None, None]))
    return out


def eval_basis(idx: HarmonicIndex, omega) -> float:
    """Value of the basis harmonic ``Y_n^k`` at a unit vector ``omega``.

    Raises
    ------
    UnsupportedDimension
        Unless ``idx.d`` is 3 or 4.
    """
    if idx.d not in (3, 4):
        raise UnsupportedDimension("pointwise bases exist only for d in {3, 4}")
    w = np.asarray(omega, dtype=float).reshape(1, -1)
    if w.shape[1] != idx.d:
        raise DomainError("omega has the wrong dimension")
    if abs(np.linalg.norm(w) - 1.0) > 1e-12:
        raise DomainError("omega must lie on the unit sphere")
    val = solid_harmonics(idx.d, idx.n, w)[idx.n][0]
    return float(val[0, idx.k - 1])


def sphere_gradient(d: int, n: int, omegas) -> np.ndarray:
    """Tangential gradients ``nabla_omega Y_n^k`` at unit vectors, shape (M, N, d).

    For the homogeneous extension ``P`` of degree ``n`` the tangential
    gradient on the unit sphere is ``grad P - n P omega``.
    """
    w = np.atleast_2d(np.asarray(omega_check(omegas), dtype=float))
    val, grad, _ = solid_harmonics(d, n, w, order=1)[n]
    return grad - n * val[:, :, None] * w[:, None, :]


def omega_check(omegas):
    arr = np.atleast_2d(np.asarray(omegas, dtype=float))
    if np.any(np.abs(np.linalg.norm(arr, axis=1) - 1.0) > 1e-10):
        raise DomainError("points must lie on the unit sphere")
    return arr


# ---------------------------------------------------------------------------
# Angular quadrature
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class AngularQuadrature:
    """Product rule on ``S^{d-1}`` exact for polynomials of degree ``<= 2 level``.

    Attributes
    ----------
    d : int
    level : int
    nodes : numpy.ndarray, shape (M, d)
    weights : numpy.ndarray, shape (M,)
        Positive, summing to ``beta(d)``.
    """

    d: int
    level: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> np.ndarray:
        """Integrate samples at ``nodes`` (first axis) against ``weights``."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def _chebyshev_u_rule(npts: int):
    """Gauss rule for weight ``sqrt(1 - t^2)`` on ``[-1, 1]`` (closed form)."""
    j = np.arange(1, npts + 1)
    theta = j * np.pi / (npts + 1)
    return np.cos(theta), np.pi / (npts + 1) * np.sin(theta) ** 2


@lru_cache(maxsize=None)
def angular_quadrature(d: int, level: int) -> AngularQuadrature:
    """Tensor product Gauss rule on ``S^{d-1}`` for ``d`` in {3, 4}.

    The azimuth uses ``2 level + 2`` equispaced nodes; every polar angle uses
    a Gauss rule with ``level + 1`` nodes for the weight ``sin^{j}``.
    """
    if d not in (3, 4):
        raise UnsupportedDimension("angular quadrature is provided for d in {3, 4}")
    if level < 0:
        raise DomainError("level must be >= 0")
    nphi = 2 * level + 2
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    wphi = np.full(nphi, 2.0 * np.pi / nphi)
    t2, w2 = np.polynomial.legendre.leggauss(level + 1)
    circle = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    # S^2 part: x = (sin th cos phi, sin th sin phi, cos th)
    s2 = np.sqrt(1.0 - t2 ** 2)
    nodes3 = (s2[:, None, None] * circle[None, :, :]).reshape(-1, 2)
    nodes3 = np.concatenate([nodes3, np.repeat(t2, nphi)[:, None]], axis=1)
    weights3 = (w2[:, None] * wphi[None, :]).ravel()
    if d == 3:
        nodes, weights = nodes3, weights3
    else:
        t1, w1 = _chebyshev_u_rule(level + 1)
        s1 = np.sqrt(1.0 - t1 ** 2)
        nodes = (s1[:, None, None] * nodes3[None, :, :]).reshape(-1, 3)
        nodes = np.concatenate([nodes, np.repeat(t1, nodes3.shape[0])[:, None]], axis=1)
        weights = (w1[:, None] * weights3[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return AngularQuadrature(d=d, level=level, nodes=nodes, weights=weights)


# ---------------------------------------------------------------------------
# Bochner identity on the sphere
# ---------------------------------------------------------------------------
def bochner_hessian_integral(d: int, n: int) -> float:
    """``int_{S^{d-1}} |nabla^2_omega Y|^2`` for an average-normalised ``Y``.

    Equals ``beta(d) n(n+d-2)(n^2+(d-2)(n-1))``; it follows from
    ``int |nabla^2 Y|^2 = int (Delta Y)^2 - (d-2) int |nabla Y|^2``.
    """
    if d < 3 or n < 0:
        raise DomainError("bochner_hessian_integral needs d >= 3, n >= 0")
    return sphere_area(d) * n * (n + d - 2) * (n * n + (d - 2) * (n - 1))


def sphere_hessian_sq_quadrature(d: int, n: int, level: int | None = None) -> np.ndarray:
    """Quadrature values of ``int |nabla^2_omega Y_n^k|^2`` for every ``k``.

    The covariant Hessian of ``Y`` equals the tangential projection of the
    Cartesian Hessian of the degree-zero extension ``|x|^{-n} P(x)``.
    """
    quad = angular_quadrature(d, level if level is not None else n + 2)
    w = quad.nodes
    val, grad, hess = solid_harmonics(d, n, w, order=2)[n]
    # Hessian of |x|^{-n} P at |x| = 1:
    #   H P - n (x grad P^T + grad P x^T) + (n(n+2) x x^T - n I) P
    eye = np.eye(d)
    xx = w[:, :, None] * w[:, None, :]
    h0 = hess.copy()
    h0 -= n * (w[:, None, :, None] * grad[:, :, None, :] + grad[:, :, :, None] * w[:, None, None, :])
    h0 += val[:, :, None, None] * (n * (n + 2) * xx[:, None] - n * eye[None, None])
    proj = eye[None] - xx
    ht = np.einsum("mab,mkbc,mcd->mkad", proj, h0, proj)
    sq = np.einsum("mkab,mkab->mk", ht, ht)
    return quad.integrate(sq)
