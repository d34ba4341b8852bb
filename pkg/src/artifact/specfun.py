"""Special functions used by the explicit constants.

Everything here is implemented from scratch on purpose so that the constants
do not depend on the library being tested against (scipy is used only as an
oracle in the test-suite).

Notes
-----
* Gamma uses the Lanczos approximation (g = 7, nine coefficients).
* Bessel ``J_nu`` is summed from its power series below ``x = 12`` and by
  Miller's backward recurrence above it.
* Lambert ``W`` is the principal branch only, refined by Halley steps.
"""
from __future__ import annotations

import math

import numpy as np

from ._kernels import gegenbauer_array

__all__ = [
    "DomainError",
    "NumericError",
    "gamma",
    "sphere_area",
    "ball_volume",
    "gegenbauer",
    "gegenbauer_derivative",
    "bessel_j",
    "bessel_j_derivative",
    "bessel_first_zero",
    "lambert_w",
    "conformal_thresholds",
]


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class NumericError(ArithmeticError):
    """A numerical procedure (bracketing, iteration) failed to converge."""


# ---------------------------------------------------------------------------
# Gamma
# ---------------------------------------------------------------------------
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma(x: float) -> float:
    """Gamma function for real arguments by the Lanczos approximation.

    Parameters
    ----------
    x : float
        Argument; poles at the non-positive integers raise ``DomainError``.

    Returns
    -------
    float
        ``Gamma(x)``; relative error below ``1e-13`` on ``[0.5, 30]``.
    """
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"gamma has a pole at {x}")
    if x < 0.5:
        # reflection formula
        return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))
    if x == math.floor(x) and x < 30:
        return float(math.factorial(int(x) - 1))
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    # exp/log form avoids overflow of t**(z+0.5) for moderate arguments
    return math.sqrt(2.0 * math.pi) * math.exp((z + 0.5) * math.log(t) - t) * acc


def sphere_area(d: int) -> float:
    """Surface area ``beta(d)`` of the unit sphere ``S^{d-1}`` in ``R^d``.

    Parameters
    ----------
    d : int
        Ambient dimension, at least 2.

    Returns
    -------
    float
        ``2 pi^{d/2} / Gamma(d/2)``.

    Examples
    --------
    >>> round(sphere_area(4) / math.pi**2, 12)
    2.0
    """
    if int(d) != d or d < 2:
        raise DomainError(f"sphere_area needs an integer d >= 2, got {d}")
    d = int(d)
    return 2.0 * math.pi ** (d / 2.0) / gamma(d / 2.0)


def ball_volume(d: int) -> float:
    """Lebesgue measure of the unit ball of ``R^d``, i.e. ``beta(d)/d``."""
    return sphere_area(d) / d


# ---------------------------------------------------------------------------
# Gegenbauer polynomials
# ---------------------------------------------------------------------------
def _check_gegenbauer_args(degree: int, order: float, x) -> np.ndarray:
    if int(degree) != degree or degree < 0:
        raise DomainError(f"degree must be a non-negative integer, got {degree}")
    if not order > 0:
        raise DomainError(f"order must be positive, got {order}")
    arr = np.asarray(x, dtype=float)
    if np.any(np.abs(arr) > 1.0 + 1e-12):
        raise DomainError("gegenbauer is only defined on [-1, 1] here")
    return arr


def gegenbauer(degree: int, order: float, x):
    """Gegenbauer (ultraspherical) polynomial ``C^order_degree(x)``.

    Uses the three-term recurrence
    ``(m+1) C_{m+1} = 2(m+order) x C_m - (m+2 order-1) C_{m-1}``.

    Parameters
    ----------
    degree : int
        Polynomial degree, ``>= 0``.
    order : float
        Positive order parameter.
    x : float or array_like
        Abscissa(e) in ``[-1, 1]``.

    Returns
    -------
    float or numpy.ndarray
        Same shape as ``x``.
    """
    arr = _check_gegenbauer_args(degree, order, x)
    flat = np.atleast_1d(arr).ravel()
    out = gegenbauer_array(int(degree), float(order), flat).reshape(np.shape(arr))
    return float(out) if np.ndim(arr) == 0 else out


def gegenbauer_derivative(degree: int, order: float, x):
    """Derivative ``d/dx C^order_degree = 2 order C^{order+1}_{degree-1}``."""
    arr = _check_gegenbauer_args(degree, order, x)
    if degree == 0:
        out = np.zeros_like(arr)
        return float(out) if np.ndim(arr) == 0 else out
    res = 2.0 * order * np.asarray(gegenbauer(degree - 1, order + 1.0, arr))
    return float(res) if np.ndim(arr) == 0 else res


# ---------------------------------------------------------------------------
# Bessel functions of the first kind
# ---------------------------------------------------------------------------
def _bessel_series(nu: float, x: float) -> float:
    half = 0.5 * x
    if x == 0.0:
        return 1.0 if nu == 0 else 0.0
    term = math.exp(nu * math.log(half) - math.lgamma(nu + 1.0))
    total = term
    q = -half * half
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + nu))
        total += term
        if abs(term) <= 1e-17 * abs(total) and k > 2:
            break
        if k > 500:  # pragma: no cover - would indicate misuse far outside range
            raise NumericError("bessel series did not converge")
    return total


def _bessel_miller(nu: float, x: float) -> float:
    """Miller backward recurrence normalised by the Neumann-type sum.

    The normalisation identity used is
    ``(x/2)^nu = sum_k (nu+2k) Gamma(nu+k)/k! J_{nu+2k}(x)``,
    which for ``nu = 0`` reads ``1 = J_0 + 2 sum_k J_{2k}``.
    """
    start = int(x + 2.0 * math.sqrt(40.0 * max(x, 1.0)) + 40)
    if start % 2:
        start += 1
    j_next = 0.0
    j_cur = 1e-300
    norm = 0.0
    value_at_nu = 0.0
    # coefficient c_m = (nu+2k) Gamma(nu+k)/k! for m = 2k, built in log form
    for m in range(start, -1, -1):
        if m % 2 == 0:
            k = m // 2
            if nu == 0.0 and k == 0:
                coef = 1.0
            elif nu == 0.0:
                coef = 2.0
            elif k == 0:
                coef = math.gamma(nu + 1.0)  # nu Gamma(nu), finite for tiny nu
            else:
                coef = (nu + 2 * k) * math.exp(math.lgamma(nu + k) - math.lgamma(k + 1.0))
            norm += coef * j_cur
        if m == 0:
            value_at_nu = j_cur
            break
        # J_{nu+m-1} = 2(nu+m)/x J_{nu+m} - J_{nu+m+1}
        j_prev = 2.0 * (nu + m) / x * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_next *= 1e-250
            norm *= 1e-250
    target = math.exp(nu * math.log(0.5 * x)) if nu > 0 else 1.0
    return value_at_nu * target / norm


# The power series is used below this abscissa whatever the order.  Keeping
# it up to ``2 nu`` (as first planned) loses all digits for nu >= 15 through
# cancellation, while Miller's recurrence is accurate on the whole range.
_SERIES_LIMIT = 12.0


def bessel_j(order: float, x: float) -> float:
    """Bessel function of the first kind ``J_order(x)`` for real ``x >= 0``.

    Parameters
    ----------
    order : float
        Non-negative order.
    x : float
        Non-negative argument.

    Returns
    -------
    float
    """
    nu = float(order)
    x = float(x)
    if nu < 0:
        raise DomainError("bessel_j needs order >= 0")
    if x < 0:
        raise DomainError("bessel_j needs x >= 0")
    if x < _SERIES_LIMIT:
        return _bessel_series(nu, x)
    return _bessel_miller(nu, x)


def bessel_j_derivative(order: float, x: float) -> float:
    """``J'_order(x)`` from ``J' = (nu/x) J_nu - J_{nu+1}``."""
    nu = float(order)
    if x == 0.0:
        if nu == 1.0:
            return 0.5
        return math.inf if 0.0 < nu < 1.0 else 0.0
    return nu / x * bessel_j(nu, x) - bessel_j(nu + 1.0, x)


def bessel_first_zero(order: float, step: float = 0.25, tol: float = 1e-12) -> float:
    """Smallest positive zero ``j_{order,1}`` of ``J_order``.

    The zero is bracketed by scanning ``[order, order + 20]`` with the given
    step (zeros of ``J_nu`` exceed ``nu``), bisected to ``1e-6`` and then
    polished with safeguarded Newton steps.

    Raises
    ------
    NumericError
        If no sign change is found in the scan window.
    """
    nu = float(order)
    if nu < 0:
        raise DomainError("bessel_first_zero needs order >= 0")
    lo = max(nu, 1e-8)
    f_lo = bessel_j(nu, lo)
    x = lo
    while True:
        hi = x + step
        if hi > nu + 20.0 + 1e-12:
            raise NumericError(f"no sign change of J_{nu} in [{nu}, {nu + 20}]")
        f_hi = bessel_j(nu, hi)
        if f_lo == 0.0:
            return lo
        if f_lo * f_hi <= 0.0:
            break
        lo, f_lo, x = hi, f_hi, hi
    a, b, fa = lo, hi, f_lo
    while b - a > 1e-6:
        mid = 0.5 * (a + b)
        fm = bessel_j(nu, mid)
        if fa * fm <= 0.0:
            b = mid
        else:
            a, fa = mid, fm
    root = 0.5 * (a + b)
    for _ in range(50):
        f = bessel_j(nu, root)
        df = bessel_j_derivative(nu, root)
        new = root - f / df
        if not (a <= new <= b):
            new = 0.5 * (a + b)
        if abs(new - root) < tol * max(1.0, root):
            return new
        if bessel_j(nu, new) * fa > 0:
            a = new
        else:
            b = new
        root = new
    return root


# ---------------------------------------------------------------------------
# Lambert W, principal branch
# ---------------------------------------------------------------------------
_INV_E = math.exp(-1.0)


def lambert_w(x: float) -> float:
    """Principal branch ``W_0(x)`` of the Lambert W function.

    Parameters
    ----------
    x : float
        Argument, ``x >= -1/e``.

    Returns
    -------
    float
        ``w`` with ``w e^w = x`` and ``w >= -1``.
    """
    x = float(x)
    if x < -_INV_E - 1e-15:
        raise DomainError("lambert_w principal branch needs x >= -1/e")
    if x == 0.0:
        return 0.0
    if x <= -_INV_E:
        return -1.0
    if x < -0.25:
        # branch-point series in p = sqrt(2(e x + 1))
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    elif x < 3.0:
        w = math.log1p(x)
        w = w * (1.0 - math.log1p(w) / (2.0 + w))
    else:
        lx = math.log(x)
        w = lx - math.log(lx)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        dw = f / denom
        w -= dw
        if abs(dw) <= 1e-16 * (1.0 + abs(w)):
            break
    return w


def conformal_thresholds() -> dict:
    """Lambert-W expressions that fix the admissible conformal classes.

    Returns
    -------
    dict
        Mapping of a short label to its value.  Labels ``w_3_2`` and friends
        are spelled out in the keys.
    """
    w32 = lambert_w(1.5)
    w94 = lambert_w(2.25)
    w1 = lambert_w(1.0)
    t3 = math.log(4.0 * w1 * (w1 + 2.0) / 3.0) / (2.0 * w1)
    return {
        "two_W_inv_2sqrt2": 2.0 * lambert_w(1.0 / (2.0 * math.sqrt(2.0))),
        "W_3_2": w32,
        "exp_W_3_2": math.exp(w32),
        "three_over_2W_3_2": 3.0 / (2.0 * w32),
        "eps0_2_over_3W_9_4": 2.0 / (3.0 * w94),
        "one_minus_8_over_9W_9_4": 1.0 - 8.0 / (9.0 * w94),
        "log_threshold_dge5": t3,
        "ratio_threshold_dge5": math.exp(t3),
    }
