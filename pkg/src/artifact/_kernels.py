"""Hot numerical kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time.  Setting the environment
variable ``ARTIFACT_NUMBA=0`` (or ``off``/``false``) forces the numpy
implementations; otherwise numba is used when it can be imported.

Every public kernel below exists in two flavours, ``<name>_numba`` and
``<name>_numpy``, and the unsuffixed name is bound to the active one.  The
benchmark script compares both flavours directly.
"""
from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("ARTIFACT_NUMBA", "1").strip().lower()
_WANT_NUMBA = _FLAG not in {"0", "off", "false", "no"}

try:  # pragma: no cover - exercised implicitly depending on the environment
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _WANT_NUMBA


def _njit(func):
    """Compile ``func`` with numba when available, else return it unchanged."""
    if HAVE_NUMBA:
        return _numba.njit(cache=False, fastmath=False)(func)
    return func


# ---------------------------------------------------------------------------
# Gegenbauer polynomials on an array of abscissae
# ---------------------------------------------------------------------------
def _gegenbauer_loop(degree, order, x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        xi = x[i]
        c_prev = 1.0
        if degree == 0:
            out[i] = c_prev
            continue
        c_cur = 2.0 * order * xi
        for m in range(1, degree):
            c_next = (2.0 * (m + order) * xi * c_cur - (m + 2.0 * order - 1.0) * c_prev) / (m + 1.0)
            c_prev = c_cur
            c_cur = c_next
        out[i] = c_cur
    return out


gegenbauer_array_numba = _njit(_gegenbauer_loop)


def gegenbauer_array_numpy(degree: int, order: float, x: np.ndarray) -> np.ndarray:
    """Vectorised three-term recurrence for ``C^order_degree`` at ``x``."""
    x = np.asarray(x, dtype=float)
    c_prev = np.ones_like(x)
    if degree == 0:
        return c_prev
    c_cur = 2.0 * order * x
    for m in range(1, degree):
        c_next = (2.0 * (m + order) * x * c_cur - (m + 2.0 * order - 1.0) * c_prev) / (m + 1.0)
        c_prev, c_cur = c_cur, c_next
    return c_cur


# ---------------------------------------------------------------------------
# Lorentz seminorm of a weighted sample (empirical rearrangement)
# ---------------------------------------------------------------------------
def _step_seminorm_loop(values, measures, p, q):
    # values sorted in decreasing order, measures aligned; f_* is the step
    # function equal to values[i] on [T_{i-1}, T_i) with T_i the cumulative
    # measure.  Returns (int_0^inf t^{q/p} f_*^q dt/t)^{1/q}.
    # t^e is carried from one step to the next; sqrt and integer q avoid pow.
    total = 0.0
    t0 = 0.0
    te0 = 0.0
    e = q / p
    half = e == 0.5
    iq = int(q) if q == int(q) and q <= 4.0 else 0
    for i in range(values.shape[0]):
        t1 = t0 + measures[i]
        te1 = np.sqrt(t1) if half else t1 ** e
        v = values[i]
        if v > 0.0 and t1 > t0:
            if iq > 0:
                vq = v
                for _ in range(iq - 1):
                    vq *= v
            else:
                vq = v ** q
            total += vq * (te1 - te0)
        t0 = t1
        te0 = te1
    return (total / e) ** (1.0 / q)


step_seminorm_numba = _njit(_step_seminorm_loop)


def step_seminorm_numpy(values: np.ndarray, measures: np.ndarray, p: float, q: float) -> float:
    """Exact ``|f|_{p,q}`` for a decreasing step function (vectorised)."""
    e = q / p
    t = np.concatenate(([0.0], np.cumsum(measures)))
    seg = values ** q * (t[1:] ** e - t[:-1] ** e) / e
    seg = np.where(values > 0.0, seg, 0.0)
    return float(np.sum(seg)) ** (1.0 / q)


# ---------------------------------------------------------------------------
# Ladder factor G(xd, s) = sum_j c_j xd^{m-2j} s^j and its partials
# ---------------------------------------------------------------------------
def _ladder_loop(coefs, m, xd, s):
    npts = xd.shape[0]
    out = np.zeros((6, npts))
    for i in range(npts):
        x = xd[i]
        y = s[i]
        for j in range(coefs.shape[0]):
            c = coefs[j]
            e = m - 2 * j
            xe = x ** e
            yj = y ** j
            out[0, i] += c * xe * yj
            if e >= 1:
                out[1, i] += c * e * x ** (e - 1) * yj
            if j >= 1:
                out[2, i] += c * j * xe * y ** (j - 1)
            if e >= 2:
                out[3, i] += c * e * (e - 1) * x ** (e - 2) * yj
            if e >= 1 and j >= 1:
                out[4, i] += c * e * j * x ** (e - 1) * y ** (j - 1)
            if j >= 2:
                out[5, i] += c * j * (j - 1) * xe * y ** (j - 2)
    return out


ladder_partials_numba = _njit(_ladder_loop)


def ladder_partials_numpy(coefs: np.ndarray, m: int, xd: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Rows: ``G, G_x, G_s, G_xx, G_xs, G_ss`` at every point (vectorised)."""
    out = np.zeros((6, xd.shape[0]))
    for j, c in enumerate(coefs):
        e = m - 2 * j
        xe = xd ** e
        yj = s ** j
        out[0] += c * xe * yj
        if e >= 1:
            out[1] += c * e * xd ** (e - 1) * yj
        if j >= 1:
            out[2] += c * j * xe * s ** (j - 1)
        if e >= 2:
            out[3] += c * e * (e - 1) * xd ** (e - 2) * yj
        if e >= 1 and j >= 1:
            out[4] += c * e * j * xd ** (e - 1) * s ** (j - 1)
        if j >= 2:
            out[5] += c * j * (j - 1) * xe * s ** (j - 2)
    return out


if USE_NUMBA:
    def gegenbauer_array(degree: int, order: float, x: np.ndarray) -> np.ndarray:
        return gegenbauer_array_numba(int(degree), float(order), np.ascontiguousarray(x, dtype=float))

    def step_seminorm(values: np.ndarray, measures: np.ndarray, p: float, q: float) -> float:
        return float(step_seminorm_numba(np.ascontiguousarray(values, dtype=float),
                                         np.ascontiguousarray(measures, dtype=float),
                                         float(p), float(q)))

    def ladder_partials(coefs: np.ndarray, m: int, xd: np.ndarray, s: np.ndarray) -> np.ndarray:
        return ladder_partials_numba(np.ascontiguousarray(coefs, dtype=float), int(m),
                                     np.ascontiguousarray(xd, dtype=float),
                                     np.ascontiguousarray(s, dtype=float))
else:
    gegenbauer_array = gegenbauer_array_numpy
    step_seminorm = step_seminorm_numpy
    ladder_partials = ladder_partials_numpy


def backend() -> str:
    """Name of the active kernel backend (``"numba"`` or ``"numpy"``)."""
    return "numba" if USE_NUMBA else "numpy"
