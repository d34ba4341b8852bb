"""Special functions against math/scipy oracles and the quoted constants."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from artifact import specfun
from artifact.specfun import DomainError


# -- gamma and sphere areas --------------------------------------------------
@pytest.mark.parametrize("x", [0.5, 0.75, 1.0, 1.5, 2.0, 3.3, 7.25, 12.5, 19.0, 29.9])
def test_gamma_matches_math(x):
    assert specfun.gamma(x) == pytest.approx(math.gamma(x), rel=1e-13)


def test_gamma_reflection_and_pole():
    assert specfun.gamma(-0.5) == pytest.approx(math.gamma(-0.5), rel=1e-13)
    with pytest.raises(DomainError):
        specfun.gamma(-2.0)


@pytest.mark.parametrize("d, expected", [(2, 2 * math.pi), (3, 4 * math.pi), (4, 2 * math.pi ** 2)])
def test_sphere_area_examples(d, expected):
    assert specfun.sphere_area(d) == pytest.approx(expected, rel=1e-12)


@given(st.integers(min_value=2, max_value=40))
def test_sphere_area_formula(d):
    expected = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    assert specfun.sphere_area(d) == pytest.approx(expected, rel=1e-12)


def test_sphere_area_rejects_small_dimension():
    with pytest.raises(DomainError):
        specfun.sphere_area(1)


# -- Gegenbauer ---------------------------------------------------------------
@given(st.floats(0.1, 5.0), st.floats(-1.0, 1.0))
def test_gegenbauer_seeds(order, x):
    assert specfun.gegenbauer(0, order, x) == 1.0
    assert specfun.gegenbauer(1, order, x) == pytest.approx(2 * order * x, abs=1e-14)


@given(st.integers(0, 25), st.floats(0.1, 6.0), st.floats(-1.0, 1.0))
def test_gegenbauer_matches_scipy(degree, order, x):
    ref = special.eval_gegenbauer(degree, order, x)
    assert specfun.gegenbauer(degree, order, x) == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_gegenbauer_derivative_finite_difference():
    h = 1e-5
    fd = (specfun.gegenbauer(3, 2.0, 0.3 + h) - specfun.gegenbauer(3, 2.0, 0.3 - h)) / (2 * h)
    assert specfun.gegenbauer_derivative(3, 2.0, 0.3) == pytest.approx(fd, abs=1e-8)


def test_gegenbauer_ode_residual():
    # (1 - x^2) y'' - (2 lam + 1) x y' + n (n + 2 lam) y = 0
    x = np.linspace(-0.95, 0.95, 41)
    for n in range(7):
        for lam in (0.5, 1.0, 2.5):
            y = specfun.gegenbauer(n, lam, x)
            y1 = specfun.gegenbauer_derivative(n, lam, x)
            y2 = 4 * lam * (lam + 1) * specfun.gegenbauer(n - 2, lam + 2, x) if n >= 2 else 0 * x
            res = (1 - x ** 2) * y2 - (2 * lam + 1) * x * y1 + n * (n + 2 * lam) * y
            assert np.max(np.abs(res)) <= 1e-8 * max(1.0, np.max(np.abs(y)))


def test_gegenbauer_domain():
    with pytest.raises(DomainError):
        specfun.gegenbauer(2, 1.0, 1.5)
    with pytest.raises(DomainError):
        specfun.gegenbauer(2, 0.0, 0.5)


# -- Bessel -------------------------------------------------------------------
def test_bessel_half_order_closed_form():
    assert specfun.bessel_j(0.5, 1.0) == pytest.approx(math.sqrt(2 / math.pi) * math.sin(1.0),
                                                       abs=1e-10)


def test_bessel_zero_argument():
    assert specfun.bessel_j(0.0, 0.0) == 1.0
    assert specfun.bessel_j(2.0, 0.0) == 0.0


def test_bessel_near_first_zero_of_j1():
    assert abs(specfun.bessel_j(1.0, 3.8317)) < 1e-4


# scipy.special.jv underflows to 0 for subnormal x, so the oracle range starts at 1e-8
@given(st.floats(0.0, 20.0), st.one_of(st.just(0.0), st.floats(1e-8, 60.0)))
def test_bessel_matches_scipy(order, x):
    assert specfun.bessel_j(order, x) == pytest.approx(special.jv(order, x), abs=1e-10)


@pytest.mark.parametrize("order", [0.0, 0.5, 1.0, 2.5, 7.0])
def test_bessel_ode_residual(order):
    for x in np.linspace(0.5, 40.0, 25):
        j = specfun.bessel_j(order, x)
        h = 1e-5
        j1 = specfun.bessel_j_derivative(order, x)
        j2 = (specfun.bessel_j_derivative(order, x + h)
              - specfun.bessel_j_derivative(order, x - h)) / (2 * h)
        assert abs(j2 + j1 / x - (order ** 2 / x ** 2) * j + j) <= 1e-8


def test_bessel_domain():
    with pytest.raises(DomainError):
        specfun.bessel_j(-1.0, 1.0)


@pytest.mark.parametrize("order, target, tol", [(0.0, 2.4048, 1e-3), (0.5, math.pi, 1e-10),
                                                (1.0, 3.83170, 1e-4)])
def test_bessel_first_zero_quoted(order, target, tol):
    assert abs(specfun.bessel_first_zero(order) - target) <= tol


@pytest.mark.parametrize("order", [0, 1, 2, 3, 5, 8, 10])
def test_bessel_first_zero_matches_scipy(order):
    assert specfun.bessel_first_zero(order) == pytest.approx(special.jn_zeros(order, 1)[0],
                                                             abs=1e-10)


@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_bessel_first_zero_increasing(a1, a2):
    if abs(a1 - a2) < 1e-6:
        return
    lo, hi = sorted((a1, a2))
    assert specfun.bessel_first_zero(lo) < specfun.bessel_first_zero(hi)


# -- Lambert W ----------------------------------------------------------------
def test_lambert_w_trivial_points():
    assert specfun.lambert_w(0.0) == 0.0
    assert specfun.lambert_w(math.e) == pytest.approx(1.0, abs=1e-14)
    assert specfun.lambert_w(-1 / math.e) == pytest.approx(-1.0, abs=1e-7)


@given(st.floats(-1 / math.e + 1e-9, 1e8))
def test_lambert_w_residual(x):
    w = specfun.lambert_w(x)
    assert abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, abs(x))
    assert w == pytest.approx(special.lambertw(x).real, rel=1e-10, abs=1e-12)


def test_lambert_w_domain():
    with pytest.raises(DomainError):
        specfun.lambert_w(-0.5)


def test_lambert_constants_quoted():
    th = specfun.conformal_thresholds()
    assert abs(th["W_3_2"] - 0.72586) <= 1e-4
    assert abs(th["exp_W_3_2"] - 2.06651) <= 1e-4
    assert th["three_over_2W_3_2"] == pytest.approx(th["exp_W_3_2"], rel=1e-14)
    assert abs(th["two_W_inv_2sqrt2"] - 0.5398) <= 1e-3
    assert abs(th["eps0_2_over_3W_9_4"] - 0.7344) <= 1e-3
    assert abs(th["one_minus_8_over_9W_9_4"] - 0.020760) <= 1e-6
    assert th["one_minus_8_over_9W_9_4"] > 1 / 50
    assert abs(th["log_threshold_dge5"] - 0.5848) <= 1e-3
    assert abs(th["ratio_threshold_dge5"] - 1.7946) <= 1e-3
