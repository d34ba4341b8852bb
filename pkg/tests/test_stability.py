"""Second variation, Pohozaev flux, Hardy-Rellich forms and the neck estimate."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from artifact import stability as S
from artifact.calculus import GridField
from artifact.checks import PreconditionError
from artifact.harness import _neck_field
from artifact.poisson import dirichlet_eigenvalue
from artifact.specfun import DomainError

PI2 = math.pi ** 2


@pytest.fixture(scope="module")
def proj():
    return S.SphereMap.radial_projection().grid([1.0, 2.0], 16, 8)


@pytest.fixture(scope="module")
def const_map():
    return S.SphereMap.constant([0.0, 1.0, 0.0, 0.0]).grid([1.0, 2.0], 16, 8)


def _w(u, seed):
    return S.tangent_variation(u, np.random.default_rng(seed), 1.0, 2.0)


def _combo(u, w1, w2, s):
    return GridField(u.d, u.radii, u.nodes, u.weights, w1.jet + w2.jet.scaled(s))


# -- second variation -----------------------------------------------------------------------
@pytest.mark.parametrize("seed", range(3))
def test_second_variation_matches_finite_differences(proj, seed):
    w = _w(proj, seed)
    q = S.second_variation(proj, w)
    fd = S.second_variation_fd(proj, w)
    assert abs(q - fd) <= 1e-4 * abs(fd)
    assert S.second_variation_direct(proj, w) == pytest.approx(q, rel=1e-9)


def test_printed_form_misses_finite_differences(proj):
    w = _w(proj, 0)
    fd = S.second_variation_fd(proj, w)
    printed = S.second_variation(proj, w, form="printed")
    assert abs(printed - fd) > 1e-3 * abs(fd)


def test_constant_map_reduces_to_bilaplacian(const_map):
    for seed in range(3):
        w = _w(const_map, seed)
        lw = w.jet.laplacian()
        plain = const_map.integrate(np.einsum("pc,pc->p", lw, lw))
        assert S.second_variation(const_map, w) == pytest.approx(plain, rel=1e-12)


@given(st.floats(-4.0, 4.0).filter(lambda c: abs(c) > 1e-3))
@settings(max_examples=10)
def test_second_variation_is_quadratic(c):
    u = S.SphereMap.radial_projection().grid([1.0, 2.0], 8, 6)
    w = _w(u, 11)
    cw = GridField(u.d, u.radii, u.nodes, u.weights, w.jet.scaled(c))
    assert S.second_variation(u, cw) == pytest.approx(c * c * S.second_variation(u, w), rel=1e-11)


def test_parallelogram_law(proj):
    w1, w2 = _w(proj, 5), _w(proj, 6)
    q = lambda w: S.second_variation(proj, w)
    lhs = q(_combo(proj, w1, w2, 1.0)) + q(_combo(proj, w1, w2, -1.0))
    assert lhs == pytest.approx(2 * q(w1) + 2 * q(w2), rel=1e-11)


def test_second_variation_preconditions(proj):
    w = _w(proj, 0)
    not_tangent = GridField(proj.d, proj.radii, proj.nodes, proj.weights, proj.jet)
    with pytest.raises(PreconditionError):
        S.second_variation(proj, not_tangent)
    off = GridField(proj.d, proj.radii, proj.nodes, proj.weights, proj.jet.scaled(1.1))
    with pytest.raises(DomainError):
        S.second_variation(off, w)
    with pytest.raises(DomainError):
        S.second_variation(proj, w, form="other")


def test_unit_grid_enforced():
    pts = S.SphereMap.radial_projection().grid([1.0, 2.0], 4, 3)
    with pytest.raises(DomainError):
        GridField(pts.d, pts.radii, pts.nodes, pts.weights, pts.jet.scaled(1.1),
                  sphere_valued=True)


def test_first_variation_vanishes(proj):
    for seed in range(3):
        w = _w(proj, seed)
        assert abs(S.first_variation_fd(proj, w)) <= 1e-6 * abs(S.second_variation(proj, w))


def test_d2_lower_bound(proj):
    pairs = [(proj, _w(proj, s)) for s in range(4)]
    for u, w in pairs:
        chk = S.verify_d2_lower_bound(u, w, 0.5)
        assert chk.passed
        assert chk.params["needed_constant"] <= 2.0
    assert S.fit_d2_constant(pairs, 0.5) <= 2.0
    with pytest.raises(PreconditionError):
        S.verify_d2_lower_bound(proj, pairs[0][1], 1.0)


def test_bump_profile_derivatives():
    psi = S.bump_profile(1.0, 2.0)
    r = np.linspace(1.05, 1.95, 7)
    h = 1e-6
    f0, f1, f2 = psi(r)
    np.testing.assert_allclose((psi(r + h)[0] - psi(r - h)[0]) / (2 * h), f1, atol=1e-7)
    np.testing.assert_allclose((psi(r + h)[1] - psi(r - h)[1]) / (2 * h), f2, atol=1e-6)
    assert psi(np.array([1.0, 2.0]))[0].tolist() == [0.0, 0.0]
    assert psi(np.array([1.5]))[0][0] == pytest.approx(1.0)


# -- Pohozaev -------------------------------------------------------------------------------
@pytest.mark.parametrize("R", [0.25, 0.5, 1.0, 2.0, 4.0])
def test_radial_projection_flux(R):
    assert S.pohozaev_flux(S.SphereMap.radial_projection(), R) == pytest.approx(9 * PI2, rel=1e-10)


def test_radial_projection_fails_identity_but_flux_is_constant():
    proj = S.SphereMap.radial_projection()
    chk = S.verify_pohozaev_identity(proj)
    assert chk.passed and chk.lemma_id == "pohozaev_flux"
    assert chk.params["identity_holds"] is False
    for (lhs, rhs), R in zip(chk.params["identity_sides"], (0.25, 0.5, 0.9)):
        assert rhs - lhs == pytest.approx(2 * 9 * PI2 / R, rel=1e-9)
    assert S.verify_flux_constancy(proj, (0.3, 3.0), 9 * PI2).passed


def test_constant_map_identity():
    chk = S.verify_pohozaev_identity(S.SphereMap.constant([0.0, 0.0, 1.0, 0.0]), level=8)
    assert chk.passed and chk.lemma_id == "pohozaev_identity"
    assert S.pohozaev_flux(S.SphereMap.constant([1.0, 0.0, 0.0, 0.0]), 0.7) == 0.0


@settings(max_examples=6)
@given(st.integers(0, 2 ** 32 - 1))
def test_translated_projection_identity(seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(4)
    c *= rng.uniform(2.0, 3.0) / np.linalg.norm(c)
    u = S.SphereMap.translated_projection(c)
    assert S.verify_pohozaev_identity(u).passed
    assert abs(S.pohozaev_flux(u, 0.9, level=24)) <= 1e-9


@settings(max_examples=10)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 0.5))
def test_perturbed_polynomial_identity(seed, eps):
    rng = np.random.default_rng(seed)
    p = rng.standard_normal(3)
    h = S.PolynomialMap.random_biharmonic(rng, m=3)
    assert h.is_biharmonic()
    u = S.SphereMap.perturbed(p / np.linalg.norm(p), h, eps)
    assert not u.unit
    assert S.verify_pohozaev_identity(u, level=8).passed


def test_translated_projection_jets_match_closed_form():
    c = np.array([0.0, 0.0, 0.0, 2.5])
    x = np.random.default_rng(1).standard_normal((6, 4)) * 0.3
    jet = S.SphereMap.translated_projection(c).jet_fn(x)
    y = x - c
    ny = np.linalg.norm(y, axis=1, keepdims=True)
    np.testing.assert_allclose(jet.val, y / ny, atol=1e-14)
    # Delta (y/|y|) = -(d-1) y/|y|^3 in d = 4
    np.testing.assert_allclose(jet.laplacian(), -3 * y / ny ** 3, atol=1e-12)


def test_perturbed_requires_biharmonic():
    bad = S.PolynomialMap(np.array([[4, 0, 0, 0]]), np.array([[1.0, 0.0, 0.0]]))
    assert not bad.is_biharmonic()
    with pytest.raises(DomainError):
        S.SphereMap.perturbed([1.0, 0.0, 0.0], bad, 0.1)


def test_pohozaev_dimension():
    with pytest.raises(DomainError):
        S.pohozaev_flux(S.SphereMap.radial_projection(3), 1.0)


# -- Hardy-Rellich -----------------------------------------------------------------------------
def test_rellich_constants():
    assert S.RELLICH_A_THRESHOLD == pytest.approx(49.19999, abs=1e-5)
    assert S.RELLICH_A_THRESHOLD < 50
    k2 = PI2 / 2500
    assert S.rellich_a_bound(50.0) == pytest.approx((4 + k2) * k2, rel=1e-15)
    assert abs(S.rellich_a_bound(50.0) - 1.58070e-2) <= 1e-7
    th = S.rellich_b_threshold()
    assert th["argmax"] == 1 and th["sup"] == th["n1"]


def test_rellich_a_bound_holds():
    chk = S.verify_rellich_A()
    assert chk.passed
    assert chk.params["bound"] == S.rellich_a_bound(50.0)
    assert chk.params["worst_mode"] == 0


@pytest.mark.xfail(strict=True, reason="the quoted decimal does not match its own formula; see ledger")
def test_rellich_a_bound_quoted_decimal():
    assert abs(S.rellich_a_bound(50.0) - 1.5803e-2) <= 1e-6


def test_rellich_a_mode_zero_sandwich():
    """Ritz minimum lies between the bound and the quotient of sin^2(pi t / L)."""
    L = 50.0
    ritz = S.mode_minima(L, "hardy", [0])[0]
    k = math.pi / L

    def g(t):
        return math.sin(k * t) ** 2, k * math.sin(2 * k * t), 2 * k * k * math.cos(2 * k * t)

    num = integrate.quad(lambda t: (g(t)[2] + 2 * g(t)[1]) ** 2, 0, L, limit=200)[0]
    den = integrate.quad(lambda t: g(t)[0] ** 2, 0, L, limit=200)[0]
    assert S.rellich_a_bound(L) <= ritz <= num / den * (1 + 1e-9)


def test_rellich_a_threshold_precondition():
    with pytest.raises(PreconditionError):
        S.verify_rellich_A(1.0, math.exp(40.0))


@pytest.mark.xfail(strict=True, reason="the stated gradient bound exceeds the Ritz minimum; see ledger")
def test_rellich_b_bound_as_stated():
    assert S.verify_rellich_B().passed


def test_rellich_b_quartic_variant_holds():
    chk = S.verify_rellich_B()
    worst = chk.params["minima"][chk.params["worst_mode"]]
    assert chk.params["bound_quartic"] <= worst
    assert worst < chk.params["bound"]


def test_rellich_b_bound_limit():
    assert S.rellich_b_bound(1e6) == pytest.approx(3.0, abs=1e-9)
    minima = [S.mode_minima(L, "grad", [1])[1] for L in (20.0, 40.0, 80.0)]
    assert minima[0] > minima[1] > minima[2] > 3.0
    assert minima[2] - 3.0 < 0.01


def test_rellich_c_positive_and_stable():
    for beta in (0.5, 1.0):
        chk = S.verify_rellich_C(beta=beta)
        assert chk.passed and chk.rhs > 0
    with pytest.raises(PreconditionError):
        S.verify_rellich_C(beta=0.0)


def test_rayleigh_ritz_monotone():
    minima = [S.mode_minima(50.0, "hardy", [1], size)[1] for size in (10, 20, 30, 40)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(minima, minima[1:]))


@pytest.mark.parametrize("n, m", [(0, 1), (1, 2), (2, 4), (1, 3)])
def test_mode_decoupling(n, m):
    assert abs(S.cross_mode_coupling(n, m)) <= 1e-12
    assert S.cross_mode_coupling(n, n) > 0


def test_dirichlet_ball_eigenvalue():
    lam = S.dirichlet_ball_eigenvalue(4)
    assert abs(lam - 14.681970) <= 1e-3
    assert lam == pytest.approx(dirichlet_eigenvalue(4), rel=1e-8)
    assert lam >= dirichlet_eigenvalue(4) * (1 - 1e-12)


def test_spectra_csv():
    text = S.spectra_csv(50.0, "hardy", modes=[0, 1], count=2)
    rows = text.strip().splitlines()
    assert rows[0] == "mode,index,value" and len(rows) == 5


def test_rellich_forms_dimension():
    with pytest.raises(DomainError):
        S.rellich_forms(10.0, 1, d=3)


# -- neck --------------------------------------------------------------------------------------
def test_neck_weight_continuity():
    w = S.NeckWeight(alpha=0.5, rho=1e-3, beta=1.0)
    for r in (w.inner, w.alpha):
        assert float(w(r * (1 - 1e-12))) == pytest.approx(float(w(r * (1 + 1e-12))), rel=1e-10)
    assert float(w(w.inner / 10)) == float(w.core(w.inner))
    assert float(w(10.0)) == float(w.core(w.alpha))
    assert w.log_ratio == pytest.approx(math.log(250.0))
    with pytest.raises(DomainError):
        S.NeckWeight(0.1, 0.05, 1.0)


@pytest.fixture(scope="module")
def neck():
    a, b = 1.0, math.exp(50.0)
    return (a, b) + _neck_field(a, b)


def test_neck_positivity(neck):
    a, b, u, v = neck
    chk = S.assemble_neck_positivity(v, a, b, 1.0)
    assert chk.passed
    assert chk.params["lap"] > 0 and chk.params["grad"] > 0


def test_neck_stability(neck):
    a, b, u, v = neck
    chk = S.verify_neck_stability(u, v, S.NeckWeight(b, a * b, 1.0))
    assert chk.passed
    lw = v.jet.laplacian()
    assert chk.rhs == pytest.approx(v.integrate(np.einsum("pc,pc->p", lw, lw)), rel=1e-12)


def test_neck_threshold_precondition():
    a, b = 1.0, math.exp(20.0)
    _, v = _neck_field(a, b, n_radial=8)
    with pytest.raises(PreconditionError):
        S.assemble_neck_positivity(v, a, b, 1.0)
