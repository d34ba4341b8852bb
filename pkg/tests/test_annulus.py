"""Exact spectral calculus on annuli against radial and tensor quadrature."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from artifact import annulus as A
from artifact.annulus import SpectralField
from artifact.checks import PreconditionError, RegistryError
from artifact.harmonics import dim_harmonics
from artifact.specfun import DomainError, sphere_area

PI2 = math.pi ** 2


def _single(d, a, b, n, k=1, an=0.0, bn=0.0):
    return SpectralField.from_modes(d, a, b, max(n, 1), {(n, k): (an, bn)})


# -- exact norms: quoted and derived examples ---------------------------------------
def test_l2_examples():
    assert A.l2_norm(_single(4, 1.0, math.e, 0, bn=1.0)) == pytest.approx(2 * PI2, rel=1e-14)
    assert A.l2_norm(SpectralField.zeros(4, 0.5, 1.0, 3)) == 0.0
    val = A.l2_norm(_single(4, 0.5, 1.0, 1, an=1.0))
    assert val == pytest.approx(PI2 / 3 * (1 - 2.0 ** -6), rel=1e-14)


def test_dirichlet_examples():
    assert A.dirichlet_norm(_single(4, 0.5, 1.0, 1, an=1.0)) == pytest.approx(2 * PI2 * 15 / 16,
                                                                            rel=1e-14)
    assert A.dirichlet_norm(_single(4, 0.5, 1.0, 0, an=3.0)) == 0.0
    assert A.dirichlet_norm(_single(4, 0.5, 1.0, 0, bn=1.0)) == pytest.approx(12 * PI2, rel=1e-14)


def test_weighted_dirichlet_examples():
    assert A.weighted_dirichlet_norm(_single(4, 0.5, 1.0, 0, an=2.0)) == 0.0
    val = A.weighted_dirichlet_norm(_single(4, 0.5, 1.0, 1, an=1.0))
    assert val == pytest.approx(sphere_area(4) * 1.5, rel=1e-14)


def test_weighted_dirichlet_d5_corrected():
    # |grad r^-3|^2 / r^2 = 9 r^-10, integrated against beta(5) r^4 dr on [1, 2]
    val = A.weighted_dirichlet_norm(_single(5, 1.0, 2.0, 0, bn=1.0))
    oracle = sphere_area(5) * integrate.quad(lambda r: 9 * r ** -6, 1.0, 2.0)[0]
    assert val == pytest.approx(oracle, rel=1e-12)
    assert val == pytest.approx(sphere_area(5) * 9 / 5 * (1 - 2.0 ** -5), rel=1e-14)


@pytest.mark.xfail(strict=True, reason="quoted b-coefficient (n+d-2)(2n+d-4)/(2n+d); see ledger")
def test_weighted_dirichlet_d5_quoted():
    val = A.weighted_dirichlet_norm(_single(5, 1.0, 2.0, 0, bn=1.0))
    assert val == pytest.approx(sphere_area(5) * 3 / 5 * (1 - 2.0 ** -5), rel=1e-10)


def test_hessian_examples():
    affine = SpectralField.from_modes(4, 0.5, 1.0, 2, {(0, 1): (1.0, 0.0), (1, 1): (2.0, 0.0),
                                                        (1, 3): (-1.0, 0.0)})
    assert A.hessian_norm(affine) == pytest.approx(0.0, abs=1e-13)
    # normalised degree-2 harmonic: |Hess|^2 = 48 everywhere, volume (pi^2/2)(1 - 2^-4)
    assert A.hessian_norm(_single(4, 0.5, 1.0, 2, an=1.0)) == pytest.approx(22.5 * PI2, rel=1e-13)
    # r^-2: Hessian eigenvalues 6 r^-4 (radial) and -2 r^-4 (three times)
    assert A.hessian_norm(_single(4, 0.5, 1.0, 0, bn=1.0)) == pytest.approx(360 * PI2, rel=1e-13)


@pytest.mark.xfail(strict=True, reason="quoted per-mode Hessian coefficient; see ledger")
def test_hessian_quoted_coefficient_example():
    quoted = sphere_area(4) * 2 * (32 + 16 + 0 - 2) / 4 * (1 - 2.0 ** -4)
    assert A.hessian_norm(_single(4, 0.5, 1.0, 2, an=1.0)) == pytest.approx(quoted, rel=1e-8)


@pytest.mark.parametrize("d", [3, 4])
@pytest.mark.parametrize("kind", ["l2", "dirichlet", "weighted_dirichlet", "hessian"])
def test_norms_match_tensor_quadrature(d, kind):
    rng = np.random.default_rng(100 * d + len(kind))
    for i in range(6):
        u = SpectralField.random(d, 1.0, float(rng.uniform(1.5, 4.0)), 1 + i, rng,
                                 adversarial=bool(i % 2))
        assert A.quadrature_energy(u, kind) == pytest.approx(A.energy(u, kind), rel=1e-7)


def test_ball_field_norms_match_quadrature(rng):
    # the hole B_{1e-3} carries a relative share below 1e-12 of every energy
    u = SpectralField.random(4, 0.0, 1.5, 4, rng)
    for kind in ("l2", "dirichlet", "hessian"):
        quad = A.quadrature_energy(u.restrict(1e-3, 1.5), kind)
        assert quad == pytest.approx(A.energy(u, kind), rel=1e-7)


def test_ball_fields_reject_b_coefficients():
    with pytest.raises(DomainError):
        _single(4, 0.0, 1.0, 0, bn=1.0)


@given(st.integers(3, 8), st.integers(0, 5), st.floats(0.1, 0.9), st.floats(0.1, 3.0))
def test_mode_energy_matches_radial_quadrature(d, n, ratio, bcoef):
    """Dirichlet energy of one mode against scipy's radial integral."""
    a, b = ratio, 1.0
    u = _single(d, a, b, n, an=1.0, bn=bcoef)
    lam = n * (n + d - 2)

    def dens(r):
        f = r ** n + bcoef * r ** (-(n + d - 2))
        f1 = n * r ** (n - 1) - (n + d - 2) * bcoef * r ** (-(n + d - 1))
        return (f1 ** 2 + lam * f ** 2 / r ** 2) * r ** (d - 1)

    oracle = sphere_area(d) * integrate.quad(dens, a, b, epsabs=0, epsrel=1e-12)[0]
    assert A.dirichlet_norm(u) == pytest.approx(oracle, rel=1e-9)


# -- flux -------------------------------------------------------------------------
def test_flux_examples():
    assert A.flux(_single(4, 0.5, 2.0, 0, bn=1.0), 1.0) == pytest.approx(-4 * PI2, rel=1e-14)
    assert A.flux(_single(4, 0.5, 2.0, 1, an=1.0), 1.0) == 0.0
    assert A.flux(_single(3, 0.5, 2.0, 0, bn=2.0), 1.3) == pytest.approx(-8 * math.pi, rel=1e-14)
    assert A.flux_quadrature(_single(3, 0.5, 2.0, 0, bn=2.0), 1.3) == pytest.approx(-8 * math.pi,
                                                                                   rel=1e-10)


def test_flux_is_radius_independent(rng):
    for d in (3, 4):
        u = SpectralField.random(d, 1.0, 3.0, 4, rng)
        vals = [A.flux_quadrature(u, r) for r in (1.2, 1.9, 2.7)]
        assert np.ptp(vals) <= 1e-10 * abs(vals[0])
        assert vals[0] == pytest.approx(A.flux(u, 2.0), rel=1e-10)


def test_flux_radius_precondition():
    with pytest.raises(DomainError):
        A.flux(_single(4, 1.0, 2.0, 0, bn=1.0), 3.0)


# -- comparison lemmas ----------------------------------------------------------------
@given(st.sampled_from(sorted(A.COMPARISON_LEMMAS)), st.integers(3, 6), st.integers(1, 5),
       st.booleans(), st.integers(0, 2 ** 32 - 1))
def test_comparison_lemmas_hold(lemma_id, d, N, adversarial, seed):
    rng = np.random.default_rng(seed)
    lem = A.COMPARISON_LEMMAS[lemma_id]
    a, b = 1.0, A.CONFORMAL_RATIO
    if lem.domain == "ball":
        u = SpectralField.random(d, 0.0, b, N, rng)
        chk = A.verify_comparison_lemma(lemma_id, u, float(rng.uniform(0.05, b)))
    elif lemma_id == "dirichlet_weighted_typeI":
        u = SpectralField.random(d, a, b, N, rng, adversarial=adversarial)
        chk = A.verify_comparison_lemma(lemma_id, u, float(rng.uniform(a, b / 2)))
    else:
        u = SpectralField.random(d, a, b, N, rng, adversarial=adversarial)
        r, s = np.sort(rng.uniform(a, b, 2))
        chk = A.verify_comparison_lemma(lemma_id, u, float(r), float(s))
    assert chk.passed, chk


def test_ball_lemma_example(rng):
    u = SpectralField.random(4, 0.0, 2.0, 5, rng)
    chk = A.verify_comparison_lemma("dirichlet_comp3", u, 1.0)
    assert chk.passed
    assert chk.lhs <= chk.rhs
    assert chk.rhs == pytest.approx(A.dirichlet_norm(u) / 16, rel=1e-12)


def test_dirichlet_trace_example(rng):
    for d in (3, 4, 5):
        u = SpectralField.random(d, 1.0, 4.0, 4, rng)
        chk = A.verify_comparison_lemma("dirichlet_comp2", u, 2.0, 3.0)
        assert chk.passed
        full = A.dirichlet_norm(u.with_dirichlet_trace())
        assert chk.rhs == pytest.approx(2 * 2.0 ** -(d - 2) * full, rel=1e-12)


def test_degenerate_interval_passes(rng):
    u = SpectralField.random(4, 1.0, 3.0, 3, rng)
    chk = A.verify_comparison_lemma("dirichlet_comp", u, 2.0, 2.0)
    assert chk.passed and chk.lhs == 0.0


def test_unknown_lemma_is_registry_error(rng):
    u = SpectralField.random(4, 1.0, 3.0, 2, rng)
    with pytest.raises(RegistryError):
        A.verify_comparison_lemma("no_such_lemma", u, 1.5, 2.0)


# -- coefficient lower bound ----------------------------------------------------------
def test_coefficient_bound_single_a_mode():
    u = _single(4, 1.0, 3.0, 2, an=1.0)
    chk = A.verify_coefficient_lower_bound(u)
    assert chk.passed
    assert chk.lhs <= chk.rhs / 8 * 1.000001  # factor 8 slack on a single a-mode


def test_coefficient_bound_zero_field():
    assert A.verify_coefficient_lower_bound(SpectralField.zeros(4, 1.0, 3.0, 2)).passed


@given(st.integers(3, 7), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_coefficient_bound_adversarial_at_conformal_ratio(d, N, seed):
    rng = np.random.default_rng(seed)
    u = SpectralField.random(d, 1.0, A.CONFORMAL_RATIO, N, rng, adversarial=True).without_flux()
    assert A.verify_coefficient_lower_bound(u).passed


def test_coefficient_bound_preconditions(rng):
    with pytest.raises(PreconditionError):
        A.verify_coefficient_lower_bound(SpectralField.random(4, 1.0, 2.0, 2, rng).without_flux())
    with pytest.raises(PreconditionError):
        A.verify_coefficient_lower_bound(_single(4, 1.0, 3.0, 0, bn=1.0))


@given(st.integers(3, 6), st.integers(2, 6), st.integers(0, 2 ** 32 - 1))
def test_hessian_lower_bound(d, N, seed):
    rng = np.random.default_rng(seed)
    u = SpectralField.random(d, 1.0, float(rng.uniform(1.5, 5.0)), N, rng,
                             adversarial=bool(seed % 2)).without_flux()
    assert A.verify_hessian_lower_bound(u).passed


def test_hessian_lower_bound_from_degree_one_fails_on_linear_fields():
    u = _single(4, 1.0, 3.0, 1, an=1.0)
    assert not A.verify_hessian_lower_bound(u, first_a_degree=1).passed


# -- series identities -------------------------------------------------------------
def _partial(d, beta, nmax=4000):
    n = np.arange(nmax + 1)
    dims = np.array([dim_harmonics(d, int(k)) for k in n], dtype=float)
    return float(np.sum((2 * n + d) * dims ** 2 * beta ** n))


@pytest.mark.parametrize("beta", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
@pytest.mark.parametrize("d", [3, 4])
def test_series_identity_exact(d, beta):
    assert A.series_identity(d, beta) == pytest.approx(_partial(d, beta), rel=1e-10)


@pytest.mark.xfail(strict=True, reason="printed d = 3 closed form disagrees with the series")
def test_series_identity_d3_printed():
    for beta in (0.1, 0.5, 0.9):
        assert A.series_identity(3, beta, form="printed") == pytest.approx(_partial(3, beta),
                                                                           rel=1e-10)


def test_series_identity_bad_form():
    with pytest.raises(DomainError):
        A.series_identity(4, 0.5, form="other")


def test_pointwise_series_constant():
    assert A.pointwise_series_constant(4) == pytest.approx(240.0, rel=1e-10)


# -- pointwise and Lorentz scaling bounds ------------------------------------------------
def test_pointwise_constants():
    assert A.pointwise_constant(4) == pytest.approx(8 * math.sqrt(30) / math.pi, rel=1e-14)
    assert A.pointwise_constant(3) == pytest.approx(2 * math.sqrt(38 / math.pi), rel=1e-14)


@pytest.mark.parametrize("d", [3, 4])
@pytest.mark.parametrize("theorem_id", sorted(A.POINTWISE_THEOREMS))
def test_pointwise_bounds_hold(d, theorem_id):
    rng = np.random.default_rng(d)
    for i in range(4):
        u = SpectralField.random(d, 1.0, 4.0, 1 + i, rng).without_flux()
        x = rng.standard_normal(d)
        x *= 2.0 / np.linalg.norm(x)
        chk = A.verify_pointwise_bound(theorem_id, u, x)
        assert chk.passed, chk


def test_pointwise_zero_field():
    u = SpectralField.zeros(4, 1.0, 4.0, 2)
    chk = A.verify_pointwise_bound("pointwise_harmonic_u", u, np.array([2.0, 0, 0, 0]))
    assert chk.passed and chk.lhs == 0.0


def test_pointwise_unknown_theorem(rng):
    u = SpectralField.random(4, 1.0, 4.0, 2, rng)
    with pytest.raises(RegistryError):
        A.verify_pointwise_bound("nope", u, np.array([2.0, 0, 0, 0]))


def test_lorentz_scaling_pure_b_modes(rng):
    u = SpectralField.random(4, 1.0, 1e4, 2, rng).with_degrees_zeroed("a", range(3)).without_flux()
    chk = A.verify_lorentz_scaling("lorentz_l2_gen_d", u)
    assert chk.passed, chk


def test_lorentz_scaling_zero_field():
    chk = A.verify_lorentz_scaling("dirichlet_dim_arbitraire", SpectralField.zeros(4, 1.0, 1e4, 2))
    assert chk.passed


def test_lorentz_absolute_constant(rng):
    u = SpectralField.random(4, 1.0, 1e4, 2, rng).without_flux()
    chk = A.verify_lorentz_constant(u, 0.5)
    assert chk.passed
    assert A.C4_LORENTZ == pytest.approx(128 * math.sqrt(5), rel=1e-15)


# -- serialisation -------------------------------------------------------------------
def test_json_round_trip(rng):
    u = SpectralField.random(3, 0.5, 2.0, 4, rng)
    v = SpectralField.from_json(u.to_json())
    assert (v.d, v.a, v.b, v.N) == (u.d, u.a, u.b, u.N)
    for x, y in zip(u.A + u.B, v.A + v.B):
        np.testing.assert_array_equal(x, y)
    doc = u.to_dict()
    assert set(doc) == {"d", "a", "b", "N", "coeffs"}
    assert all(len(row) == 4 for row in doc["coeffs"])
