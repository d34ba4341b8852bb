"""Named verification suites and the ``verify`` command line entry point.

A suite is a function ``(config, rng) -> list[LemmaCheck]``.  Each suite
draws from its own counter-based Philox stream keyed by ``(seed, suite)``,
so ``all`` reproduces the individual suites check for check.  Reports are
serialised with sorted keys and contain no timing data; wall time is
written to stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import annulus, calculus, harmonics, lorentz, poisson, specfun, stability
from .checks import LemmaCheck, PreconditionError, RegistryError

__all__ = [
    "SuiteConfig",
    "SuiteReport",
    "UnknownSuiteError",
    "SUITES",
    "REGISTRY",
    "run_suite",
    "suite_rng",
    "main",
]

ENV_PREFIX = "ARTIFACT_VERIFY_"


class UnknownSuiteError(RegistryError):
    """The requested suite name is not registered."""


@dataclass(frozen=True)
class SuiteConfig:
    """Knobs shared by all suites; ``None`` selects the suite's own default.

    Attributes
    ----------
    dim : int or None
        Restrict dimension sweeps to one dimension.
    trunc : int
        Highest harmonic degree of random annulus fields.
    grid : int or None
        Angular quadrature level.
    seed : int
        Seed of the counter-based generator.
    tol : float or None
        Replaces the default tolerance of quadrature and finite-difference
        cross-checks.
    a, b : float or None
        Annulus used by the Hardy-Rellich checks (default ``1, e^50``).
    ensemble : int or None
        Overrides every random ensemble size.
    """

    dim: int | None = None
    trunc: int = 6
    grid: int | None = None
    seed: int = 7
    tol: float | None = None
    a: float | None = None
    b: float | None = None
    ensemble: int | None = None

    def __post_init__(self):
        if self.trunc < 1:
            raise ValueError("trunc must be >= 1")
        if self.dim is not None and self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.grid is not None and self.grid < 1:
            raise ValueError("grid must be >= 1")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.ensemble is not None and self.ensemble < 1:
            raise ValueError("ensemble must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_mapping(cls, data: dict) -> "SuiteConfig":
        names = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(data) - set(names)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: _coerce(k, v) for k, v in data.items()})

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def size(self, default: int) -> int:
        return default if self.ensemble is None else self.ensemble

    def dims(self, default) -> tuple:
        return tuple(default) if self.dim is None else (self.dim,)

    def tolerance(self, default: float) -> float:
        return default if self.tol is None else self.tol


_INT_KEYS = {"dim", "trunc", "grid", "seed", "ensemble"}


def _coerce(key: str, value):
    if value is None or (isinstance(value, str) and value.lower() in {"", "none", "null"}):
        return None
    if key in _INT_KEYS:
        return int(value)
    return float(value)


@dataclass
class SuiteReport:
    """Checks of one suite run plus pass/fail counts."""

    suite: str
    config: SuiteConfig
    checks: list = field(default_factory=list)

    @property
    def summary(self) -> dict:
        passed = sum(1 for c in self.checks if c.passed)
        failed = [c.lemma_id for c in self.checks if not c.passed]
        return {"total": len(self.checks), "passed": passed, "failed": len(failed),
                "failed_ids": sorted(set(failed))}

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    def to_dict(self) -> dict:
        return {"suite": self.suite, "config": self.config.to_dict(),
                "checks": [c.to_dict() for c in self.checks], "summary": self.summary}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def suite_rng(seed: int, suite: str) -> np.random.Generator:
    """Philox stream keyed by the seed and the suite's position in the registry."""
    index = list(SUITES).index(suite)
    return np.random.Generator(np.random.Philox(key=int(seed) + (index << 64)))


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------
def _constants(cfg: SuiteConfig, rng: np.random.Generator) -> list:
    th = specfun.conformal_thresholds()
    sq2 = math.sqrt(2.0)
    eq = LemmaCheck.equality
    out = [
        eq("const:j01", specfun.bessel_first_zero(0.0), 2.4048, 1e-3),
        eq("const:j_half", specfun.bessel_first_zero(0.5), math.pi, 1e-10),
        eq("const:j11", specfun.bessel_first_zero(1.0), 3.83170, 1e-4),
        eq("bessel_eigenvalue", poisson.dirichlet_eigenvalue(4), 14.681970, 1e-3),
        eq("bessel_eigenvalue", stability.dirichlet_ball_eigenvalue(4),
           specfun.bessel_first_zero(1.0) ** 2, 1e-8, relative=True, oracle="rayleigh_ritz"),
        eq("def_Gamma1", poisson.gamma1(), 6.1824966, 1e-6),
        eq("const:Gamma1_sq", poisson.gamma1() ** 2, 38.223, 1e-2),
        eq("const:Lambda4", annulus.pointwise_constant(4), 8.0 * math.sqrt(30.0) / math.pi, 1e-10),
        eq("const:lambert_2W", th["two_W_inv_2sqrt2"], 0.5398, 1e-3),
        eq("const:lambert_W32", th["W_3_2"], 0.72586, 1e-4),
        eq("const:lambert_expW32", th["exp_W_3_2"], 2.06651, 1e-4),
        eq("const:lambert_eps0", th["eps0_2_over_3W_9_4"], 0.7344, 1e-3),
        LemmaCheck.compare("const:lambert_gap", 1.0 / 50.0, th["one_minus_8_over_9W_9_4"],
                           tol=0.0, quoted=0.020760),
        eq("const:Gamma_W", calculus.GAMMA_W, 98705.182, 0.01),
        LemmaCheck.compare("const:sobolev_14", lorentz.improved_sobolev_constant(4, 2.0), 14.0,
                           tol=0.0, closed_form="8*2^(3/4)"),
        eq("const:c4", lorentz.averaging_constant(4), 2.0 * math.pi * sq2, 1e-12, relative=True),
        eq("lp_infty_weight", lorentz.weak_weight_formula(4, 2.0), 2.0 * math.pi * sq2, 1e-12,
           relative=True, form="formula"),
    ]
    measured = lorentz.power_weight_norm(4, -2.0, None, 2.0, math.inf)
    out.append(LemmaCheck.compare("lp_infty_weight", measured, lorentz.weak_weight_formula(4, 2.0),
                                  tol=1e-12, form="measured_vs_formula", measured=measured,
                                  measured_over_pi_sqrt2=measured / (math.pi * sq2)))
    out.append(eq("const:Lambda_series", annulus.pointwise_series_constant(4), 240.0, 1e-10))
    return out


# ---------------------------------------------------------------------------
# harmonics
# ---------------------------------------------------------------------------
def _harmonics(cfg: SuiteConfig, rng: np.random.Generator) -> list:
    out = []
    tol = cfg.tolerance(1e-10)
    for d in cfg.dims((3, 4)):
        if d not in (3, 4):
            continue
        beta = specfun.sphere_area(d)
        quad = harmonics.angular_quadrature(d, cfg.grid or cfg.trunc + 2)
        out.append(LemmaCheck.equality("sphere_quadrature", float(quad.weights.sum()), beta, tol,
                                       relative=True, d=d))
        sh = harmonics.solid_harmonics(d, cfg.trunc, quad.nodes, order=2)
        vals = np.concatenate([v for v, _, _ in sh], axis=1)
        gram = quad.integrate(vals[:, :, None] * vals[:, None, :]) / beta
        out.append(LemmaCheck.equality("harmonic_orthonormality",
                                       float(np.abs(gram - np.eye(gram.shape[0])).max()), 0.0, tol,
                                       d=d, nmax=cfg.trunc, size=gram.shape[0]))
        for n in range(cfg.trunc + 1):
            lap = np.trace(sh[n][2], axis1=-2, axis2=-1)
            out.append(LemmaCheck.equality("harmonic_laplacian", float(np.abs(lap).max()), 0.0,
                                           tol * (1 + n) ** 2, d=d, n=n))
            g = harmonics.sphere_gradient(d, n, quad.nodes)
            energy = quad.integrate(np.einsum("mki,mki->mk", g, g)) / beta
            out.append(LemmaCheck.equality(
                "sphere_gradient_energy", float(np.abs(energy - harmonics.laplace_eigenvalue(d, n)).max()),
                0.0, tol * (1 + n) ** 2, d=d, n=n))
            hq = harmonics.sphere_hessian_sq_quadrature(d, n)
            exact = harmonics.bochner_hessian_integral(d, n)
            out.append(LemmaCheck.equality("ipp_hessien_sphere", float(np.max(np.abs(hq - exact))),
                                           0.0, tol * max(1.0, exact), d=d, n=n, exact=exact))
    return out


# ---------------------------------------------------------------------------
# annulus-norms
# ---------------------------------------------------------------------------
_NORM_KINDS = ("l2", "dirichlet", "weighted_dirichlet", "hessian")
_BETAS = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)


def _series_partial(d: int, beta: float, nmax: int = 4000) -> float:
    n = np.arange(nmax + 1)
    dims = np.array([harmonics.dim_harmonics(d, int(k)) for k in n], dtype=float)
    return float(np.sum((2 * n + d) * dims ** 2 * beta ** n))


def _annulus_norms(cfg: SuiteConfig, rng: np.random.Generator) -> list:
    out = []
    qtol = cfg.tolerance(1e-7)
    for d in cfg.dims((3, 4)):
        if d not in (3, 4):
            continue
        for i in range(cfg.size(50)):
            N = 1 + i % cfg.trunc
            b = float(rng.uniform(1.5, 4.0))
            u = annulus.SpectralField.random(d, 1.0, b, N, rng, adversarial=bool(i % 2))
            for kind in _NORM_KINDS:
                exact = annulus.energy(u, kind)
                quad = annulus.quadrature_energy(u, kind, level=cfg.grid)
                out.append(LemmaCheck.equality(f"norm_identity:{kind}", quad, exact, qtol,
                                               relative=True, d=d, N=N, a=1.0, b=b))
            radii = np.linspace(1.0, b, 7)[1:-1]
            fl = [annulus.flux(u, r) for r in radii]
            fq = annulus.flux_quadrature(u, float(radii[2]), level=cfg.grid)
            scale = max(abs(fl[0]), 1e-300)
            out.append(LemmaCheck.compare("flux_condition", max(abs(f - fl[0]) for f in fl) / scale,
                                          1e-10, tol=0.0, d=d, N=N, flux=fl[0], quadrature=fq,
                                          quadrature_rel=abs(fq - fl[0]) / scale))
        for beta in _BETAS:
            out.append(LemmaCheck.equality("series_identity", annulus.series_identity(d, beta),
                                           _series_partial(d, beta), 1e-10, relative=True,
                                           d=d, beta=beta))
    out.extend(_comparisons(cfg, rng))
    out.extend(_pointwise(cfg, rng))
    return out


def _comparisons(cfg: SuiteConfig, rng: np.random.Generator) -> list:
    """Dyadic comparison lemmas at the conformal ratio ``b/a = 9/4``."""
    out = []
    a, b = 1.0, annulus.CONFORMAL_RATIO
    dims = [d for d in cfg.dims((3, 4)) if d >= 3]
    for i in range(cfg.size(100)):
        d = dims[i % len(dims)]
        N = 1 + i % cfg.trunc
        adv = bool(i % 2)
        u = annulus.SpectralField.random(d, a, b, N, rng, adversarial=adv)
        ball = annulus.SpectralField.random(d, 0.0, b, N, rng)
        r, s = np.sort(rng.uniform(a, b, size=2))
        r1 = float(rng.uniform(a, b / 2.0))
        for lid, lem in annulus.COMPARISON_LEMMAS.items():
            if lem.domain == "ball":
                out.append(annulus.verify_comparison_lemma(lid, ball, float(r)))
            elif lid == "dirichlet_weighted_typeI":
                out.append(annulus.verify_comparison_lemma(lid, u, r1))
            else:
                out.append(annulus.verify_comparison_lemma(lid, u, float(r), float(s)))
        v = u.without_flux()
        out.append(annulus.verify_coefficient_lower_bound(v))
        if d == 4:
            out.append(annulus.verify_hessian_lower_bound(v))
    return out


def _pointwise(cfg: SuiteConfig, rng: np.random.Generator) -> list:
    out = []
    for d in [d for d in cfg.dims((3, 4)) if d >= 3]:
        for i in range(cfg.size(10)):
            u = annulus.SpectralField.random(d, 1.0, 4.0, 1 + i % cfg.trunc, rng).without_flux()
            for tid in annulus.POINTWISE_THEOREMS:
                x = rng.standard_normal(d)
                x *= rng.uniform(1.2, 3.5) / np.linalg.norm(x)
                out.append(annulus.verify_pointwise_bound(tid, u, x))
    return out


# ---------------------------------------------------------------------------
# lorentz and averaging
# ---------------------------------------------------------------------------
def _bump_field(rng: np.random.Generator, n_radial: int = 24, level: int = 8):
    """Radial bump ``((r - r0)(r1 - r))^k`` sampled on its support."""
    r0 = float(rng.uniform(0.5, 1.0))
    r1 = r0 * float(rng.uniform(2.0, 6.0))
    k = int(rng.integers(3, 6))

    def fun(points):
        r = np.linalg.norm(points, axis=1)
        g = (r - r0) * (r1 - r)
        g1 = r0 + r1 - 2.0 * r
        f0 = g ** k
        f1 = k * g ** (k - 1) * g1
        f2 = k * (k - 1) * g ** (k - 2) * g1 ** 2 - 2.0 * k * g ** (k - 1)
        jet = calculus.radial_jet(points, f0, f1, f2)
        return jet.val, jet.grad, jet.hess

    return calculus.GridField.sample(fun, 4, [r0, r1], n_radial, level)


def _lorentz(cfg: SuiteConfig, rng: np.random.Generator) -> list:
    out = []
    for i in range(cfg.size(20)):
        f = lorentz.SimpleFunction.random(int(rng.integers(2, 5)), int(rng.integers(1, 8)), rng)
        closed = lorentz.l21_closed_form(f)
        out.append(LemmaCheck.equality("f_l21", closed, lorentz.lorentz_norm(f, 2.0, 1.0), 1e-12,
                                       relative=True, d=f.d, n_cells=len(f.cells)))
    out.extend(_ineq_fund_sweep(cfg.size(100) * 100, rng))
    for alpha, p, q in ((2.0, 1.5, 1.0), (2.0, 2.0, 1.0), (0.5, 4.0, 2.0), (3.0, 2.0, 1.0)):
        for _ in range(5):
            f = lorentz.SimpleFunction.random(int(rng.integers(2, 5)), int(rng.integers(1, 8)), rng)
            out.append(lorentz.verify_power_stability(f, alpha, p, q))
    for _ in range(cfg.size(50)):
        d = int(rng.integers(2, 5))
        f = lorentz.SimpleFunction.random(d, int(rng.integers(1, 8)), rng)
        g = lorentz.SimpleFunction.random(d, int(rng.integers(1, 8)), rng)
        out.append(lorentz.duality_pairing_check(f, g))
    for p, q in ((2.0, 1.0), (2.0, 2.0), (4.0, 2.0)):
        for _ in range(5):
            f = lorentz.SimpleFunction.random(int(rng.integers(2, 5)), int(rng.integers(1, 10)), rng)
            out.append(lorentz.verify_dyadic_decomposition_norm(f, p, q))
    for _ in range(cfg.size(10)):
        out.append(lorentz.improved_sobolev_check(_bump_field(rng, level=cfg.grid or 8)))
    for d in (2, 3, 4):
        for exponent in (-1.0, -0.5 * d):
            val = lorentz.power_weight_norm(d, exponent, (0.5, 2.0), 2.0, math.inf, "seminorm")
            out.append(LemmaCheck.compare("lp_infty_weight", val, math.inf, tol=0.0, d=d,
                                          exponent=exponent, value=val, domain=[0.5, 2.0]))
    out.extend(_harmonic_lorentz(cfg, rng))
    return out


def _ineq_fund_sweep(trials: int, rng: np.random.Generator) -> list:
    """Brute-force the combinatorial inequality; one record (the tightest) per length."""
    worst: dict = {}
    counts: dict = {}
    for _ in range(trials):
        n = int(rng.integers(1, 7))
        c = np.cumsum(rng.exponential(size=n) * (rng.random(n) < 0.8))
        D = rng.exponential(size=n) * (rng.random(n) < 0.9)
        chk = lorentz.verify_ineq_fund(c, D)
        tried, failed = counts.get(n, (0, 0))
        counts[n] = (tried + 1, failed + (not chk.passed))
        ratio = chk.lhs / chk.rhs if chk.rhs > 0 else (0.0 if chk.lhs == 0 else math.inf)
        if n not in worst or ratio > worst[n][0]:
            worst[n] = (ratio, chk)
    out = []
    for n in sorted(worst):
        ratio, chk = worst[n]
        tried, failed = counts[n]
        chk.params.update(trials=tried, failures=failed, worst_ratio=ratio)
        chk.passed = failed == 0
        out.append(chk)
    return out


def _harmonic_lorentz(cfg: SuiteConfig, rng: np.random.Generator) -> list:
    """Decay exponents of the Lorentz estimates on shrunken annuli (``d = 4``)."""
    u = annulus.SpectralField.random(4, 1.0, 1e4, 2, rng).without_flux()
    out = [annulus.verify_lorentz_scaling(tid, u) for tid in annulus.LORENTZ_THEOREMS]
    out.append(annulus.verify_lorentz_constant(u, 0.5))
    return out


def _averaging(cfg: SuiteConfig, rng: np.random.Generator) -> list:
    out = []
    for d in cfg.dims((2, 3, 4)):
        for q in (1.0, 2.0):
            for _ in range(cfg.size(100)):
                f = lorentz.SimpleFunction.random(d, int(rng.integers(1, 8)), rng)
                out.append(lorentz.verify_averaging_lemma(f, q))
    return out


# ---------------------------------------------------------------------------
# poisson-wente
# ---------------------------------------------------------------------------
def _poisson(cfg: SuiteConfig, rng: np.random.Generator) -> list:
    out = [poisson.verify_shell_gradient_bound(poisson.RadialSource.eigenfunction(), tol=1e-8)]
    n = cfg.size(30)
    for _ in range(n):
        k = int(rng.integers(0, 7))
        f = poisson.RadialSource.random_shells(rng, shells=[k])
        out.append(poisson.verify_shell_gradient_bound(f, k))
    multi = [poisson.RadialSource.random_shells(rng, n_shells=3) for _ in range(n)]
    out.extend(poisson.verify_weighted_gradient_lemma(f) for f in multi)
    est = poisson.estimate_weighted_dirichlet_constant(multi)
    out.append(LemmaCheck.compare("weighted_modified_dirichlet", est, math.inf, tol=0.0,
                                  fitted=est, ensemble=n))
    for _ in range(max(1, n // 3)):
        j = int(rng.integers(3, 6))
        inner = poisson.zero_flux_source(rng, j)
        out.append(poisson.verify_decay_lemma(inner, j, int(rng.integers(0, j))))
        outer = poisson.zero_flux_source(rng, j, inside="shell")
        out.append(poisson.verify_decay_lemma(outer, j, int(rng.integers(j + 1, j + 4))))
    iter_sources = [poisson.RadialSource.random_shells(rng, n_shells=3) for _ in range(n)]
    for alpha in (0.25, 0.5):
        out.append(poisson.verify_iteration_theorem(iter_sources, alpha))
    return out


# ---------------------------------------------------------------------------
# whitney
# ---------------------------------------------------------------------------
def _whitney(cfg: SuiteConfig, rng: np.random.Generator) -> list:
    out = []
    for i in range(cfg.size(30)):
        b = float(rng.uniform(2.2, 6.0))
        u = annulus.SpectralField.random(4, 1.0, b, 1 + i % min(cfg.trunc, 4), rng,
                                         adversarial=bool(i % 2))
        out.extend(calculus.verify_whitney_lines(u, level=cfg.grid))
        out.append(calculus.verify_norm_equivalence(u, level=cfg.grid))
        if i < 5:
            F = calculus.GridField.from_spectral(u, level=cfg.grid)
            res = calculus.inversion_identity_residuals(F, calculus.invert_pullback(F))
            worst = max(v for v in res.values() if not math.isnan(v))
            out.append(LemmaCheck.compare("inversion_identity", worst, 1e-10, tol=0.0, **res))
    for d in range(3, 11):
        for n in range(4):
            out.append(calculus.verify_poincare_wirtinger(d, n))
    out.extend(calculus.verify_cutoff_bounds())
    ps = calculus.estimate_poincare_sobolev(size=cfg.size(8), seed=int(rng.integers(2 ** 31)))
    out.append(LemmaCheck.compare("poincare_sobolev", ps["constant"], math.inf, tol=0.0, **ps))
    return out


# ---------------------------------------------------------------------------
# rellich
# ---------------------------------------------------------------------------
def _rellich_annulus(cfg: SuiteConfig) -> tuple:
    return (1.0 if cfg.a is None else cfg.a, math.exp(50.0) if cfg.b is None else cfg.b)


def _neck_field(a: float, b: float, n_radial: int = 16, level: int = 4):
    """Constant map ``e_1`` and ``v = phi(log r) e_2`` with a bump ``phi`` on ``[a, b]``."""
    L = math.log(b / a)
    u = stability.SphereMap.constant([1.0, 0.0, 0.0, 0.0]).grid([a, b], n_radial, level)
    pts = u.points
    r = np.linalg.norm(pts, axis=1)
    t = np.log(r / a) / L
    q = 4.0 * t * (1.0 - t)
    q1 = 4.0 * (1.0 - 2.0 * t) / L
    p0, p1, p2 = q ** 3, 3.0 * q * q * q1, 6.0 * q * q1 * q1 - 24.0 * q * q / L ** 2
    psi = calculus.radial_jet(pts, p0, p1 / r, (p2 - p1) / r ** 2)
    e2 = calculus.Jet.constant(pts.shape[0], 4, [0.0, 1.0, 0.0, 0.0])
    v = calculus.GridField(4, u.radii, u.nodes, u.weights, e2.times(psi))
    return u, v


def _rellich(cfg: SuiteConfig, rng: np.random.Generator) -> list:
    a, b = _rellich_annulus(cfg)
    L = math.log(b / a)
    out = [stability.verify_rellich_A(a, b), stability.verify_rellich_B(a, b)]
    for beta in (0.5, 1.0, 2.0):
        out.append(stability.verify_rellich_C(a, b, beta))
    minima = [stability.mode_minima(L, "hardy", [1], size)[1] for size in (20, 30, 40)]
    out.append(LemmaCheck.compare("rayleigh_ritz_monotone", max(np.diff(minima)), 0.0, tol=0.0,
                                  atol=1e-12 * minima[0], minima=minima, sizes=[20, 30, 40]))
    for n, m in ((0, 1), (1, 2), (2, 4)):
        out.append(LemmaCheck.compare("mode_decoupling", stability.cross_mode_coupling(n, m),
                                      1e-12, tol=0.0, n=n, m=m))
    u, v = _neck_field(a, b)
    out.append(stability.assemble_neck_positivity(v, a, b, 1.0))
    out.append(stability.verify_neck_stability(u, v, stability.NeckWeight(b, a * b, 1.0)))
    return out


# ---------------------------------------------------------------------------
# pohozaev
# ---------------------------------------------------------------------------
def _pohozaev(cfg: SuiteConfig, rng: np.random.Generator) -> list:
    proj = stability.SphereMap.radial_projection()
    out = [stability.verify_flux_constancy(proj, (0.25, 0.5, 1.0, 2.0, 4.0), 9.0 * math.pi ** 2,
                                           tol=cfg.tolerance(1e-7))]
    itol = cfg.tolerance(1e-6)
    out.append(stability.verify_pohozaev_identity(proj, tol=itol))
    out.append(stability.verify_pohozaev_identity(
        stability.SphereMap.constant([0.0, 0.0, 1.0, 0.0]), tol=itol, level=8))
    for _ in range(cfg.size(3)):
        c = rng.standard_normal(4)
        c *= rng.uniform(2.0, 3.0) / np.linalg.norm(c)
        out.append(stability.verify_pohozaev_identity(
            stability.SphereMap.translated_projection(c), tol=itol))
        p = rng.standard_normal(3)
        h = stability.PolynomialMap.random_biharmonic(rng, m=p.size)
        out.append(stability.verify_pohozaev_identity(
            stability.SphereMap.perturbed(p / np.linalg.norm(p), h, 0.1), tol=itol, level=8))
    return out


# ---------------------------------------------------------------------------
# second-variation
# ---------------------------------------------------------------------------
def _second_variation(cfg: SuiteConfig, rng: np.random.Generator) -> list:
    level = cfg.grid or 8
    ftol = cfg.tolerance(1e-4)
    u = stability.SphereMap.radial_projection().grid([1.0, 2.0], 16, level)
    out = []
    pairs = []
    for _ in range(cfg.size(10)):
        w = stability.tangent_variation(u, rng, 1.0, 2.0)
        pairs.append((u, w))
        q = stability.second_variation(u, w)
        fd = stability.second_variation_fd(u, w)
        direct = stability.second_variation_direct(u, w)
        printed = stability.second_variation(u, w, form="printed")
        out.append(LemmaCheck.equality("der2_biharmonique", q, fd, ftol, relative=True,
                                       direct=direct, printed=printed,
                                       printed_rel_error=abs(printed - fd) / abs(fd)))
        grad = stability.first_variation_fd(u, w)
        out.append(LemmaCheck.compare("biharmonic_critical", abs(grad) / abs(q), 1e-6, tol=0.0,
                                      first_variation=grad))
        out.append(stability.verify_d2_lower_bound(u, w, 0.5))
    out.append(LemmaCheck.compare("d2_constant_fit", stability.fit_d2_constant(pairs, 0.5), 2.0,
                                  tol=0.0, eps=0.5))
    c = stability.SphereMap.constant([0.0, 1.0, 0.0, 0.0]).grid([1.0, 2.0], 16, level)
    for _ in range(3):
        w = stability.tangent_variation(c, rng, 1.0, 2.0)
        lw = w.jet.laplacian()
        plain = c.integrate(np.einsum("pc,pc->p", lw, lw))
        out.append(LemmaCheck.equality("der2_biharmonique0", stability.second_variation(c, w),
                                       plain, 1e-12, relative=True, map="constant"))
    return out


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------
SUITES: dict[str, Callable] = {
    "constants": _constants,
    "harmonics": _harmonics,
    "annulus-norms": _annulus_norms,
    "lorentz": _lorentz,
    "averaging": _averaging,
    "poisson-wente": _poisson,
    "whitney": _whitney,
    "rellich": _rellich,
    "pohozaev": _pohozaev,
    "second-variation": _second_variation,
    "all": None,
}

# lemma id -> suite emitting it
REGISTRY: dict[str, str] = {
    **{k: "constants" for k in (
        "const:j01", "const:j_half", "const:j11", "bessel_eigenvalue", "def_Gamma1",
        "const:Gamma1_sq", "const:Lambda4", "const:lambert_2W", "const:lambert_W32",
        "const:lambert_expW32", "const:lambert_eps0", "const:lambert_gap", "const:Gamma_W",
        "const:sobolev_14", "const:c4", "const:Lambda_series")},
    **{k: "harmonics" for k in (
        "sphere_quadrature", "harmonic_orthonormality", "harmonic_laplacian",
        "sphere_gradient_energy", "ipp_hessien_sphere")},
    **{f"norm_identity:{k}": "annulus-norms" for k in _NORM_KINDS},
    **{k: "annulus-norms" for k in (
        "flux_condition", "series_identity", "no_flux_ineq", "est_below_hessian_harmonic2",
        *annulus.COMPARISON_LEMMAS, *annulus.POINTWISE_THEOREMS)},
    **{k: "lorentz" for k in (
        "f_l21", "ineq_fund", "lorentz_stability_general", "l21_l2inf_duality",
        "dyadic_decomposition", "l42_sobolev", "lp_infty_weight", "lorentz_l2_gen_d_constant",
        *annulus.LORENTZ_THEOREMS)},
    **{k: "averaging" for k in ("averaging_l21", "averaging_l2q")},
    **{k: "poisson-wente" for k in (
        "elementary_gradient_estimate", "lemma:dyadic_gradient", "weighted_modified_dirichlet",
        "lemmae3", "dyadic_main_theorem2")},
    **{k: "whitney" for k in (
        "whitney_extension_dim4", "whitney_extension_dim4_equiv_norms", "inversion_identity",
        "dyadic_poincare_wirtinger", "cutoff_gradient", "cutoff_hessian", "poincare_sobolev")},
    **{k: "rellich" for k in (
        "th:bound_biharmonic0", "th:bound_biharmonic1", "th:bound_biharmonic2",
        "rayleigh_ritz_monotone", "mode_decoupling", "neck_positive", "ineq:stability_ineq")},
    **{k: "pohozaev" for k in ("pohozaev_flux", "pohozaev_identity")},
    **{k: "second-variation" for k in (
        "der2_biharmonique", "der2_biharmonique0", "biharmonic_critical",
        "elementary_d2_lower_bound", "d2_constant_fit")},
}


def run_suite(name: str, config: SuiteConfig | dict | None = None) -> SuiteReport:
    """Run a named suite and collect its checks.

    Parameters
    ----------
    name : str
        A key of :data:`SUITES`; ``"all"`` runs every suite in order.
    config : SuiteConfig, dict or None

    Raises
    ------
    UnknownSuiteError
        For an unregistered name.
    """
    if name not in SUITES:
        raise UnknownSuiteError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    if config is None:
        config = SuiteConfig()
    elif isinstance(config, dict):
        config = SuiteConfig.from_mapping(config)
    names = [n for n in SUITES if n != "all"] if name == "all" else [name]
    report = SuiteReport(name, config)
    for n in names:
        checks = SUITES[n](config, suite_rng(config.seed, n))
        if name == "all":
            for c in checks:
                c.params["suite"] = n
        report.checks.extend(checks)
    return report


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------
def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="verify", description="Run a named verification suite.")
    p.add_argument("suite", choices=list(SUITES))
    p.add_argument("--dim", type=int)
    p.add_argument("--trunc", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--ensemble", type=int)
    p.add_argument("--config", help="JSON file with config keys")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--csv", help="write Hardy-Rellich spectra as CSV (rellich and all)")
    return p


def resolve_config(args: argparse.Namespace, environ=None) -> SuiteConfig:
    """Defaults, then the config file, then ``ARTIFACT_VERIFY_*`` variables, then flags."""
    environ = os.environ if environ is None else environ
    data: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data.update(json.load(fh))
    keys = [f.name for f in dataclasses.fields(SuiteConfig)]
    for k in keys:
        env = environ.get(ENV_PREFIX + k.upper())
        if env is not None:
            data[k] = env
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            data[k] = v
    return SuiteConfig.from_mapping(data)


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
    except (ValueError, OSError) as exc:
        parser.print_usage(sys.stderr)
        print(f"verify: error: {exc}", file=sys.stderr)
        return 2
    start = time.perf_counter()
    try:
        report = run_suite(args.suite, config)
    except PreconditionError as exc:
        print(f"verify: error: {exc}", file=sys.stderr)
        return 2
    text = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if args.csv:
        if args.suite in ("rellich", "all"):
            a, b = _rellich_annulus(config)
            with open(args.csv, "w", encoding="utf-8") as fh:
                fh.write(stability.spectra_csv(math.log(b / a), "hardy"))
        else:
            print("verify: --csv only applies to the rellich suite", file=sys.stderr)
    s = report.summary
    print(f"{args.suite}: {s['passed']}/{s['total']} checks passed, "
          f"wall time {time.perf_counter() - start:.2f} s", file=sys.stderr)
    if s["failed"]:
        print("failed: " + ", ".join(s["failed_ids"]), file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
