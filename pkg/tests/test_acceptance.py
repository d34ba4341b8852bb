"""End-to-end acceptance criteria.

Each criterion runs its suite(s) with the default configuration, checks the wall-clock budget
and asserts every clause at its stated tolerance. One ``criterion N ...: PASS/FAIL`` line is
printed per criterion, also under captured output. Criteria containing a clause that the
library shows to be false are strict xfails; their attainable clauses are asserted by the
separate ``test_clause_*`` tests below.
"""
from __future__ import annotations

import collections
import math
import time

import pytest

from artifact import harness as Hn

pytestmark = pytest.mark.acceptance

_RUNS: dict[str, tuple[Hn.SuiteReport, float]] = {}


def _run(name: str) -> tuple[Hn.SuiteReport, float]:
    """Run ``name`` once per session with the default configuration and time it."""
    if name not in _RUNS:
        t0 = time.perf_counter()
        report = Hn.run_suite(name)
        _RUNS[name] = (report, time.perf_counter() - t0)
    return _RUNS[name]


def _by_id(report: Hn.SuiteReport, lemma_id: str) -> list:
    return [c for c in report.checks if c.lemma_id == lemma_id]


class Verdict:
    """Collects the clauses of one criterion and prints its single summary line."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.failures: list[str] = []
        self.notes: list[str] = []

    def clause(self, label: str, ok: bool, detail: str = "") -> None:
        if not ok:
            self.failures.append(f"{label} {detail}".strip())

    def note(self, text: str) -> None:
        self.notes.append(text)

    @property
    def ok(self) -> bool:
        return not self.failures

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        info = "; ".join(self.failures if self.failures else self.notes)
        return f"criterion {self.number} {self.title}: {status} ({info})"

    def emit(self, capsys) -> None:
        with capsys.disabled():
            print("\n" + self.line())
        assert self.ok, self.line()


def _budget(v: Verdict, names: tuple[str, ...], limit: float) -> None:
    elapsed = sum(_run(n)[1] for n in names)
    v.clause("time", elapsed < limit, f"{elapsed:.1f} s >= {limit:.0f} s")
    v.note(f"{elapsed:.1f} s < {limit:.0f} s")


def _all_pass(v: Verdict, checks: list, label: str, count: int | None = None) -> None:
    bad = [c for c in checks if not c.passed]
    v.clause(label, bool(checks) and not bad, f"{len(bad)}/{len(checks)} failed")
    if count is not None:
        v.clause(f"{label} count", len(checks) >= count, f"{len(checks)} < {count}")


# -- 1. constants -------------------------------------------------------------------------------
CONSTANTS = [
    # (lemma id, target, stated tolerance)
    ("const:j01", 2.4048, 1e-3),
    ("const:j_half", math.pi, 1e-10),
    ("const:j11", 3.83170, 1e-4),
    ("bessel_eigenvalue", 14.681970, 1e-3),
    ("def_Gamma1", 6.1824966, 1e-6),
    ("const:Gamma1_sq", 38.223, 1e-2),
    ("const:Lambda4", 8.0 * math.sqrt(30.0) / math.pi, 1e-10),
    ("const:lambert_2W", 0.5398, 1e-3),
    ("const:lambert_W32", 0.72586, 1e-4),
    ("const:lambert_expW32", 2.06651, 1e-4),
    ("const:lambert_eps0", 0.7344, 1e-3),
    ("const:Gamma_W", 98705.182, 0.01),
    ("const:c4", 2.0 * math.pi * math.sqrt(2.0), 1e-12 * 2.0 * math.pi * math.sqrt(2.0)),
]


def test_criterion_1_constants(capsys):
    report, _ = _run("constants")
    v = Verdict(1, "constant ledger")
    _budget(v, ("constants",), 5.0)
    for lid, target, tol in CONSTANTS:
        checks = _by_id(report, lid)
        v.clause(lid, bool(checks), "missing")
        for c in checks:
            value = c.params["value"]
            if c.params.get("oracle") == "rayleigh_ritz":
                continue
            v.clause(lid, abs(value - target) <= tol, f"{value!r} vs {target!r}")
    gap = _by_id(report, "const:lambert_gap")[0]
    v.clause("lambert gap", gap.passed and gap.lhs == 1.0 / 50.0
             and abs(gap.rhs - 0.020760) < 1e-6, f"{gap.rhs!r}")
    sob = _by_id(report, "const:sobolev_14")[0]
    v.clause("8*2^(3/4) < 14", sob.lhs == 8.0 * 2.0 ** 0.75 and sob.lhs < 14.0)
    weights = _by_id(report, "lp_infty_weight")
    formula = [c for c in weights if c.params.get("form") == "formula"]
    v.clause("weak-L2 weight formula", len(formula) == 1 and formula[0].passed
             and formula[0].params["value"] == pytest.approx(2.0 * math.pi * math.sqrt(2.0),
                                                             rel=1e-15))
    _all_pass(v, report.checks, "suite")
    v.note(f"{len(report.checks)} checks")
    v.emit(capsys)


# -- 2. spectral norms vs quadrature --------------------------------------------------------------
def test_criterion_2_annulus_norms(capsys):
    report, _ = _run("annulus-norms")
    v = Verdict(2, "spectral vs quadrature")
    _budget(v, ("annulus-norms",), 60.0)
    for kind in ("l2", "dirichlet", "weighted_dirichlet", "hessian"):
        checks = _by_id(report, f"norm_identity:{kind}")
        _all_pass(v, checks, kind, 100)
        v.clause(f"{kind} tol", all(c.params["tol"] <= 1e-7 and c.params["mode"] == "relative"
                                    for c in checks))
        dims = {c.params["d"] for c in checks}
        v.clause(f"{kind} dims", dims == {3, 4}, str(dims))
        v.clause(f"{kind} truncation", max(c.params["N"] for c in checks) <= 6)
        for d in (3, 4):
            n = sum(c.params["d"] == d for c in checks)
            v.clause(f"{kind} d={d} fields", n >= 50, f"{n} < 50")
    flux = _by_id(report, "flux_condition")
    _all_pass(v, flux, "flux")
    worst = max(c.params["quadrature_rel"] for c in flux)
    v.clause("flux r-independence", worst <= 1e-10, f"{worst:.2e}")
    series = _by_id(report, "series_identity")
    _all_pass(v, series, "series")
    v.clause("series tol", all(c.params["tol"] <= 1e-10 for c in series))
    for d in (3, 4):
        betas = {c.params["beta"] for c in series if c.params["d"] == d}
        v.clause(f"series betas d={d}", len(betas) >= 9, f"{len(betas)}")
    v.note(f"flux worst {worst:.1e}")
    v.emit(capsys)


# -- 3. comparison lemmas ---------------------------------------------------------------------
COMPARISON_IDS = ("dirichlet_comp", "dirichlet_comp2", "dirichlet_comp_weighted0",
                  "dirichlet_comp_weighted2", "dirichlet_comp3", "dirichlet_comp_weighted",
                  "function_comp_dyadic", "function_comp_dyadic2", "dirichlet_weighted_typeI",
                  "no_flux_ineq")


def test_criterion_3_comparison_lemmas(capsys):
    report, _ = _run("annulus-norms")
    v = Verdict(3, "comparison lemmas")
    worst = math.inf
    for lid in COMPARISON_IDS:
        checks = _by_id(report, lid)
        _all_pass(v, checks, lid, 100)
        v.clause(f"{lid} ratio", all(c.params["b"] == 2.25 for c in checks), "b/a != 9/4")
        worst = min([worst] + [c.margin for c in checks])
    v.note(f"{len(COMPARISON_IDS)} lemmas x 100 instances, b/a = 9/4, min margin {worst:.2e}")
    v.emit(capsys)


# -- 4. Lorentz -------------------------------------------------------------------------------
def test_criterion_4_lorentz(capsys):
    report, _ = _run("lorentz")
    avg, _ = _run("averaging")
    v = Verdict(4, "Lorentz suite")
    _budget(v, ("lorentz", "averaging"), 30.0)
    f21 = _by_id(report, "f_l21")
    _all_pass(v, f21, "f_l21")
    v.clause("f_l21 tol", all(c.params["tol"] <= 1e-12 for c in f21))
    counts = collections.Counter((c.params["d"], c.params["q"]) for c in avg.checks)
    for d in (2, 3, 4):
        for q in (1.0, 2.0):
            v.clause(f"averaging d={d} q={q:g}", counts[(d, q)] >= 100, str(counts[(d, q)]))
    _all_pass(v, avg.checks, "averaging")
    for c in avg.checks:
        d = c.params["d"]
        expected = 2.0 ** (d / 4.0) * math.sqrt(2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0))
        if abs(c.params["constant"] - expected) > 1e-12 * expected:
            v.clause("averaging constant", False, f"d={d}")
            break
    fund = _by_id(report, "ineq_fund")
    _all_pass(v, fund, "ineq_fund")
    trials = sum(c.params["trials"] for c in fund)
    v.clause("ineq_fund trials", trials >= 10_000, str(trials))
    v.clause("ineq_fund lengths", {c.params["n"] for c in fund} == set(range(1, 7)))
    squaring = _by_id(report, "lorentz_stability_general")
    _all_pass(v, squaring, "squaring")
    v.clause("squaring tol", all(c.params["tol"] <= 1e-10 for c in squaring))
    _all_pass(v, _by_id(report, "l21_l2inf_duality"), "duality", 50)
    sob = _by_id(report, "l42_sobolev")
    _all_pass(v, sob, "sobolev", 10)
    v.clause("sobolev constant", all(c.params["constant"] == 14.0 for c in sob))
    v.note(f"ineq_fund {trials} trials")
    v.emit(capsys)


# -- 5. Poisson and Wente ---------------------------------------------------------------------
def test_criterion_5_poisson(capsys):
    report, _ = _run("poisson-wente")
    v = Verdict(5, "Poisson/Wente suite")
    _budget(v, ("poisson-wente",), 120.0)
    shell = _by_id(report, "elementary_gradient_estimate")
    _all_pass(v, shell, "shell bound")
    v.clause("shell constant", all(c.params["inverse_zero"] == pytest.approx(1.0 / 3.8317059702,
                                                                               rel=1e-10)
                                   for c in shell))
    grad = _by_id(report, "lemma:dyadic_gradient")
    _all_pass(v, grad, "weighted gradient", 30)
    v.clause("Gamma1", all(abs(c.params["constant"] - 6.1824966) <= 1e-6 for c in grad))
    _all_pass(v, _by_id(report, "lemmae3"), "decay cores")
    it = _by_id(report, "dyadic_main_theorem2")
    _all_pass(v, it, "iteration")
    v.clause("iteration 20%", all(c.lhs <= 0.2 and c.rhs == 0.2 for c in it))
    v.note("iteration drift " + ", ".join(f"{c.lhs:.3f}" for c in it))
    v.emit(capsys)


# -- 6. Whitney -------------------------------------------------------------------------------
def _whitney_verdict() -> Verdict:
    report, _ = _run("whitney")
    v = Verdict(6, "Whitney suite")
    _budget(v, ("whitney",), 120.0)
    lines = _by_id(report, "whitney_extension_dim4")
    _all_pass(v, lines, "extension lines", 240)
    per_line = collections.Counter(c.params["line"] for c in lines)
    v.clause("eight lines x 30 fields", len(per_line) == 8 and min(per_line.values()) >= 30)
    v.clause("2a < b", all(2.0 * c.params["a"] < c.params["b"] for c in lines))
    equiv = _by_id(report, "whitney_extension_dim4_equiv_norms")
    _all_pass(v, equiv, "norm equivalence", 30)
    v.clause("Gamma_W", all(abs(c.rhs - 98705.182) <= 0.01 for c in equiv))
    pw = _by_id(report, "dyadic_poincare_wirtinger")
    v.clause("PW dims", {c.params["d"] for c in pw} == set(range(3, 11)))
    for c in pw:
        if c.margin <= 0:
            v.clause("PW", False, f"d={c.params['d']} n={c.params['n']} margin {c.margin:.3g}")
    return v


def test_clause_6_extension_lines_and_norms():
    v = _whitney_verdict()
    assert [f for f in v.failures if not f.startswith("PW ")] == []


def test_clause_6_poincare_wirtinger_low_dims():
    report, _ = _run("whitney")
    pw = [c for c in _by_id(report, "dyadic_poincare_wirtinger") if c.params["d"] <= 6]
    assert pw and all(c.passed and c.margin > 0 for c in pw)


@pytest.mark.xfail(strict=True, reason="4/(d-2)^2 exceeds the n=1 Neumann eigenvalue for d>=7")
def test_criterion_6_whitney(capsys):
    _whitney_verdict().emit(capsys)


# -- 7. Rellich -------------------------------------------------------------------------------
def _rellich_verdict() -> Verdict:
    report, _ = _run("rellich")
    v = Verdict(7, "Rellich suite")
    _budget(v, ("rellich",), 60.0)
    k2 = math.pi ** 2 / 2500.0
    (a_chk,) = _by_id(report, "th:bound_biharmonic0")
    minima = {int(n): m for n, m in a_chk.params["minima"].items()}
    v.clause("A setting", a_chk.params["L"] == 50.0 and a_chk.params["size"] == 40)
    v.clause("A formula", a_chk.rhs >= 0 and a_chk.lhs == pytest.approx((4.0 + k2) * k2,
                                                                         rel=1e-14))
    v.clause("A modes", set(minima) >= set(range(11)))
    for n in range(11):
        v.clause(f"A n={n}", minima[n] - a_chk.lhs > 0, f"{minima[n]:.6g} < {a_chk.lhs:.6g}")
    (b_chk,) = _by_id(report, "th:bound_biharmonic1")
    v.clause("B", b_chk.passed and b_chk.margin > 0,
             f"n={b_chk.params['worst_mode']} min {b_chk.rhs:.6f} < bound {b_chk.lhs:.6f}")
    c_chk = _by_id(report, "th:bound_biharmonic2")
    v.clause("C betas", sorted(c.params["beta"] for c in c_chk) == [0.5, 1.0, 2.0])
    for c in c_chk:
        v.clause(f"C beta={c.params['beta']}", c.passed and c.rhs > 0
                 and c.params["relative_change"] <= c.params["tol"])
    v.note(f"A margin {a_chk.margin:.3e}")
    return v


def test_clause_7_a_bound_and_c_beta():
    v = _rellich_verdict()
    assert [f for f in v.failures if not f.startswith("B ")] == []


@pytest.mark.xfail(strict=True, reason="the second Rellich bound fails at n=1 for L=50")
def test_criterion_7_rellich(capsys):
    _rellich_verdict().emit(capsys)


# -- 8. variational -----------------------------------------------------------------------------
def test_criterion_8_variational(capsys):
    poh, _ = _run("pohozaev")
    sv, _ = _run("second-variation")
    v = Verdict(8, "variational suite")
    _budget(v, ("pohozaev", "second-variation"), 120.0)
    flux = _by_id(poh, "pohozaev_flux")
    _all_pass(v, flux, "flux")
    for c in flux:
        target = c.params["target"]
        v.clause("flux 9 pi^2", target == pytest.approx(9.0 * math.pi ** 2, rel=1e-12))
        v.clause("flux constancy", all(abs(q - target) <= 1e-7 * target
                                       for q in c.params["values"]))
    ident = _by_id(poh, "pohozaev_identity")
    _all_pass(v, ident, "identity")
    v.clause("identity tol", all(c.rhs <= 1e-6 for c in ident))
    fd = _by_id(sv, "der2_biharmonique")
    _all_pass(v, fd, "Q vs FD", 10)
    v.clause("Q vs FD tol", all(c.params["tol"] <= 1e-4 and c.params["mode"] == "relative"
                                for c in fd))
    const = _by_id(sv, "der2_biharmonique0")
    _all_pass(v, const, "constant u")
    worst = max(abs(c.params["value"] - c.params["target"]) / abs(c.params["target"]) for c in fd)
    v.note(f"Q vs FD worst {worst:.1e}")
    v.emit(capsys)
