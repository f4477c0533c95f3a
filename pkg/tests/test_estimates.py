import math

import numpy as np
import pytest

from nonlinpot import estimates as est
from nonlinpot.core import AtomicMeasure, Ball, DomainError, GridDensity
from nonlinpot.estimates import Sample, Verdict, make_report


def unit_ball_density(cells=12, n=3, value=1.0):
    return GridDensity.on_ball(value, Ball(np.zeros(n), 1.0), cells)


# --- branch tables -------------------------------------------------------------


@pytest.mark.parametrize("n,sigma,s,expected", [
    (3, 3.0, 1.0, "ub1"),
    (3, 2.0, 1.0, "ub2"),    # s = 3*2/(2*3) = 1 exactly
    (4, 1.0, 1.0, "ub2"),    # sigma = 2/(n-2) = 1, s = 4/4
    (5, 1.0, 0.5, "ub1"),
])
def test_thm41_branch_table(n, sigma, s, expected):
    assert est.thm41_branch(n, sigma, s) == expected


@pytest.mark.parametrize("n,sigma,s", [(3, 1.5, 0.5), (3, 3.0, 2.0), (2, 3.0, 0.5)])
def test_thm41_branch_rejects(n, sigma, s):
    with pytest.raises(DomainError):
        est.thm41_branch(n, sigma, s)


def test_cor41_branch_table():
    assert est.cor41_branch(3, 2.0) == "crit"
    assert est.cor41_branch(3, 2.5) == "super"
    assert est.cor41_branch(4, 1.0) == "crit"
    with pytest.raises(DomainError, match="2/\\(n-2\\)"):
        est.cor41_branch(3, 1.0)


def test_thm42_parts_table():
    assert est.thm42_parts(3, 1.0, 2.0) == ["lower", "upper"]
    assert est.thm42_parts(3, 1.0, 1.5) == ["lower", "phi"]
    # exactly on p = 2 - alpha/n neither strict inequality holds unless alpha p < n
    assert est.thm42_parts(3, 1.5, 1.5) == ["lower", "phi"]
    with pytest.raises(DomainError):
        est.thm42_parts(3, 2.0, 2.0)


def test_thm43_branch_table():
    assert est.thm43_branch(3, 1.0, 1.5) == "a"
    assert est.thm43_branch(3, 1.0, 5.0 / 3.0) == "b"
    with pytest.raises(DomainError):
        est.thm43_branch(3, 1.0, 2.0)


@pytest.mark.parametrize("alpha,p,s,expected", [
    (1.0, 2.0, 1.0, "est1"),
    (1.0, 1.5, 1.0, "est2"),
    (1.0, 2.0, 1.5, "est3"),
    (1.0, 1.5, 2.0, "est4"),
    (1.0, 2.0, 0.5, "est2"),   # s < 1 leaves only the L-infinity form
])
def test_thm44_branch_table(alpha, p, s, expected):
    assert est.thm44_branch(3, alpha, p, s) == expected


def test_thm44_explicit_branch_must_apply():
    f = unit_ball_density(8)
    with pytest.raises(DomainError, match="est1 does not apply"):
        est.verify_thm44(f, 1.0, 1.5, 1.0, branch="est1", count=2)


# --- report logic ----------------------------------------------------------------


def test_report_fits_largest_ratio():
    r = make_report("X", [Sample("a", 1.0, 2.0), Sample("b", 3.0, 2.0)])
    assert r.fitted_C == 1.5 and r.min_ratio == 0.5
    assert r.verdict is Verdict.CONSISTENT


def test_report_zero_measure_is_inconclusive():
    r = make_report("X", [Sample("a", 0.0, 0.0), Sample("b", 0.0, 0.0)])
    assert r.verdict is Verdict.INCONCLUSIVE


def test_report_reference_constant_violation():
    r = make_report("X", [Sample("a", 5.0, 1.0, 0.1)], reference_C=4.0)
    assert r.verdict is Verdict.VIOLATED
    # within the error bar it stays consistent
    r = make_report("X", [Sample("a", 4.05, 1.0, 0.1)], reference_C=4.0)
    assert r.verdict is Verdict.CONSISTENT


def test_report_positive_against_zero_rhs():
    assert make_report("X", [Sample("a", 1.0, 0.0)]).verdict is Verdict.VIOLATED


def test_report_json_encodes_infinities():
    d = make_report("X", [Sample("a", math.inf, math.inf)]).to_dict()
    assert d["samples"][0]["lhs"] == "inf"


# --- Newtonian potential of a ball against closed forms ---------------------------


def test_ball_newtonian_closed_forms():
    # int_{B_R} |x-y|^-1 dy = 2 pi R^2 - 2 pi d^2 / 3 inside, |B_R| / d outside
    for R in (0.5, 2.0):
        for d in (0.0, 0.4 * R):
            exact = 2 * math.pi * R**2 - 2 * math.pi * d**2 / 3
            v = est.ball_newtonian([0, 0, 0], R, [d, 0, 0], cells=32)
            assert v.value == pytest.approx(exact, rel=5e-3)
        v = est.ball_newtonian([1, 0, 0], R, [1 + 2.5 * R, 0, 0], cells=32)
        assert v.value == pytest.approx(4 * math.pi / 3 * R**3 / (2.5 * R), rel=5e-3)


def test_lemma42_ratio_scale_invariant():
    pts = lambda R: np.array([[0, 0, 0], [0.5 * R, 0, 0], [3 * R, 0, 0]])
    r1 = est.verify_lemma42([0, 0, 0], 1.0, pts(1.0), cells=16)
    r3 = est.verify_lemma42([0, 0, 0], 3.0, pts(3.0), cells=16)
    assert r1.fitted_C == pytest.approx(r3.fitted_C, rel=1e-10)
    # centre: 2 pi R^2 * R / R^3 = 2 pi; d = R/2: (2 pi - pi/6) * 3/2
    centre, half = (s.ratio for s in r1.samples[:2])
    assert centre == pytest.approx(2 * math.pi, rel=1e-2)
    assert half == pytest.approx(1.5 * (2 * math.pi - math.pi / 6), rel=1e-2)


# --- verifiers on small problems ------------------------------------------------


def test_thm41_scaling_invariance_of_fitted_constant():
    f = unit_ball_density(10)
    a = est.verify_thm41(f, 3.0, 1.0, probes=4)
    b = est.verify_thm41(f.scaled(7.0), 3.0, 1.0, probes=4)
    assert a.verdict is Verdict.CONSISTENT
    assert a.fitted_C == pytest.approx(b.fitted_C, rel=1e-9)
    assert a.params["homogeneity_lhs_rel_error"] < 1e-12


def test_cor41_substitution_gives_same_ratio():
    g = GridDensity.on_ball(1.0, Ball(np.array([0.5, 0, 0]), 0.5), 10)
    r = est.verify_cor41(g, 2.5, probes=4)
    assert r.params["substitution_ratio_rel_diff"] < 1e-9


def test_zero_density_is_inconclusive():
    f = unit_ball_density(8, value=0.0)
    assert est.verify_thm41(f, 3.0, 1.0, probes=2).verdict is Verdict.INCONCLUSIVE


def test_thm42_lower_bound_holds_for_dirac():
    mu = AtomicMeasure.dirac(np.zeros(3))
    reports = est.verify_thm42(mu, 1.0, 2.0, probes=[[0.5, 0, 0], [1.5, 0, 0]], grid=24)
    ids = [r.estimate_id for r in reports]
    assert ids == ["Thm42_lower", "Thm42_upper"]
    assert all(r.verdict is Verdict.CONSISTENT for r in reports)


def test_thm43_hypothesis_failure_is_inconclusive():
    mu = AtomicMeasure([[0.3, 0, 0]], [1.0])
    r = est.verify_thm43(mu, 1.0, 1.5, K=1e-6, probes=[[0.0, 0.0, 0.0]], grid=16)
    assert r.verdict is Verdict.INCONCLUSIVE
    assert any("hypothesis" in n for n in r.notes)


def test_thm44_rhs_forms_agree_when_maximal_equals_sup():
    # for constant f the maximal function equals the sup norm, so the two forms coincide
    f = GridDensity([-1, -1, -1], [1, 1, 1], np.full((6, 6, 6), 2.5))
    mf = est.maximal(f, [0, 0, 0])
    assert mf == pytest.approx(f.norm(math.inf), rel=1e-12)
    fs, finf = f.norm(1.0), f.norm(math.inf)
    a = est._thm44_rhs("est1", 3, 1.0, 2.0, 1.0, mf, fs, finf)
    b = est._thm44_rhs("est2", 3, 1.0, 2.0, 1.0, mf, fs, finf)
    assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("alpha,p,s", [(1.0, 1.5, 1.0), (0.5, 2.5, 1.5), (1.0, 2.0, 0.5)])
def test_thm44_subcritical_rhs_has_degree_one_over_p_minus_one(alpha, p, s):
    f = GridDensity.on_ball(lambda x: 1 + x[..., 0] ** 2, Ball(np.zeros(3), 1.0), 8)
    t = 3.7
    args = lambda g: (g.norm(s), g.norm(math.inf))
    r1 = est._thm44_rhs("est2", 3, alpha, p, s, 0.0, *args(f))
    rt = est._thm44_rhs("est2", 3, alpha, p, s, 0.0, *args(f.scaled(t)))
    assert rt == pytest.approx(t ** (1 / (p - 1)) * r1, rel=1e-12)
