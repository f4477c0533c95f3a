import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nonlinpot import constructor as con
from nonlinpot.constructor import GrowthMinorant, SeedSequence, Trend
from nonlinpot.core import DomainError


def test_make_xseq_geometric_norms():
    pts = con.make_xseq(0.2, 0.2, 6)
    assert np.allclose(np.linalg.norm(pts, axis=1), 5.0 ** -np.arange(1, 7), rtol=1e-15)
    # partial sums of phi(r) = r stay below the full series 1/4
    assert np.sum(np.linalg.norm(pts, axis=1)) < 0.25
    assert 0.25 - np.sum(np.linalg.norm(pts, axis=1)) < 5.0**-6


@pytest.mark.parametrize("ratio,first", [(0.25, 0.2), (0.0, 0.2), (0.2, 0.5)])
def test_make_xseq_rejects_boundary(ratio, first):
    with pytest.raises(DomainError):
        con.make_xseq(ratio, first, 4)


def test_seed_validation_messages():
    pts = con.make_xseq(0.2, 0.2, 3)
    norms = np.linalg.norm(pts, axis=1)
    with pytest.raises(DomainError, match="r_j <= \\|x_j\\|/2"):
        SeedSequence(pts, np.log(0.6 * norms), norms)
    with pytest.raises(DomainError, match="4\\|x_\\(j\\+1\\)\\|"):
        SeedSequence(pts[::-1], np.log(0.5 * norms[::-1]), norms[::-1])
    with pytest.raises(DomainError, match="summable"):
        SeedSequence(pts, np.log(0.5 * norms), [0.1, 0.2, 0.4])


def test_seed_json_round_trip():
    s = con.reference_seed(3, 4)
    back = SeedSequence.from_dict(s.to_dict())
    assert back.to_dict() == s.to_dict()


def test_bump_mass_against_quad():
    for n in (2, 3, 4):
        radial, _ = integrate.quad(lambda t: math.exp(1 - 1 / (1 - t * t)) * t ** (n - 1), 0, 1)
        area = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
        assert con.bump_profile(n).I == pytest.approx(area * radial, rel=1e-10)


def test_bump_self_potential_far_field_and_minimum():
    prof = con.bump_profile(3)
    # outside the support the bump looks like a point mass
    assert prof.self_potential(2.0)[0] == pytest.approx(prof.I / 2.0, rel=1e-12)
    # J is the minimum over the support, attained at the boundary for a radial bump
    assert prof.J == pytest.approx(prof.self_potential(1.0)[0], rel=1e-12)
    assert prof.J <= prof.self_potential(0.0)[0]


def test_solution_density_and_mass():
    sol = con.lemma41_build(con.reference_seed(3, 4))
    sd = sol.seed
    caps = np.exp(sol.log_caps)
    assert np.allclose(sol.density(sd.points), caps, rtol=1e-14)
    assert np.allclose(caps, sd.phi_values / sd.radii**3, rtol=1e-12)
    assert sol.total_mass() == pytest.approx(sol.bump.I * sd.phi_values.sum(), rel=1e-15)


def test_reference_seed_passes_all_checks():
    check = con.check_lemma41(con.lemma41_build(con.reference_seed(3, 5)), samples=200)
    assert check.passed, check.details


def test_scaled_local_inverts_laplacian():
    sol = con.lemma41_build(con.reference_seed(3, 4))
    xi = np.array([0.3, 0.1, -0.2])
    h = 1e-3
    acc = 0.0
    f0 = sol.scaled_local(1, xi)[0]
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        acc += sol.scaled_local(1, xi + e)[0] + sol.scaled_local(1, xi - e)[0] - 2 * f0
    rho = np.linalg.norm(xi)
    assert -acc / h**2 == pytest.approx(math.exp(1 - 1 / (1 - rho**2)), rel=1e-4)


def test_thm33_keeps_indices_from_four():
    # r_j = (2|x_j|)^(4/3) <= |x_j|/2 with |x_j| = 5^-j  <=>  2^(7/3) <= 5^(j/3)
    first = next(j for j in range(1, 20) if 2 ** (7 / 3) <= 5 ** (j / 3))
    seed = con.schedule_thm33(4.0, 3, count=8)
    assert first == 4
    assert seed.indices[0] == first and seed.dropped == first - 1


def test_thm62_drop_matches_direct_scan():
    h = lambda t: t * t / 2
    seed = con.schedule_thm62(h, count=6)
    norms = 5.0 ** -np.arange(1, 7)
    ok = [-h(math.log(2 / x)) / 2 <= math.log(x / 2) for x in norms]
    first = ok.index(True) + 1
    assert all(ok[first - 1:])
    assert seed.indices[0] == first


def test_thm34_exponents_and_identity():
    pair = con.schedule_thm34(4.0, 2.9, 3)
    assert pair.alpha == pytest.approx(1.0)
    assert pair.beta == pytest.approx(10.0)
    assert pair.identity_error < 1e-12
    assert pair.cross_bound_ok
    with pytest.raises(DomainError, match="critical curve"):
        con.schedule_thm34(4.0, 2.5, 3)


def test_growth_minorant_of_gaussian_growth():
    M = GrowthMinorant(lambda t: t * t, lambda t: t * t + 1.0, log_scale=True)
    for t in (0.5, 3.0, 40.0):
        assert M(t) == pytest.approx(t, rel=1e-12)


def test_growth_minorant_rejects_exponential():
    M = GrowthMinorant(lambda t: 2.0 * t, lambda t: 3.0 * t, log_scale=True)
    with pytest.raises(DomainError, match="superexponential"):
        M.threshold()


def test_blowup_bounded_against_fast_reference():
    sol = con.lemma41_build(con.reference_seed(3, 5))
    rep = con.measure_blowup(sol, lambda r: r**-50.0)
    assert rep.verdict is Trend.BOUNDED


def test_blowup_diverges_for_thm33():
    sol = con.lemma41_build(con.schedule_thm33(4.0, 3, count=9))
    rep = con.measure_blowup(sol, lambda r: r * r ** (-4.0 / 3.0))
    assert rep.verdict is Trend.DIVERGES


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(1e-3, 0.99), min_size=3, max_size=10))
def test_summable_trend_accepts_geometric_tails(head):
    tail = [head[-1] * 0.5**k for k in range(1, len(head) + 1)]
    assert con.summable_trend(head + tail)
