import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlinpot import repr_formula as rf
from nonlinpot.constructor import Trend
from nonlinpot.core import AtomicMeasure, Ball, DomainError, GridDensity, gamma_kernel, omega
from nonlinpot.estimates import Verdict
from nonlinpot.repr_formula import Decomposition, HarmonicPoly

Q = np.array([[1.0, 0.2, 0.0], [0.2, -0.5, 0.0], [0.0, 0.0, -0.5]])


def sample_decomposition(m=2.0):
    atoms = AtomicMeasure([[0.4, 0, 0], [0, -0.5, 0.1]], [0.3, 0.7])
    h = HarmonicPoly(1.5, [0.2, -0.1, 0.3], Q, 3)
    return Decomposition(m, atoms, h, 0.25, 3)


def test_harmonic_poly_validation():
    with pytest.raises(DomainError, match="trace-free"):
        HarmonicPoly(0.0, None, np.eye(3), 3)
    with pytest.raises(DomainError, match="symmetric"):
        HarmonicPoly(0.0, None, np.array([[0, 1.0, 0], [0, 0, 0], [0, 0, 0]]), 3)


def test_compose_matches_hand_sum():
    d = sample_decomposition()
    x = np.array([0.05, 0.02, -0.1])
    r = np.linalg.norm(x)
    atoms = sum(m / np.linalg.norm(x - p) for p, m in [([0.4, 0, 0], 0.3), ([0, -0.5, 0.1], 0.7)])
    h = 1.5 + x @ np.array([0.2, -0.1, 0.3]) + x @ Q @ x
    assert d(x) == pytest.approx(2.0 / r + omega(3) * atoms + h, rel=1e-14)


def test_compose_domain():
    d = sample_decomposition()
    with pytest.raises(DomainError):
        d([0.0, 0.0, 0.0])
    with pytest.raises(DomainError, match="outside"):
        d([0.3, 0.0, 0.0])


def test_gamma_potential_of_uniform_ball():
    g = GridDensity.on_ball(1.0, Ball(np.zeros(3), 1.0), 32)
    assert rf.gamma_potential(g, [0, 0, 0]) == pytest.approx(2 * math.pi, rel=5e-3)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("m", [0.0, 0.5, 3.0])
def test_point_mass_recovered(n, m):
    atoms = AtomicMeasure(np.eye(n)[:2] * 0.5, [0.4, 0.2])
    lin = np.zeros(n)
    lin[0] = 0.7
    d = Decomposition(m, atoms, HarmonicPoly(1.0, lin, None, n), 0.25, n)
    fit = rf.estimate_point_mass(d, n)
    assert fit.verdict is Verdict.CONSISTENT
    assert fit.m == pytest.approx(m, abs=1e-3 * max(1.0, m))


def test_point_mass_rejects_short_ladder():
    with pytest.raises(DomainError):
        rf.estimate_point_mass(lambda x: 1.0, 3, ladder=[0.1, 0.01])


def test_superharmonic_verdicts():
    pts = np.array([[0.1, 0.05, 0.0], [0.0, 0.2, -0.1]])
    assert rf.superharmonic_check(sample_decomposition(), pts, 1e-3).verdict is Verdict.CONSISTENT
    bowl = lambda x: float(np.dot(x, x))
    rep = rf.superharmonic_check(bowl, pts, 1e-3)
    assert rep.verdict is Verdict.VIOLATED
    assert rep.max_laplacian == pytest.approx(6.0, rel=1e-6)
    assert rf.superharmonic_check(lambda x: -bowl(x), pts, 1e-3).verdict is Verdict.CONSISTENT


def test_harmonic_bound_verdicts():
    assert rf.harmonic_bound_verdict(sample_decomposition(), 3).verdict is Trend.BOUNDED
    steep = lambda x: float(np.linalg.norm(x)) ** -2
    assert rf.harmonic_bound_verdict(steep, 3).verdict is Trend.DIVERGES
    # planar: log^2 outgrows log(2/r)
    sq = lambda x: math.log(2 / np.linalg.norm(x)) ** 2
    assert rf.harmonic_bound_verdict(sq, 2, factor=1.5).verdict is Trend.DIVERGES


def test_json_round_trip():
    d = sample_decomposition()
    back = Decomposition.from_dict(d.to_dict())
    assert back.to_dict() == d.to_dict()
    x = [0.1, -0.05, 0.02]
    assert back(x) == d(x)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_sum_is_linear(m1, m2, a, b):
    d1 = sample_decomposition(m1)
    d2 = Decomposition(m2, AtomicMeasure([[0.6, 0.1, 0]], [1.0]),
                       HarmonicPoly(-0.3, [0, 1.0, 0], -Q, 3), 0.2, 3)
    x = np.array([a, b, 0.05])
    if np.linalg.norm(x) >= 0.2:
        x *= 0.19 / np.linalg.norm(x)
    total = d1 + d2
    assert total.m == m1 + m2 and total.epsilon == 0.2
    assert total(x) == pytest.approx(d1(x) + d2(x), rel=1e-12)


def test_gamma_kernel_used_in_fit_is_fundamental():
    # the fit divides by gamma_kernel; an exact multiple of it returns that multiple
    for n in (2, 3, 5):
        fit = rf.estimate_point_mass(lambda x, n=n: 4.0 * gamma_kernel(np.linalg.norm(x), n), n)
        assert fit.m == pytest.approx(4.0, rel=1e-9)
