import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma as G
from scipy.special import k0

from nonlinpot import potentials as pot
from nonlinpot.core import AtomicMeasure, Ball, DomainError, GridDensity, RadialMeasure
from nonlinpot.potentials import Operator, PotentialSpec, evaluate

DIRAC3 = AtomicMeasure.dirac(np.zeros(3))


@pytest.fixture(scope="module")
def unit_ball_32():
    return GridDensity.on_ball(1.0, Ball(np.zeros(3), 1.0), 32)


def riesz_composition_constant(n, a, b):
    """int |x-y|^-a |y|^-b dy = C |x|^(n-a-b) for 0 < a, b < n < a + b."""
    return (math.pi ** (n / 2) * G((n - a) / 2) * G((n - b) / 2) * G((a + b - n) / 2)
            / (G(a / 2) * G(b / 2) * G(n - (a + b) / 2)))


def test_riesz_dirac_both_routes():
    for r in (0.05, 0.5, 3.0):
        exact = r ** (1 - 3) / 2
        assert pot.riesz_kernel(DIRAC3, 1.0, [0, r, 0]).value == pytest.approx(exact, rel=1e-13)
        lc = pot.riesz_layercake(DIRAC3, 1.0, [0, r, 0])
        assert abs(lc.value - exact) <= max(lc.error_estimate, 1e-3 * exact)


def test_riesz_radial_measure_matches_shell(unit_ball_32):
    # alpha = 2 in R^3 is the Newtonian kernel; exterior of a unit ball sees a point mass
    knots = np.linspace(0.005, 1.0, 800)
    mu = RadialMeasure(3, knots, 4 * math.pi / 3 * knots**3)
    v = pot.riesz_layercake(mu, 2.0, [0, 0, 2.5])
    assert v.value == pytest.approx(4 * math.pi / 3 / 2.5, rel=2e-3)


def test_riesz_grid_density_matches_shell(unit_ball_32):
    v = pot.riesz_kernel(unit_ball_32, 2.0, [0.5, 0, 0]).value
    assert v == pytest.approx(2 * math.pi * (1 - 0.25 / 3), rel=5e-3)


def test_wolff_dirac_closed_form():
    # W_{a,p} delta(x) = |x|^-(n-ap)q / ((n-ap)q), q = 1/(p-1)
    for alpha, p in [(1.0, 2.0), (0.5, 1.5), (1.0, 2.5)]:
        q = 1 / (p - 1)
        e = (3 - alpha * p) * q
        for r in (0.2, 1.0):
            assert pot.wolff(DIRAC3, alpha, p, 0.0, [r, 0, 0]).value == pytest.approx(
                r**-e / e, rel=1e-10)


def test_wolff_damping_reduces_value():
    x = [0.3, 0, 0]
    assert pot.wolff(DIRAC3, 1, 2, 1.0, x).value < pot.wolff(DIRAC3, 1, 2, 0.0, x).value


def test_bessel_closed_forms():
    for r in (0.3, 1.0, 3.0):
        assert pot.bessel(DIRAC3, 2.0, [r, 0, 0]).value == pytest.approx(
            math.exp(-r) / (4 * math.pi * r), rel=1e-12)
        assert pot.bessel(DIRAC3, 4.0, [r, 0, 0]).value == pytest.approx(
            math.exp(-r) / (8 * math.pi), rel=1e-6)
        d2 = AtomicMeasure.dirac(np.zeros(2))
        assert pot.bessel(d2, 2.0, [0, r]).value == pytest.approx(k0(r) / (2 * math.pi), rel=1e-6)


def riesz_normaliser(alpha, n=3):
    # normalised Riesz kernel = this * |x|^(alpha-n); riesz_kernel carries 1/(n-alpha)
    return (n - alpha) * G((n - alpha) / 2) / (2**alpha * math.pi ** (n / 2) * G(alpha / 2))


def test_bessel_dominated_by_normalised_riesz():
    x = [0.4, 0.1, 0]
    for alpha in (0.5, 1.0, 2.0):
        bound = pot.riesz_kernel(DIRAC3, alpha, x).value * riesz_normaliser(alpha)
        assert pot.bessel(DIRAC3, alpha, x).value <= bound


def test_havin_mazya_dirac_against_riesz_composition():
    n, alpha, p = 3, 1.0, 2.0
    q = 1 / (p - 1)
    a, b = n - alpha, (n - alpha) * q
    C = riesz_composition_constant(n, a, b)
    for r in (0.5, 2.0):
        exact = (n - alpha) ** (-1 - q) * C * r ** (n - a - b)
        v = pot.havin_mazya(DIRAC3, alpha, p, [r, 0, 0], 48)
        assert v.value == pytest.approx(exact, rel=0.03)
        assert abs(v.value - exact) <= v.error_estimate


def test_newtonian_ball_shell(unit_ball_32):
    assert pot.newtonian_ball(unit_ball_32, [0, 0, 0]).value == pytest.approx(2 * math.pi, rel=5e-3)
    with pytest.raises(DomainError):
        pot.newtonian_ball(unit_ball_32, [0, 0, 1.5])


def test_truncated_newtonian_cuts_support(unit_ball_32):
    # truncating at R = 0.5 about 0 leaves the ball of radius 0.5
    v = pot.truncated_newtonian(unit_ball_32, 0.5, [0, 0, 0]).value
    assert v == pytest.approx(2 * math.pi * 0.25, rel=2e-2)


def test_composite_radial_oracle(unit_ball_32):
    # N(N 1) at 0 = 4 pi int_0^1 2 pi (1 - s^2/3) s ds = 10 pi^2 / 3
    assert pot.composite_NN(unit_ball_32, 1.0, [0, 0, 0]).value == pytest.approx(
        10 * math.pi**2 / 3, rel=3e-3)
    # sigma = 0 gives N 1
    assert pot.composite_NN(unit_ball_32, 0.0, [0, 0, 0]).value == pytest.approx(
        2 * math.pi, rel=5e-3)


def test_wolff_sigma_oracle(unit_ball_32):
    exact = 16 * math.pi**2 / 9 * (1 / 6 + math.log(3))
    assert pot.wolff_sigma(unit_ball_32, 2.0, [0, 0, 0]).value == pytest.approx(exact, rel=5e-3)
    with pytest.raises(DomainError):
        pot.wolff_sigma(unit_ball_32, 1.0, [0, 0, 0])


def test_maximal_function_constant_density(unit_ball_32):
    assert pot.maximal(unit_ball_32, [0, 0, 0]) == pytest.approx(1.0, rel=1e-12)
    # a point outside the support still sees an average below 1
    assert 0 < pot.maximal(unit_ball_32, [1.5, 0, 0]) < 1


def test_spec_validation_names_constraint():
    with pytest.raises(DomainError, match="alpha"):
        PotentialSpec(Operator.RIESZ_KERNEL, alpha=3.5).validate(3)
    with pytest.raises(DomainError, match="alpha\\*p"):
        PotentialSpec(Operator.HAVIN_MAZYA, alpha=1.5, p=2.0).validate(3)
    with pytest.raises(DomainError):
        PotentialSpec(Operator.WOLFF, quad_rings=4)
    with pytest.raises(ValueError):
        PotentialSpec("Nonsense")


def test_spec_round_trip_and_dispatch():
    spec = PotentialSpec(Operator.WOLFF, alpha=1.0, p=2.0)
    assert PotentialSpec.from_dict(spec.to_dict()) == spec
    v = evaluate(spec, DIRAC3, [1.0, 0, 0]).value
    assert v == pytest.approx(1.0, rel=1e-10)
    with pytest.raises(DomainError, match="grid density"):
        evaluate(PotentialSpec(Operator.NEWTONIAN_BALL), DIRAC3, [0.5, 0, 0])


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.2, 2.5), st.floats(1.2, 3.0))
def test_wolff_homogeneity(t, alpha, p):
    if alpha * p >= 3:
        alpha = 2.9 / p
    mu = AtomicMeasure([[0, 0, 0], [0.5, 0.2, 0]], [1.0, 0.3])
    x = [0.3, -0.2, 0.1]
    a = pot.wolff(mu, alpha, p, 1.0, x).value
    b = pot.wolff(mu.scaled(t), alpha, p, 1.0, x).value
    assert b == pytest.approx(t ** (1 / (p - 1)) * a, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_riesz_monotone_in_measure(extra, r):
    # adding mass never lowers a positive-kernel potential
    base = AtomicMeasure([[0, 0, 0]], [1.0])
    more = AtomicMeasure([[0, 0, 0], [r, 0, 0]], [1.0, extra])
    x = [0, 0.7, 0]
    assert pot.riesz_layercake(more, 1.0, x).value >= pot.riesz_layercake(base, 1.0, x).value
