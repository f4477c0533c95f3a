import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlinpot.core import (AtomicMeasure, Ball, DomainError, GridDensity, RadialMeasure,
                            ball_mass, ball_volume, gamma_kernel, lens_fraction,
                            measure_from_dict, omega, scale_measure, sphere_area, total_mass)


def test_sphere_and_ball_constants():
    assert sphere_area(2) == pytest.approx(2 * math.pi, rel=1e-14)
    assert sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-14)
    assert ball_volume(3, 2.0) == pytest.approx(32 * math.pi / 3, rel=1e-14)
    assert ball_volume(4) == pytest.approx(math.pi**2 / 2, rel=1e-14)


def test_omega_makes_fundamental_solution():
    # flux of -grad(omega Gamma) through any sphere is 1
    for n in (3, 4, 5):
        r = 0.7
        flux = omega(n) * (n - 2) * r ** (1 - n) * sphere_area(n) * r ** (n - 1)
        assert flux == pytest.approx(1.0, rel=1e-14)
    assert omega(2) * sphere_area(2) == pytest.approx(1.0)


def test_gamma_kernel_values_and_domain():
    assert gamma_kernel(2.0, 3) == 0.5
    assert gamma_kernel(1.0, 2) == pytest.approx(math.log(2))
    with pytest.raises(DomainError):
        gamma_kernel(0.0, 3)
    with pytest.raises(DomainError):
        gamma_kernel(1.0, 1)


def test_atomic_ball_mass_exact():
    mu = AtomicMeasure([[0, 0, 0], [1, 0, 0], [0, 3, 0]], [1.0, 2.0, 4.0])
    assert ball_mass(mu, [0, 0, 0], 0.5) == 1.0
    assert ball_mass(mu, [0, 0, 0], 1.5) == 3.0
    assert ball_mass(mu, [0, 0, 0], 10) == 7.0
    assert total_mass(mu) == 7.0


def test_atomic_rejects_bad_input():
    with pytest.raises(DomainError):
        AtomicMeasure([[0, 0]], [-1.0])
    with pytest.raises(DomainError):
        AtomicMeasure([[0, 0], [1, 1]], [1.0])
    with pytest.raises(DomainError):
        AtomicMeasure([[0.0]], [1.0])


def lens(R, r, d):
    """Volume of the intersection of two partially overlapping spheres in R^3."""
    return math.pi * (R + r - d) ** 2 * (d * d + 2 * d * r - 3 * r * r + 2 * d * R + 6 * r * R
                                         - 3 * R * R) / (12 * d)


def test_lens_fraction_against_closed_form():
    rho = 0.3
    for r, d in [(0.5, 0.6), (1.0, 1.2), (0.2, 0.25), (0.4, 0.15)]:
        got = lens_fraction(r, np.array([d]), rho, 3)[0]
        assert got == pytest.approx(lens(r, rho, d) / ball_volume(3, rho), rel=1e-10)
    assert lens_fraction(1.0, np.array([0.1]), 0.3, 3)[0] == 1.0
    assert lens_fraction(0.1, np.array([0.05]), 0.3, 3)[0] == pytest.approx((0.1 / 0.3) ** 3)
    assert lens_fraction(0.1, np.array([0.5]), 0.3, 3)[0] == 0.0


def test_grid_density_on_ball_mass():
    f = GridDensity.on_ball(1.0, Ball(np.zeros(3), 1.0), 32)
    assert f.total_mass() == pytest.approx(4 * math.pi / 3, rel=2e-3)
    # full ball around the support sees everything
    assert f.ball_mass([0, 0, 0], 2.0) == pytest.approx(f.total_mass(), rel=1e-12)
    # small centred balls follow the volume law
    assert f.ball_mass([0, 0, 0], 0.5) == pytest.approx(ball_volume(3, 0.5), rel=2e-2)


def test_grid_density_validation():
    with pytest.raises(DomainError):
        GridDensity([0, 0], [1, 1], -np.ones((2, 2)))
    with pytest.raises(DomainError):
        GridDensity([0, 0], [0, 1], np.ones((2, 2)))


def test_grid_norms():
    f = GridDensity([0, 0, 0], [1, 1, 1], np.full((4, 4, 4), 2.0))
    assert f.norm(1.0) == pytest.approx(2.0)
    assert f.norm(2.0) == pytest.approx(2.0)
    assert f.norm(math.inf) == 2.0


def test_radial_bracket_contains_true_mass():
    # uniform unit ball: mu(B_r(0)) = r^3 for r <= 1 (normalised)
    knots = np.linspace(0.01, 1.0, 400)
    mu = RadialMeasure(3, knots, knots**3)
    x = np.array([0.3, 0.0, 0.0])
    for r in (0.2, 0.5, 0.9):
        mid, half = mu.ball_mass_profile(x, np.array([r]))
        # |B_r(x) cap B_1(0)| / |B_1|
        exact = r**3 if r + 0.3 <= 1 else lens(1.0, r, 0.3) / ball_volume(3)
        assert abs(mid[0] - exact) <= half[0] + 1e-9


def test_json_round_trip_all_variants():
    mus = [
        AtomicMeasure([[0, 1], [2, 3]], [1.0, 0.5]),
        GridDensity.on_ball(lambda x: 1 + x[..., 0] ** 2, Ball(np.zeros(2), 1.0), 8),
        RadialMeasure(3, [0.5, 1.0], [0.2, 1.0]),
    ]
    for mu in mus:
        back = measure_from_dict(mu.to_dict())
        assert back.to_dict() == mu.to_dict()
        assert back.total_mass() == pytest.approx(mu.total_mass(), rel=1e-15)


def test_json_missing_field_is_named():
    with pytest.raises(DomainError, match="masses"):
        measure_from_dict({"variant": "atomic", "n": 2, "points": [[0, 0]]})
    with pytest.raises(DomainError, match="variant"):
        measure_from_dict({"variant": "blob"})


coords = st.floats(-2, 2, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(coords, coords, coords, st.floats(0, 5)), min_size=1, max_size=6),
       st.tuples(coords, coords, coords), st.floats(0.01, 3), st.floats(0.01, 3))
def test_ball_mass_monotone_in_radius(atoms, x, r1, r2):
    mu = AtomicMeasure([a[:3] for a in atoms], [a[3] for a in atoms])
    lo, hi = sorted((r1, r2))
    assert ball_mass(mu, x, lo) <= ball_mass(mu, x, hi)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100), st.tuples(coords, coords), st.floats(0.05, 2))
def test_scaling_commutes_with_ball_mass(t, x, r):
    mu = GridDensity.on_ball(lambda y: 1 + y[..., 0] ** 2, Ball(np.zeros(2), 1.0), 8)
    assert ball_mass(scale_measure(mu, t), x, r) == pytest.approx(t * ball_mass(mu, x, r),
                                                                  rel=1e-13, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.05, 2.0))
def test_grid_ball_mass_monotone(r1, r2):
    f = GridDensity.on_ball(1.0, Ball(np.zeros(3), 1.0), 8)
    lo, hi = sorted((r1, r2))
    x = [0.1, 0.2, -0.3]
    assert f.ball_mass(x, lo) <= f.ball_mass(x, hi) + 1e-15


def test_json_schema_version():
    d = AtomicMeasure([[0, 0]], [1.0]).to_dict()
    assert d["schema_version"] == 1
    del d["schema_version"]
    assert measure_from_dict(d).total_mass() == 1.0
    d["schema_version"] = 99
    with pytest.raises(DomainError, match="schema_version"):
        measure_from_dict(d)
