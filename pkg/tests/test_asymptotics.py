import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from nonlinpot import asymptotics as asy
from nonlinpot.asymptotics import Flavor, Region
from nonlinpot.core import DomainError


def test_critical_sigma_values():
    assert asy.critical_sigma(4.0, 3) == pytest.approx(2.75, rel=1e-15)
    assert asy.critical_sigma(2.0, 4) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(DomainError):
        asy.critical_sigma(1.0, 2)


@pytest.mark.parametrize("lam,sigma,n,region", [
    (2.0, 1.0, 3, Region.A),
    (3.0, 3.0, 3, Region.A),     # lambda on the corner n/(n-2) stays in A
    (4.0, 1.0, 3, Region.B),
    (4.0, 3.0, 3, Region.C),
    (4.0, 2.75, 3, Region.D),
    (3.0, 1.5, 4, Region.B),
    (3.0, 3.0, 4, Region.C),
])
def test_region_hand_cases(lam, sigma, n, region):
    assert asy.classify_region(lam, sigma, n) is region


def test_region_rejects_sigma_above_lambda():
    with pytest.raises(DomainError, match="sigma <= lambda"):
        asy.classify_region(1.0, 2.0, 3)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 20.0), st.floats(0.0, 1.0), st.integers(3, 8))
def test_regions_partition_the_quadrant(lam, frac, n):
    sigma = frac * lam
    hits = [r for r, ok in asy.region_memberships(lam, sigma, n).items() if ok]
    assert len(hits) == 1


def test_pointwise_bounds_by_region():
    b = asy.pointwise_bounds(4.0, 1.0, 3)
    assert b.u.flavor is Flavor.LITTLE_O and b.u.exponent == pytest.approx(4.0 / 3.0)
    assert b.v.exponent == 1.0
    c = asy.pointwise_bounds(4.0, 3.0, 3)
    assert c.u is None and "no pointwise bound" in c.notes[0]


def test_thm37_hand_cases():
    # sigma < 2/(n-2) and delta = 4 > 3 lands in the second case with exponent 4/3
    b = asy.bounds_thm37(4.0, 1.0, 3)
    assert b.case == "B2" and b.u.base_exponent == 4.0 / 3.0
    # sigma = 0 with no weight: u picks the larger of 1 and (n-2)^2 lambda/n
    b = asy.bounds_thm37(4.0, 0.0, 3)
    assert b.case == "A1" and b.u.exponent == pytest.approx(4.0 / 3.0)
    b = asy.bounds_thm37(2.0, 0.5, 3)
    assert b.case == "B1" and b.u.exponent == 1.0 and b.u.flavor is Flavor.BIG_O
    with pytest.raises(DomainError, match="critical curve"):
        asy.bounds_thm37(4.0, 2.75, 3)


def test_thm36_hand_case():
    b = asy.bounds_thm36(4.0, 1.0, 3)
    assert b.case == "B" and b.u.at == "inf"
    assert b.u.exponent == pytest.approx(10.0 / 3.0)
    assert b.v.exponent == 2.0


def test_kelvin_descriptor_shifts_exponent():
    d = asy.BoundDescriptor(3.0, 1.0, Flavor.LITTLE_O)
    k = asy.kelvin_descriptor(d, 5)
    assert (k.base_exponent, k.log_power, k.at) == (0.0, 1.0, "inf")


def test_dominant_prefers_faster_growth():
    a, b = asy.BoundDescriptor(1.0), asy.BoundDescriptor(1.0, 0.5, Flavor.LITTLE_O)
    assert asy.dominant(a, b) is b
    assert asy.dominant(a, asy.BoundDescriptor(1.0, flavor=Flavor.LITTLE_O)) is a


def test_moser_ledger_against_hand_computation():
    # epsilon = 1/16 is the first admissible value; C2 = (4/3)(s + 3/4 - 2.2 (3 - s)), s = 2 - 1/16
    t = asy.moser_ledger(3, 4.0, 2.2)
    s = 2 - 1 / 16
    assert t.epsilon == 1 / 16
    assert t.C1 == pytest.approx(s * 4 * 3.2 / 3, rel=1e-14)
    assert t.C0 == pytest.approx(4 / 3 * (s + 0.75 - 2.2 * (3 - s)), rel=1e-12)
    assert t.terminated and len(t.steps) <= t.step_limit
    # every finite step gains at least C0
    assert all(st_.gain >= t.C0 - 1e-12 for st_ in t.steps)


def test_moser_rejects_outside_range():
    with pytest.raises(DomainError):
        asy.moser_ledger(3, 4.0, 1.0)
    with pytest.raises(DomainError, match="critical curve"):
        asy.moser_ledger(3, 4.0, 3.0)


def test_region_sweep_shape():
    rows = asy.region_sweep(3, 6.0, 20)
    assert len(rows) == 20 * 21 // 2
    assert {r[2] for r in rows} <= {"A", "B", "C", "D"}


def test_kelvin_of_fundamental_solution_is_constant():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(20, 4))
    u = np.linalg.norm(x, axis=1) ** (2 - 4)
    _, U = asy.kelvin(x, u)
    assert np.allclose(U, 1.0, rtol=1e-13)


finite = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(finite, finite, finite, finite), min_size=1, max_size=8))
def test_kelvin_is_an_involution(rows):
    x = np.array([r[:3] for r in rows])
    assume(np.all(np.linalg.norm(x, axis=1) > 1e-3))
    u = np.array([r[3] for r in rows])
    y, U = asy.kelvin(x, u)
    x2, u2 = asy.kelvin(y, U)
    assert np.allclose(x2, x, rtol=1e-12, atol=1e-12)
    assert np.allclose(u2, u, rtol=1e-12, atol=1e-12)
