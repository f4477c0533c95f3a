"""Decomposition of nonnegative superharmonic functions near an isolated singularity.

    u(x) = m Gamma(|x|) + omega * int Gamma(|x - y|) d mu(y) + h(x)

with m >= 0, mu a finite measure and h harmonic.  This module composes such
functions, recovers m from point evaluations, and checks superharmonicity
and harmonic boundedness from samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constructor import Trend
from .core import (SCHEMA_VERSION, AtomicMeasure, DomainError, GridDensity, Measure,
                   as_point, check_dimension, gamma_kernel, measure_from_dict, omega, sphere_area)
from .estimates import Verdict
from .quadrature import direct_sum


# --- harmonic parts --------------------------------------------------------------


@dataclass(frozen=True)
class HarmonicPoly:
    """h(x) = c + b.x + x^T Q x with Q symmetric and trace-free."""

    constant: float = 0.0
    linear: np.ndarray | None = None
    quadratic: np.ndarray | None = None
    n: int = 3

    def __post_init__(self):
        n = check_dimension(self.n)
        b = np.zeros(n) if self.linear is None else np.asarray(self.linear, dtype=float).ravel()
        Q = np.zeros((n, n)) if self.quadratic is None else np.asarray(self.quadratic, dtype=float)
        if b.shape != (n,) or Q.shape != (n, n):
            raise DomainError("harmonic coefficients do not match the dimension")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
            raise DomainError("the quadratic part must be symmetric")
        if abs(np.trace(Q)) > 1e-12 * max(1.0, np.abs(Q).max()):
            raise DomainError("the quadratic part must be trace-free to be harmonic")
        object.__setattr__(self, "linear", b)
        object.__setattr__(self, "quadratic", Q)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        out = self.constant + x @ self.linear + np.einsum("ij,jk,ik->i", x, self.quadratic, x)
        return float(out[0]) if single else out

    def __add__(self, other: "HarmonicPoly") -> "HarmonicPoly":
        return HarmonicPoly(self.constant + other.constant, self.linear + other.linear,
                            self.quadratic + other.quadratic, self.n)

    def to_dict(self) -> dict:
        return {"constant": self.constant, "linear": self.linear.tolist(),
                "quadratic": self.quadratic.tolist(), "n": self.n}

    @classmethod
    def from_dict(cls, data: dict) -> "HarmonicPoly":
        return cls(float(data["constant"]), data["linear"], data["quadratic"], int(data["n"]))


# --- composition -------------------------------------------------------------------


def _ball_integral_gamma(n: int, rho: float) -> float:
    """int_{B_rho} Gamma(|y|) dy."""
    if n == 2:
        return 2 * math.pi * (0.5 * rho**2 * math.log(2.0 / rho) + 0.25 * rho**2)
    return sphere_area(n) * rho**2 / 2.0


def gamma_potential(mu: Measure, x) -> float:
    """int Gamma(|x - y|) d mu(y) for atomic and grid measures."""
    n = mu.n
    x = as_point(x, n)
    if mu.total_mass() == 0:
        return 0.0
    if isinstance(mu, AtomicMeasure):
        d = np.linalg.norm(mu.points - x, axis=1)
        live = mu.masses > 0
        if np.any(d[live] == 0):
            return math.inf
        return float(mu.masses[live] @ gamma_kernel(d[live], n))
    if isinstance(mu, GridDensity):
        kernel = lambda r: gamma_kernel(np.maximum(r, 1e-300), n)
        return direct_sum(mu, x, kernel, _ball_integral_gamma(n, mu.rho)).value
    raise DomainError("the Gamma-potential supports atomic and grid measures")


@dataclass(frozen=True)
class Decomposition:
    m: float
    mu: Measure | None
    harmonic: HarmonicPoly | Callable | None
    epsilon: float
    n: int

    def __post_init__(self):
        check_dimension(self.n)
        if not self.m >= 0:
            raise DomainError("the point mass m must be nonnegative")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.mu is not None:
            if self.mu.n != self.n:
                raise DomainError("measure dimension does not match n")
            if not math.isfinite(self.mu.total_mass()):
                raise DomainError("the measure must be finite")

    def __call__(self, x) -> float:
        return compose_brezis_lions(self, x)

    def __add__(self, other: "Decomposition") -> "Decomposition":
        if self.n != other.n:
            raise DomainError("dimensions differ")
        mu = _add_measures(self.mu, other.mu)
        h = _add_harmonic(self.harmonic, other.harmonic)
        return Decomposition(self.m + other.m, mu, h, min(self.epsilon, other.epsilon), self.n)

    def to_dict(self) -> dict:
        h = self.harmonic
        if h is not None and not isinstance(h, HarmonicPoly):
            raise DomainError("only polynomial harmonic parts are serialisable")
        return {"schema_version": SCHEMA_VERSION, "n": self.n, "m": self.m,
                "epsilon": self.epsilon,
                "mu": None if self.mu is None else self.mu.to_dict(),
                "harmonic": None if h is None else h.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "Decomposition":
        mu = None if data.get("mu") is None else measure_from_dict(data["mu"])
        h = None if data.get("harmonic") is None else HarmonicPoly.from_dict(data["harmonic"])
        return cls(float(data["m"]), mu, h, float(data["epsilon"]), int(data["n"]))


def _add_measures(a, b):
    if a is None or b is None:
        return a if b is None else b
    if isinstance(a, AtomicMeasure) and isinstance(b, AtomicMeasure):
        return AtomicMeasure(np.vstack([a.points, b.points]), np.concatenate([a.masses, b.masses]))
    raise DomainError("only atomic measures can be added")


def _add_harmonic(a, b):
    if a is None or b is None:
        return a if b is None else b
    if isinstance(a, HarmonicPoly) and isinstance(b, HarmonicPoly):
        return a + b
    return lambda x: a(x) + b(x)


def compose_brezis_lions(dec: Decomposition, x) -> float:
    """m Gamma(|x|) + omega int Gamma(|x-y|) d mu + h(x) for 0 < |x| < epsilon."""
    x = as_point(x, dec.n)
    r = float(np.linalg.norm(x))
    if r == 0:
        raise DomainError("the decomposition is evaluated off the origin")
    if r >= dec.epsilon:
        raise DomainError(f"|x| = {r} lies outside the ball of radius {dec.epsilon}")
    val = dec.m * gamma_kernel(r, dec.n)
    if dec.mu is not None:
        val += omega(dec.n) * gamma_potential(dec.mu, x)
    if dec.harmonic is not None:
        val += float(dec.harmonic(x))
    return float(val)


# --- recovery and verdicts -----------------------------------------------------------


def default_ladder(count: int = 13) -> np.ndarray:
    return np.geomspace(1e-1, 1e-4, count)


def _directions(n: int, k: int = 4, seed: int = 0) -> np.ndarray:
    v = np.random.default_rng(seed).standard_normal((k, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _antipodal(n: int, k: int, seed: int) -> np.ndarray:
    # +/- pairs cancel the odd (e.g. linear) part of smooth terms
    d = _directions(n, k, seed)
    return np.vstack([d, -d])


def _ladder_values(u: Callable, n: int, ladder, directions) -> np.ndarray:
    return np.array([np.mean([float(u(r * d)) for d in directions]) for r in ladder])


@dataclass
class PointMassFit:
    m: float
    slope: float
    halves: tuple
    verdict: Verdict
    ladder: list = field(default_factory=list)
    ratios: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "m": self.m, "slope": self.slope,
                "halves": list(self.halves), "verdict": self.verdict.value,
                "ladder": self.ladder, "ratios": self.ratios}


def estimate_point_mass(u: Callable, n: int, ladder=None, directions: int = 4,
                        rel_tol: float = 0.01, seed: int = 0) -> PointMassFit:
    """Fit u/Gamma = m + c/Gamma along a radius ladder; the intercept is m.

    The fit is repeated on each half of the ladder; if the two intercepts
    differ by more than ``rel_tol * max(1, |m|)`` the verdict is Inconclusive.
    """
    n = check_dimension(n)
    ladder = default_ladder() if ladder is None else np.asarray(ladder, dtype=float)
    if ladder.size < 4 or np.any(ladder <= 0):
        raise DomainError("the ladder needs at least four positive radii")
    dirs = _antipodal(n, directions, seed)
    vals = _ladder_values(u, n, ladder, dirs)
    g = gamma_kernel(ladder, n)
    ratio = vals / g
    inv = 1.0 / g

    def fit(sl):
        slope, intercept = np.polyfit(inv[sl], ratio[sl], 1)
        return float(intercept), float(slope)

    m, slope = fit(slice(None))
    half = len(ladder) // 2
    a, _ = fit(slice(0, half + 1))
    b, _ = fit(slice(half, None))
    stable = abs(a - b) <= rel_tol * max(1.0, abs(m)) and np.all(np.isfinite(ratio))
    verdict = Verdict.CONSISTENT if stable else Verdict.INCONCLUSIVE
    return PointMassFit(max(m, 0.0) if stable else m, slope, (a, b), verdict,
                        ladder.tolist(), ratio.tolist())


@dataclass
class SuperharmonicReport:
    verdict: Verdict
    max_laplacian: float
    max_excess: float
    samples: int

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "verdict": self.verdict.value,
                "max_laplacian": self.max_laplacian, "max_excess": self.max_excess,
                "samples": self.samples}


def _laplacian(u, x, h, n):
    c = float(u(x))
    acc = 0.0
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        acc += float(u(x + e)) + float(u(x - e)) - 2 * c
    return acc / (h * h), c


def superharmonic_check(u: Callable, points, h: float) -> SuperharmonicReport:
    """Discrete Laplacian <= Richardson truncation tolerance at every sample => Consistent."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[1]
    if np.any(np.linalg.norm(pts, axis=1) < 2 * h):
        raise DomainError("samples must stay at least two stencil widths from the origin")
    eps = np.finfo(float).eps
    worst_lap = -math.inf
    worst_excess = -math.inf
    for x in pts:
        fine, c = _laplacian(u, x, h, n)
        coarse, _ = _laplacian(u, x, 2 * h, n)
        tol = abs(coarse - fine) + 64 * n * eps * max(1.0, abs(c)) / h**2
        worst_lap = max(worst_lap, fine)
        worst_excess = max(worst_excess, fine - tol)
    verdict = Verdict.CONSISTENT if worst_excess <= 0 else Verdict.VIOLATED
    return SuperharmonicReport(verdict, worst_lap, worst_excess, len(pts))


@dataclass
class HarmonicBoundReport:
    verdict: Trend
    sup_ratio: float
    radii: list
    ratios: list

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "verdict": self.verdict.value,
                "sup_ratio": self.sup_ratio, "radii": self.radii, "ratios": self.ratios}


def harmonic_bound_verdict(u: Callable, n: int, ladder=None, points=None,
                           factor: float = 2.0) -> HarmonicBoundReport:
    """Ratios u/Gamma moving toward 0, on a radius ladder or at given points.

    Diverges when the ratios rise strictly over the second half of the
    sequence and the last exceeds the first by ``factor``; otherwise Bounded.
    """
    n = check_dimension(n)
    if points is None:
        ladder = default_ladder() if ladder is None else np.asarray(ladder, dtype=float)
        pts = ladder[:, None] * _directions(n, 1)[0]
    else:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
    radii = np.linalg.norm(pts, axis=1)
    order = np.argsort(-radii)
    pts, radii = pts[order], radii[order]
    ratios = np.array([float(u(p)) for p in pts]) / gamma_kernel(radii, n)
    tail = ratios[len(ratios) // 2:]
    rising = tail.size > 1 and bool(np.all(np.diff(tail) > 0))
    verdict = Trend.DIVERGES if rising and ratios[-1] >= factor * ratios[0] else Trend.BOUNDED
    return HarmonicBoundReport(verdict, float(np.max(ratios)), radii.tolist(), ratios.tolist())
