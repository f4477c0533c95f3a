"""Singular superharmonic functions built from superposed bumps.

A seed is a sequence of centres x_j shrinking geometrically to the origin,
radii r_j and weights eps_j = phi(|x_j|).  The density

    f = sum_j (eps_j / r_j^n) psi((y - x_j) / r_j)

is smooth away from 0 and its Newtonian potential plus one is the function u.
Radii are stored as logarithms because several schedules produce radii far
below the smallest positive double.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from .asymptotics import critical_sigma
from .core import SCHEMA_VERSION, DomainError, check_dimension, omega, sphere_area

_GL_X, _GL_W = np.polynomial.legendre.leggauss(160)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def bump(s):
    """psi(s) = exp(1 - 1/(1 - s^2)) on |s| < 1, zero outside; psi(0) = 1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


# --- bump profile ----------------------------------------------------------------


@dataclass(frozen=True)
class BumpProfile:
    """Radial bump with its mass I and minimal self-potential J."""

    n: int
    I: float
    J: float
    ladder_size: int = 64

    def __call__(self, s):
        return bump(s)

    def inner(self, rho):
        """int_0^rho psi(t) t^(n-1) dt."""
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        t = rho[:, None] * _GL_X
        return rho**self.n * ((bump(t) * _GL_X ** (self.n - 1)) @ _GL_W)

    def outer(self, rho):
        """int_rho^1 psi(t) t dt (n >= 3) or int_rho^1 psi(t) t log(1/t) dt (n = 2)."""
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        span = np.clip(1.0 - rho, 0.0, None)
        t = rho[:, None] + span[:, None] * _GL_X
        w = bump(t) * t
        if self.n == 2:
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(t > 0, w * -np.log(t), 0.0)
        return span * (w @ _GL_W)

    def self_potential(self, rho):
        """P(rho) = int psi(eta) K(|xi - eta|) d eta at |xi| = rho.

        K(r) = r^(2-n) for n >= 3 and log(1/r) for n = 2.
        """
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        out = np.empty_like(rho)
        far = rho >= 1.0
        A = sphere_area(self.n)
        if self.n == 2:
            out[far] = -self.I * np.log(rho[far])
        else:
            out[far] = self.I * rho[far] ** (2.0 - self.n)
        r = rho[~far]
        if r.size:
            inner, outer = self.inner(r), self.outer(r)
            if self.n == 2:
                with np.errstate(divide="ignore", invalid="ignore"):
                    lead = np.where(r > 0, -np.log(np.where(r > 0, r, 1.0)) * inner, 0.0)
            else:
                with np.errstate(divide="ignore", invalid="ignore"):
                    lead = np.where(r > 0, inner / np.where(r > 0, r, 1.0) ** (self.n - 2), 0.0)
            out[~far] = A * (lead + outer)
        return out

    def to_dict(self) -> dict:
        return {"n": self.n, "I": self.I, "J": self.J, "ladder_size": self.ladder_size}


@lru_cache(maxsize=16)
def bump_profile(n: int, ladder_size: int = 64) -> BumpProfile:
    n = check_dimension(n)
    radial, _ = integrate.quad(lambda t: float(bump(np.array([t]))[0]) * t ** (n - 1), 0.0, 1.0,
                               epsabs=0.0, epsrel=1e-13, limit=200)
    I = sphere_area(n) * radial
    tmp = BumpProfile(n, I, 1.0, ladder_size)
    ladder = np.linspace(0.0, 1.0, ladder_size)
    J = float(np.min(tmp.self_potential(ladder))) if n >= 3 else I
    return BumpProfile(n, I, J, ladder_size)


# --- seeds -----------------------------------------------------------------------


def make_xseq(ratio: float, first_norm: float, count: int, n: int = 3) -> np.ndarray:
    """Centres on the first axis with |x_j| = first_norm * ratio^(j-1)."""
    n = check_dimension(n)
    if not 0.0 < ratio < 0.25:
        raise DomainError(f"the ratio must lie in (0, 1/4) strictly, got {ratio}")
    if not 0.0 < first_norm < 0.5:
        raise DomainError(f"the first norm must lie in (0, 1/2), got {first_norm}")
    if count < 1:
        raise DomainError("at least one centre is needed")
    pts = np.zeros((int(count), n))
    pts[:, 0] = first_norm * ratio ** np.arange(count)
    return pts


@dataclass(frozen=True)
class SeedSequence:
    """Centres, log radii and weights phi(|x_j|) with their original indices."""

    points: np.ndarray
    log_radii: np.ndarray
    phi_values: np.ndarray
    indices: np.ndarray = None
    dropped: int = 0

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "log_radii", np.asarray(self.log_radii, dtype=float).ravel())
        object.__setattr__(self, "phi_values", np.asarray(self.phi_values, dtype=float).ravel())
        idx = np.arange(1, len(pts) + 1) if self.indices is None else self.indices
        object.__setattr__(self, "indices", np.asarray(idx, dtype=int).ravel())
        self.validate()

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)

    @property
    def radii(self) -> np.ndarray:
        return np.exp(self.log_radii)

    def __len__(self):
        return len(self.points)

    def validate(self):
        k = len(self.points)
        if not (len(self.log_radii) == len(self.phi_values) == len(self.indices) == k) or k == 0:
            raise DomainError("a seed needs equally many (>= 1) points, radii and weights")
        check_dimension(self.n)
        norms = self.norms
        if not (np.all(norms > 0) and np.all(norms < 0.5)):
            raise DomainError("every centre must satisfy 0 < |x_j| < 1/2")
        if k > 1 and not np.all(4.0 * norms[1:] < norms[:-1]):
            raise DomainError("centres must satisfy 4|x_(j+1)| < |x_j|")
        phi = self.phi_values
        if not (np.all(phi > 0) and np.all(phi < 1)):
            raise DomainError("weights phi(|x_j|) must lie in (0, 1)")
        if not summable_trend(phi):
            raise DomainError("weights phi(|x_j|) do not decay like a summable sequence")
        if not np.all(np.isfinite(self.log_radii)):
            raise DomainError("radii must be positive")
        slack = np.log(norms / 2.0) - self.log_radii
        if np.any(slack < -1e-12 * np.maximum(1.0, np.abs(self.log_radii))):
            raise DomainError("radii must satisfy 0 < r_j <= |x_j|/2")

    def subsequence(self, keep) -> "SeedSequence":
        keep = np.asarray(keep)
        pts = self.points[keep]
        return SeedSequence(pts, self.log_radii[keep], self.phi_values[keep],
                            self.indices[keep], self.dropped + len(self) - len(pts))

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "indices": self.indices.tolist(),
            "points": self.points.tolist(),
            "log_radii": self.log_radii.tolist(),
            "phi_values": self.phi_values.tolist(),
            "dropped": self.dropped,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SeedSequence":
        return cls(np.asarray(data["points"]), data["log_radii"], data["phi_values"],
                   data.get("indices"), int(data.get("dropped", 0)))


def summable_trend(values) -> bool:
    """Partial-sum growth test on a finite weight sequence.

    The sequence passes when its second half decays at least geometrically,
    so the partial sums level off.  Sequences of length <= 2 always pass.
    """
    v = np.asarray(values, dtype=float)
    if v.size <= 2:
        return True
    ratios = v[1:] / v[:-1]
    return bool(np.max(ratios[len(ratios) // 2:]) < 1.0)


def _drop_prefix(points, log_radii, phi, indices) -> SeedSequence:
    """Drop the shortest prefix after which every r_j <= |x_j|/2."""
    bad = log_radii > np.log(np.linalg.norm(points, axis=1) / 2.0)
    start = int(np.max(np.nonzero(bad)[0]) + 1) if bad.any() else 0
    if start >= len(points):
        raise DomainError("no index satisfies r_j <= |x_j|/2; generate more centres")
    return SeedSequence(points[start:], log_radii[start:], phi[start:], indices[start:], start)


def reference_seed(n: int = 3, count: int = 6, ratio: float = 0.2, first_norm: float = 0.2,
                   phi: Callable = lambda r: r, radius_fraction: float = 0.5) -> SeedSequence:
    """Geometric centres with r_j = radius_fraction * |x_j|."""
    if not 0.0 < radius_fraction <= 0.5:
        raise DomainError("the radius fraction must lie in (0, 1/2]")
    pts = make_xseq(ratio, first_norm, count, n)
    norms = np.linalg.norm(pts, axis=1)
    return SeedSequence(pts, np.log(radius_fraction * norms), _apply(phi, norms))


def _apply(func, r) -> np.ndarray:
    return np.array([float(func(float(v))) for v in np.asarray(r)])


# --- the singular solution -----------------------------------------------------------


@dataclass(frozen=True)
class SingularSolution:
    """u = 1 + B * (Gamma-kernel potential of f), with the constant A of the lower bound."""

    seed: SeedSequence
    bump: BumpProfile
    A: float
    B: float

    @property
    def n(self) -> int:
        return self.seed.n

    @property
    def log_caps(self) -> np.ndarray:
        """log M_j = log(eps_j / r_j^n)."""
        return np.log(self.seed.phi_values) - self.n * self.seed.log_radii

    def total_mass(self) -> float:
        return self.bump.I * float(np.sum(self.seed.phi_values))

    def _points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.n:
            raise DomainError(f"points must have {self.n} coordinates")
        return x, single

    def density(self, x):
        x, single = self._points(x)
        out = np.zeros(len(x))
        for c, lr, lm in zip(self.seed.points, self.seed.log_radii, self.log_caps):
            d = np.linalg.norm(x - c, axis=1)
            inside = d < math.exp(lr)
            if inside.any():
                out[inside] += math.exp(lm) * bump(d[inside] / math.exp(lr))
        return out[0] if single else out

    def _contributions(self, log_d: np.ndarray) -> np.ndarray:
        """Per-bump terms of u - 1 given log distances to the centres, shape (m, J)."""
        n, I = self.n, self.bump.I
        out = np.empty_like(log_d)
        for k, (lr, eps) in enumerate(zip(self.seed.log_radii, self.seed.phi_values)):
            ld = log_d[:, k]
            inside = ld < lr
            far = ~inside
            if n == 2:
                out[far, k] = self.B * eps * I * (math.log(4.0) - ld[far])
                out[inside, k] = self.B * eps * (I * (math.log(4.0) - lr)
                                                 + self.bump.self_potential(np.exp(ld[inside] - lr)))
            else:
                out[far, k] = self.B * eps * I * np.exp((2 - n) * ld[far])
                out[inside, k] = (self.B * eps * math.exp((2 - n) * lr)
                                  * self.bump.self_potential(np.exp(ld[inside] - lr)))
        return out

    def u(self, x):
        x, single = self._points(x)
        if self.n == 2 and np.any(np.linalg.norm(x, axis=1) >= 2.0):
            raise DomainError("the planar construction lives in the disc |x| < 2")
        with np.errstate(divide="ignore"):
            log_d = np.log(np.linalg.norm(x[:, None, :] - self.seed.points[None, :, :], axis=2))
        out = 1.0 + self._contributions(log_d).sum(axis=1)
        return out[0] if single else out

    def _local_log_d(self, j: int, xi: np.ndarray) -> np.ndarray:
        # distances from x_j + r_j xi, exact for the home bump even when r_j underflows
        xi = np.atleast_2d(xi)
        pts = self.seed.points
        off = pts[j] - pts + math.exp(self.seed.log_radii[j]) * xi[:, None, :]
        with np.errstate(divide="ignore"):
            log_d = np.log(np.linalg.norm(off, axis=2))
            log_d[:, j] = self.seed.log_radii[j] + np.log(np.linalg.norm(xi, axis=1))
        return log_d

    def u_local(self, j: int, xi):
        """u(x_j + r_j xi) evaluated without forming the (possibly unrepresentable) point."""
        return 1.0 + self._contributions(self._local_log_d(j, xi)).sum(axis=1)

    def scaled_local(self, j: int, xi):
        """(u(x_j + r_j xi) - c_j) / (eps_j r_j^(2-n)), whose negative xi-Laplacian is psi(xi).

        c_j is constant in xi.  The other bumps enter through their variation
        relative to xi = 0, computed with log1p/expm1 so that tiny radii keep
        full relative accuracy.  Points must lie outside every other ball.
        """
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        sd, n = self.seed, self.n
        lr = sd.log_radii[j]
        r = math.exp(lr)
        rho = np.linalg.norm(xi, axis=1)
        out = self.B * self.bump.self_potential(rho)
        log_norm = math.log(sd.phi_values[j]) + (2 - n) * lr
        for k in range(len(sd)):
            if k == j:
                continue
            v = sd.points[j] - sd.points[k]
            v2 = float(v @ v)
            rel = (2.0 * r * (xi @ v) + r * r * rho**2) / v2
            log_ratio = 0.5 * np.log1p(rel)
            log_d0 = 0.5 * math.log(v2)
            if np.any(log_d0 + log_ratio < sd.log_radii[k]):
                raise DomainError("scaled evaluation needs points outside the other balls")
            coef = self.B * sd.phi_values[k] * self.bump.I
            if n == 2:
                out = out - coef * log_ratio / math.exp(log_norm)
            else:
                out = out + coef * np.exp((2 - n) * log_d0 - log_norm) * np.expm1((2 - n) * log_ratio)
        return out

    def lower_bound(self) -> np.ndarray:
        """A phi / r_j^(n-2) for n >= 3, A phi log(1/r_j) for n = 2."""
        phi, lr = self.seed.phi_values, self.seed.log_radii
        if self.n == 2:
            return self.A * phi * (-lr)
        return self.A * phi * np.exp(-(self.n - 2) * lr)

    def neg_laplacian(self, x, h: float):
        """-Delta_h u with the (2n+1)-point stencil."""
        return _stencil(self.u, x, h, self.n)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "seed": self.seed.to_dict(),
                "bump": self.bump.to_dict(), "A": self.A, "B": self.B}


def _stencil(func, x, h, n):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    h = np.broadcast_to(np.asarray(h, dtype=float), (len(x),))[:, None]
    centre = func(x)
    acc = np.zeros(len(x))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        acc += func(x + h * e) + func(x - h * e) - 2.0 * centre
    out = -acc / h[:, 0] ** 2
    return out[0] if single else out


def lemma41_build(seed: SeedSequence, n: int | None = None) -> SingularSolution:
    """Superpose bumps on the seed; A = B*J (n >= 3) or I/(2 pi) (n = 2)."""
    n = seed.n if n is None else check_dimension(n)
    if n != seed.n:
        raise DomainError("seed dimension does not match n")
    seed.validate()
    prof = bump_profile(n)
    B = omega(n)
    A = B * prof.J if n >= 3 else prof.I / (2.0 * math.pi)
    return SingularSolution(seed, prof, A, B)


# --- verification ------------------------------------------------------------------


@dataclass
class Lemma41Check:
    density_cap: bool
    harmonic_off_support: bool
    lower_bound: bool
    at_least_one: bool
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.density_cap and self.harmonic_off_support and self.lower_bound and self.at_least_one

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "passed": self.passed,
                "density_cap": self.density_cap, "harmonic_off_support": self.harmonic_off_support,
                "lower_bound": self.lower_bound, "at_least_one": self.at_least_one,
                "details": self.details}


def _unit_vectors(rng, count: int, n: int) -> np.ndarray:
    v = rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _fourth_derivative_const(n: int) -> float:
    # sup of |d^4/dt^4| of r^(2-n) (or -log r) along a line, times r^(n+2)
    if n == 2:
        return 6.0
    k = n - 2
    return float(k * (k + 1) * (k + 2) * (k + 3))


def check_lemma41(sol: SingularSolution, samples_per_ball: int = 32, samples: int = 1000,
                  seed: int = 0) -> Lemma41Check:
    """Numerically confirm the four conclusions of the bump construction.

    Checks near bump j run in the scaled coordinates x = x_j + r_j xi so that
    radii far below the floating-point spacing at x_j still resolve.
    """
    rng = np.random.default_rng(seed)
    n, sd = sol.n, sol.seed
    eps_mach = np.finfo(float).eps
    c4 = _fourth_derivative_const(n)
    BI = sol.B * sol.bump.I
    details: dict = {}

    # density cap: M_j * max psi = eps_j / r_j^n, and -Delta u in [0, cap] inside the balls
    cap_ok = bool(np.array_equal(sol.log_caps, np.log(sd.phi_values) - n * sd.log_radii)
                  and bump(np.array([0.0]))[0] == 1.0)
    worst = 0.0
    for j in range(len(sd)):
        xi = _unit_vectors(rng, samples_per_ball, n) * rng.uniform(0, 0.9, (samples_per_ball, 1))
        xi[0] = 0.0
        target = bump(np.linalg.norm(xi, axis=1))
        w = lambda z, j=j: sol.scaled_local(j, z)
        h = 0.01
        fine, coarse = _stencil(w, xi, h, n), _stencil(w, xi, 2 * h, n)
        rich = (4 * fine - coarse) / 3
        tol = np.abs(coarse - fine) + 64 * n * eps_mach * float(np.max(np.abs(w(xi)))) / h**2
        ok = (np.all(target <= 1.0) and np.all(rich >= -tol) and np.all(rich <= 1.0 + tol)
              and np.all(np.abs(rich - target) <= tol + 1e-9))
        worst = max(worst, float(np.max(np.abs(rich - target))))
        cap_ok = cap_ok and bool(ok)
    details["laplacian_residual_in_balls_over_cap"] = worst

    # harmonicity off the supports: shells around each ball, in scaled coordinates
    ratio = 0.0
    harm_ok = True
    shell_count = 0
    log_eps = np.log(sd.phi_values)
    for j in range(len(sd)):
        mag = rng.uniform(1.5, 3.0, (samples_per_ball, 1))
        xi = _unit_vectors(rng, samples_per_ball, n) * mag
        h = 0.1 * (mag[:, 0] - 1.0)
        log_d = sol._local_log_d(j, xi)
        # keep stencils clear of the other balls and of the origin
        reach = 2.0 * h * math.exp(sd.log_radii[j])
        others = np.exp(log_d) - sd.radii[None, :]
        others[:, j] = np.inf
        origin = np.linalg.norm(sd.points[j] + math.exp(sd.log_radii[j]) * xi, axis=1)
        keep = (np.min(others, axis=1) > reach) & (origin > reach)
        xi, h, mag, log_d = xi[keep], h[keep], mag[keep], log_d[keep]
        if not len(xi):
            continue
        shell_count += len(xi)
        resid = _stencil(lambda z, j=j: sol.scaled_local(j, z), xi, h, n)
        tol = BI * c4 / (mag[:, 0] - h) ** (n + 2)
        for k in range(len(sd)):
            if k != j:
                dmin = np.exp(log_d[:, k]) - h * math.exp(sd.log_radii[j])
                tol = tol + BI * c4 * np.exp(log_eps[k] - log_eps[j]
                                             + (n + 2) * (sd.log_radii[j] - np.log(dmin)))
        w_scale = np.abs(sol.scaled_local(j, xi))
        tol = 2 * n * h**2 / 12.0 * tol + 64 * n * eps_mach * w_scale / h**2
        harm_ok = harm_ok and bool(np.all(np.abs(resid) <= tol))
        ratio = max(ratio, float(np.max(np.abs(resid) / tol)))

    # and at scattered points away from every ball, in the original coordinates
    pts = rng.uniform(-0.5, 0.5, (samples, n))
    d_all = np.linalg.norm(pts[:, None, :] - sd.points[None, :, :], axis=2)
    gap = np.min(d_all - sd.radii[None, :], axis=1)
    h = 0.1 * np.minimum(gap, np.linalg.norm(pts, axis=1))
    keep = h > 1e-6 * np.linalg.norm(pts, axis=1)
    pts, d_all, h = pts[keep], d_all[keep], h[keep]
    resid = sol.neg_laplacian(pts, h)
    coef = BI * sd.phi_values
    trunc = np.sum(coef[None, :] * c4 / (d_all - h[:, None]) ** (n + 2), axis=1)
    tol = 2 * n * h**2 / 12.0 * trunc + 64 * n * eps_mach * np.abs(sol.u(pts)) / h**2
    harm_ok = harm_ok and bool(np.all(np.abs(resid) <= tol))
    ratio = max(ratio, float(np.max(np.abs(resid) / tol)))
    details["harmonic_samples"] = int(len(pts) + shell_count)
    details["harmonic_max_resid_over_tol"] = ratio

    # lower bound at each centre and across each ball
    lb = sol.lower_bound()
    low_ok = True
    min_ratio = math.inf
    inside_vals = []
    for j in range(len(sd)):
        xi = _unit_vectors(rng, samples_per_ball, n) * rng.uniform(0, 1, (samples_per_ball, 1))
        xi[0] = 0.0
        vals = sol.u_local(j, xi)
        low_ok = low_ok and bool(np.all(vals >= lb[j]))
        min_ratio = min(min_ratio, float(vals[0] / lb[j]))
        outer = _unit_vectors(rng, samples_per_ball, n) * rng.uniform(1, 2, (samples_per_ball, 1))
        inside_vals.append(vals)
        inside_vals.append(sol.u_local(j, outer))
    details["lower_bound_min_ratio"] = min_ratio

    # u >= 1
    reach = 1.9 if n == 2 else 1.0
    cloud = rng.uniform(-1, 1, (samples, n))
    cloud *= reach / max(1.0, float(np.max(np.linalg.norm(cloud, axis=1))))
    cloud = cloud[np.linalg.norm(cloud, axis=1) > 0]
    vals = np.concatenate([sol.u(cloud)] + inside_vals)
    one_ok = bool(np.all(vals >= 1.0))
    details["u_min"] = float(np.min(vals))
    details["u_samples"] = int(len(vals))
    return Lemma41Check(cap_ok, harm_ok, low_ok, one_ok, details)


# --- schedules ---------------------------------------------------------------------


def _smallest(pred: Callable[[float], bool], start: float) -> float:
    """Smallest L >= start with pred(L), for pred monotone in L (false then true)."""
    if pred(start):
        return start
    lo, hi = start, max(2.0 * start, start + 1.0)
    while not pred(hi):
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise DomainError("no radius satisfies the schedule constraints")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


_LOG_MAX = math.log(np.finfo(float).max)


def _log_growth(func: Callable, t: np.ndarray, log_scale: bool) -> np.ndarray:
    """log func(t); an overflowing value only certifies log func >= log(DBL_MAX)."""
    out = np.empty(len(t))
    for i, v in enumerate(t):
        try:
            val = float(func(float(v)))
        except OverflowError:
            val = math.inf
        if log_scale:
            out[i] = val
        elif val == math.inf:
            out[i] = _LOG_MAX
        else:
            out[i] = math.log(val) if val > 0 else -math.inf
    return out


@dataclass(frozen=True)
class GrowthMinorant:
    """M(t) = min_{tau >= t} log F(tau)/tau on a geometric tau grid, F = min(f, g)."""

    f: Callable
    g: Callable
    log_scale: bool = False
    horizon: float = 1e4
    points: int = 400

    def log_F(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.minimum(_log_growth(self.f, t, self.log_scale),
                          _log_growth(self.g, t, self.log_scale))

    def __call__(self, t: float) -> float:
        tau = t * np.geomspace(1.0, self.horizon, self.points)
        return float(np.min(self.log_F(tau) / tau))

    def threshold(self, t_max: float = 1e8) -> float:
        """K with F > 1 on [K, t_max] (sampled), and M eventually positive."""
        ts = np.geomspace(1e-3, t_max, 2000)
        positive = self.log_F(ts) > 0
        if not positive[-1]:
            raise DomainError("min(f, g) is not eventually above 1; superexponential growth fails")
        bad = np.nonzero(~positive)[0]
        K = float(ts[bad[-1] + 1]) if bad.size else float(ts[0])
        if not self(t_max) > 0:
            raise DomainError("log F(t)/t is not eventually positive; superexponential growth fails")
        if not self(t_max) > 2.0 * self(t_max * 1e-4):
            raise DomainError("log F(t)/t does not grow without bound; superexponential growth fails")
        return K


def schedule_thm22(f_growth: Callable, g_growth: Callable, h: Callable, count: int = 6,
                   ratio: float = 0.2, first_norm: float = 0.2,
                   log_scale: bool = False) -> SeedSequence:
    """Planar seed with phi(r) = r and radii shrunk until the three growth conditions hold.

    With ``log_scale`` the growth callables return log f and log g, which
    avoids overflow for superexponential growth.
    """
    pts = make_xseq(ratio, first_norm, count, 2)
    norms = np.linalg.norm(pts, axis=1)
    prof = bump_profile(2)
    A = prof.I / (2.0 * math.pi)
    M = GrowthMinorant(f_growth, g_growth, log_scale)
    K = M.threshold()
    log_r = np.empty(count)
    for j, x in enumerate(norms):
        a = A * x
        hx = float(h(float(x)))

        def ok(L, a=a, hx=hx):
            t = a * L
            return t >= K and a * M(t) > 2.0 and hx * hx < t

        log_r[j] = -_smallest(ok, math.log(2.0 / x))
    return SeedSequence(pts, log_r, norms.copy())


def schedule_thm62(h: Callable, psi: Callable = lambda r: r, count: int = 6, ratio: float = 0.2,
                   first_norm: float = 0.2) -> SeedSequence:
    """Planar seed with r_j = exp(-h(log(2/|x_j|))/2) and phi = sqrt(psi)."""
    pts = make_xseq(ratio, first_norm, count, 2)
    norms = np.linalg.norm(pts, axis=1)
    log_r = np.array([-0.5 * float(h(math.log(2.0 / x))) for x in norms])
    phi = np.sqrt(_apply(psi, norms))
    return _drop_prefix(pts, log_r, phi, np.arange(1, count + 1))


def schedule_thm33(lam: float, n: int = 3, psi: Callable = lambda r: r, count: int = 8,
                   ratio: float = 0.2, first_norm: float = 0.2) -> SeedSequence:
    """Seed with r_j = (2|x_j|)^((n-2) lam / n) and phi = sqrt(psi)."""
    n = check_dimension(n)
    if n < 3 or not lam > n / (n - 2):
        raise DomainError("this schedule needs n >= 3 and lambda > n/(n-2)")
    pts = make_xseq(ratio, first_norm, count, n)
    norms = np.linalg.norm(pts, axis=1)
    log_r = (n - 2) * lam / n * np.log(2.0 * norms)
    phi = np.sqrt(_apply(psi, norms))
    return _drop_prefix(pts, log_r, phi, np.arange(1, count + 1))


@dataclass(frozen=True)
class PairSchedule:
    u_seed: SeedSequence
    v_seed: SeedSequence
    alpha: float
    beta: float
    lam: float
    sigma: float
    A: float
    identity_error: float
    cross_bound_ok: bool

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "u_seed": self.u_seed.to_dict(),
                "v_seed": self.v_seed.to_dict(), "alpha": self.alpha, "beta": self.beta,
                "lambda": self.lam, "sigma": self.sigma, "A": self.A,
                "identity_error": self.identity_error, "cross_bound_ok": self.cross_bound_ok}


def schedule_thm34(lam: float, sigma: float, n: int = 3, h: Callable = lambda r: math.log(1.0 / r),
                   count: int = 6, ratio: float = 0.2, first_norm: float = 0.2) -> PairSchedule:
    """Seeds (phi(r) = r for u, psi_j for v) with phi/r^n = (A psi_j / r^(n-2))^lambda."""
    n = check_dimension(n)
    if n < 3:
        raise DomainError("this schedule needs n >= 3")
    crit = critical_sigma(lam, n)
    if not sigma > crit:
        raise DomainError(f"sigma = {sigma} must lie above the critical curve "
                          f"2/(n-2) + n/((n-2) lambda) = {crit:.6g}")
    if not sigma <= lam:
        raise DomainError(f"sigma = {sigma} must not exceed lambda = {lam}")
    if sigma >= n / (n - 2):
        # a solution for a smaller sigma also solves the larger problem
        sigma = 0.5 * (max(crit, 0.0) + n / (n - 2))
    a = 1.0 / ((n - 2) * lam - n)
    b = 1.0 / (n - (n - 2) * sigma)
    if not b > a * lam > 0:
        raise DomainError("beta > alpha * lambda > 0 fails")
    A = lemma41_build(reference_seed(n, 1)).A
    pts = make_xseq(ratio, first_norm, count, n)
    norms = np.linalg.norm(pts, axis=1)
    log_r = np.empty(count)
    log_psi = np.empty(count)
    lA = math.log(A)
    for j, x in enumerate(norms):
        lphi = math.log(x)
        lh = math.log(float(h(float(x))))

        def lpsi(L, lphi=lphi):
            return (lphi - L / a) / lam - lA

        def ok(L, j=j, lphi=lphi, lh=lh):
            lp = lpsi(L)
            return (lA + lphi + (n - 2) * L > 2 * lh
                    and lA + lp + (n - 2) * L > 2 * lh
                    and (a * lam - b) * lp >= (a - sigma * b) * lphi - (sigma * b + a * lam) * lA
                    and lp <= -(j + 1) * math.log(2.0))

        L = _smallest(ok, math.log(2.0 / x))
        log_r[j], log_psi[j] = -L, lpsi(L)
    lphi = np.log(norms)
    lhs = lphi - n * log_r
    rhs = lam * (lA + log_psi - (n - 2) * log_r)
    identity_error = float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(lhs))))
    cross = bool(np.all(log_psi - n * log_r <= sigma * (lA + lphi - (n - 2) * log_r)
                        + 1e-12 * np.abs(log_psi - n * log_r)))
    u_seed = SeedSequence(pts, log_r, norms.copy())
    v_seed = SeedSequence(pts, log_r, np.exp(log_psi))
    return PairSchedule(u_seed, v_seed, a, b, lam, sigma, A, identity_error, cross)


# --- blow-up rates -------------------------------------------------------------------


class Trend(str, enum.Enum):
    DIVERGES = "Diverges"
    BOUNDED = "Bounded"


@dataclass
class BlowupReport:
    indices: list
    norms: list
    log_radii: list
    u_values: list
    ratios: list
    verdict: Trend
    factor: float

    CSV_HEADER = ("j", "norm_x", "r", "log_r", "u", "ratio")

    def csv_rows(self) -> list[tuple]:
        return [(j, x, math.exp(lr), lr, u, q) for j, x, lr, u, q in
                zip(self.indices, self.norms, self.log_radii, self.u_values, self.ratios)]

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "indices": self.indices, "norms": self.norms,
                "log_radii": self.log_radii, "u_values": self.u_values, "ratios": self.ratios,
                "verdict": self.verdict.value, "factor": self.factor}


def measure_blowup(sol: SingularSolution, h: Callable, factor: float = 10.0) -> BlowupReport:
    """Ratios u(x_j)/h(|x_j|); Diverges when they rise monotonically over the
    second half of the kept indices and the last exceeds the first by ``factor``."""
    sd = sol.seed
    u = sol.u(sd.points)
    hv = _apply(h, sd.norms)
    if np.any(~(hv > 0)):
        raise DomainError("the reference function must be positive")
    ratios = u / hv
    tail = ratios[len(ratios) // 2:]
    rising = bool(np.all(np.diff(tail) > 0)) if tail.size > 1 else False
    grows = bool(ratios[-1] >= factor * ratios[0])
    verdict = Trend.DIVERGES if rising and grows else Trend.BOUNDED
    return BlowupReport(sd.indices.tolist(), sd.norms.tolist(), sd.log_radii.tolist(),
                        u.tolist(), ratios.tolist(), verdict, factor)
