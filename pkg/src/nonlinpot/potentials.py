"""Riesz, Wolff, Bessel and Havin-Maz'ya potentials, Newtonian potentials on
balls, their two-level composition, the truncated Wolff-type integral and the
Hardy-Littlewood maximal function.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import (SCHEMA_VERSION, AtomicMeasure, Ball, DomainError, GridDensity, Measure,
                   RadialMeasure, check_schema_version,
                   as_point, ball_volume, cell_fraction, sphere_area)
from .quadrature import (PotentialValue, bessel_kernel, direct_sum, grid_field, layercake,
                         radial_weight, riesz_ball_integral)


class Operator(str, enum.Enum):
    RIESZ_LAYERCAKE = "RieszLayercake"
    RIESZ_KERNEL = "RieszKernel"
    NEWTONIAN_BALL = "NewtonianBall"
    TRUNCATED_NEWTONIAN = "TruncatedNewtonian"
    BESSEL = "Bessel"
    WOLFF = "Wolff"
    HAVIN_MAZYA = "HavinMazya"
    V_POTENTIAL = "VPotential"
    COMPOSITE_NN = "CompositeNN"
    WOLFF_SIGMA = "WolffSigma"


@dataclass(frozen=True)
class PotentialSpec:
    operator: Operator
    alpha: float = 2.0
    p: float = 2.0
    sigma: float = 1.0
    c: float = 0.0
    r_max: float = math.inf
    quad_rings: int = 512
    grid: int = 32

    def __post_init__(self):
        object.__setattr__(self, "operator", Operator(self.operator))
        if self.quad_rings < 16:
            raise DomainError("quad_rings must be at least 16")
        if self.c < 0:
            raise DomainError("damping c must be nonnegative")
        if not self.r_max > 0:
            raise DomainError("r_max must be positive")
        if self.grid < 4:
            raise DomainError("working grid needs at least 4 cells per axis")

    def validate(self, n: int) -> None:
        op = self.operator
        if op in (Operator.RIESZ_LAYERCAKE, Operator.RIESZ_KERNEL, Operator.WOLFF,
                  Operator.HAVIN_MAZYA) and not 0 < self.alpha < n:
            raise DomainError(f"alpha must lie in (0, n) = (0, {n})")
        if op in (Operator.BESSEL, Operator.V_POTENTIAL) and not self.alpha > 0:
            raise DomainError("alpha must be positive")
        if op in (Operator.WOLFF, Operator.HAVIN_MAZYA, Operator.V_POTENTIAL):
            if not self.p > 1:
                raise DomainError("p must exceed 1")
            strict = op == Operator.HAVIN_MAZYA or (op == Operator.WOLFF and self.c == 0)
            ap = self.alpha * self.p
            if strict and not ap < n:
                raise DomainError(f"alpha*p < n is required, got alpha*p = {ap:g}, n = {n}")
            if not strict and ap > n * (1 + 1e-12):
                raise DomainError(f"alpha*p <= n is required, got alpha*p = {ap:g}, n = {n}")
        if op in (Operator.COMPOSITE_NN, Operator.WOLFF_SIGMA) and self.sigma < 0:
            raise DomainError("sigma must be nonnegative")
        if op == Operator.WOLFF_SIGMA:
            if n < 3 or self.sigma < 2.0 / (n - 2) - 1e-12:
                raise DomainError("the truncated Wolff integral needs n >= 3 and sigma >= 2/(n-2)")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION, "operator": self.operator.value, "alpha": self.alpha, "p": self.p,
            "sigma": self.sigma, "c": self.c,
            "r_max": None if math.isinf(self.r_max) else self.r_max,
            "quad_rings": self.quad_rings, "grid": self.grid,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        check_schema_version(d, "spec")
        keys = {"operator", "alpha", "p", "sigma", "c", "r_max", "quad_rings", "grid"}
        unknown = set(d) - keys - {"schema_version"}
        if unknown:
            raise DomainError(f"unknown spec fields: {sorted(unknown)}")
        if "operator" not in d:
            raise DomainError("spec JSON is missing field 'operator'")
        kw = {k: d[k] for k in keys & set(d)}
        if kw.get("r_max") is None:
            kw.pop("r_max", None)
        try:
            return cls(**kw)
        except ValueError as exc:
            raise DomainError(str(exc)) from None


def _riesz_kernel_fn(n, alpha):
    k = 1.0 / (n - alpha)
    return lambda d: k * d ** (alpha - n)


def _check_alpha(alpha, n):
    if not 0 < alpha < n:
        raise DomainError(f"alpha must lie in (0, n) = (0, {n}), got {alpha}")


# --- Riesz ----------------------------------------------------------------------


def riesz_layercake(mu: Measure, alpha: float, x, rings: int = 512) -> PotentialValue:
    _check_alpha(alpha, mu.n)
    return layercake(mu, x, 1.0, mu.n - alpha, 0.0, rings)


def riesz_kernel(mu: Measure, alpha: float, x) -> PotentialValue:
    n = mu.n
    _check_alpha(alpha, n)
    x = as_point(x, n)
    if isinstance(mu, RadialMeasure):
        return riesz_layercake(mu, alpha, x)
    if isinstance(mu, AtomicMeasure):
        d = np.linalg.norm(mu.points - x, axis=1)
        live = mu.masses > 0
        if np.any(d[live] == 0):
            return PotentialValue(math.inf, math.inf, "atom at evaluation point")
        return PotentialValue(float(mu.masses[live] @ (d[live] ** (alpha - n))) / (n - alpha), 0.0)
    kern = _riesz_kernel_fn(n, alpha)
    curv = lambda d: (n - alpha + 1) * d ** (alpha - n - 2)
    return direct_sum(mu, x, kern, riesz_ball_integral(n, alpha, mu.rho) / (n - alpha), curv)


# --- Newtonian on balls ----------------------------------------------------------


def _newton_kernel(n):
    return lambda d: d ** (2.0 - n)


def _newton_ball_integral(n, rho):
    return sphere_area(n) * rho**2 / 2.0


def _require_n3(n):
    if n < 3:
        raise DomainError("Newtonian potentials on balls are defined here for n >= 3")


def newtonian_ball(f: GridDensity, x) -> PotentialValue:
    """int_B f(y) |x-y|^(2-n) dy where B is the ball carried by ``f``."""
    n = f.n
    _require_n3(n)
    if f.ball is None:
        raise DomainError("newtonian_ball needs a density restricted to a ball (GridDensity.on_ball)")
    x = as_point(x, n)
    if not f.ball.contains(x):
        raise DomainError("evaluation point must lie in the closed ball")
    curv = lambda d: (n - 1) * (n - 2) * d ** (-n)
    return direct_sum(f, x, _newton_kernel(n), _newton_ball_integral(n, f.rho), curv)


def truncated_newtonian(f: GridDensity, R: float, xi) -> PotentialValue:
    """int_{|z|<R} |xi - z|^(2-n) f(z) dz."""
    n = f.n
    _require_n3(n)
    if not R > 0:
        raise DomainError("truncation radius must be positive")
    cut = Ball(np.zeros(n), R)
    balls = [cut] if f.ball is None else [cut, f.ball]
    frac = cell_fraction(f, balls)
    w = frac if f.ball is not None else f.weights * frac
    g = GridDensity(f.lower, f.upper, f.values, np.minimum(w, f.weights), None)
    curv = lambda d: (n - 1) * (n - 2) * d ** (-n)
    return direct_sum(g, xi, _newton_kernel(n), _newton_ball_integral(n, f.rho), curv)


def newtonian_field(f: GridDensity, density=None) -> np.ndarray:
    """N f at every cell centre."""
    n = f.n
    _require_n3(n)
    return grid_field(f, _newton_kernel(n), _newton_ball_integral(n, f.rho), density)


def composite_field(g: GridDensity, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """(N g, N((N g)^sigma)) at every cell centre."""
    inner = newtonian_field(g)
    outer = newtonian_field(g, _power(inner, sigma))
    return inner, outer


def _power(a, s):
    return np.ones_like(a) if s == 0 else a**s


def composite_NN(g: GridDensity, sigma: float, x, inner: np.ndarray | None = None) -> PotentialValue:
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    if g.ball is None:
        raise DomainError("composite_NN needs a density restricted to a ball")
    if inner is None:
        inner = newtonian_field(g)
    dens = _power(inner, sigma)
    n = g.n
    curv = lambda d: (n - 1) * (n - 2) * d ** (-n)
    val = direct_sum(g, x, _newton_kernel(n), _newton_ball_integral(n, g.rho), curv, density=dens)
    # propagate the inner midpoint error through the power
    rel = 0.0 if sigma == 0 else min(1.0, sigma * (g.spacing @ g.spacing) / 24.0 * n)
    return PotentialValue(val.value, val.error_estimate + rel * val.value)


def wolff_sigma(f: GridDensity, sigma: float, x, rings: int = 512) -> PotentialValue:
    """int_0^3 (int_{B_r(x)} f)^sigma r^(1-(n-2) sigma) dr, f extended by zero."""
    n = f.n
    if n < 3 or sigma < 2.0 / (n - 2) - 1e-12:
        raise DomainError("the truncated Wolff integral needs n >= 3 and sigma >= 2/(n-2)")
    x = as_point(x, n)
    if np.linalg.norm(x) >= 1.0:
        raise DomainError("evaluation point must lie in the open unit ball")
    return layercake(f, x, sigma, (n - 2) * sigma - 2.0, 0.0, rings, r_max=3.0)


# --- Wolff -----------------------------------------------------------------------


def wolff(mu: Measure, alpha: float, p: float, c: float, x, rings: int = 512) -> PotentialValue:
    n = mu.n
    if not p > 1:
        raise DomainError("p must exceed 1")
    if c < 0:
        raise DomainError("damping c must be nonnegative")
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    ap = alpha * p
    if c == 0 and not ap < n:
        raise DomainError(f"undamped Wolff potential diverges unless alpha*p < n (alpha*p = {ap:g})")
    if ap > n * (1 + 1e-12):
        raise DomainError(f"alpha*p <= n is required (alpha*p = {ap:g})")
    q = 1.0 / (p - 1.0)
    return layercake(mu, x, q, (n - ap) * q, c, rings)


def wolff_phi(mu: Measure, alpha: float, p: float, c: float, phi, rings: int = 512,
              r_lo: float = 1e-6, r_hi: float = 1e3) -> float:
    """int_0^inf (phi(r)/r^(n-alpha p))^(1/(p-1)) e^(-c r) dr/r for a majorant phi."""
    n = mu.n
    q = 1.0 / (p - 1.0)
    gam = (n - alpha * p) * q
    edges = np.geomspace(r_lo, r_hi, rings + 1)
    vals = np.array([phi(r) for r in edges])
    w = radial_weight(edges[:-1], edges[1:], gam, c)
    body = float(w @ (0.5 * (vals[:-1] ** q + vals[1:] ** q)))
    head = 0.0
    if vals[0] > 0:
        # local growth exponent of phi at the bottom of the ladder
        k = math.log(max(vals[1], vals[0]) / vals[0]) / math.log(edges[1] / edges[0])
        k = min(k, float(n))
        if k * q <= gam:
            return math.inf
        head = vals[0] ** q * r_lo ** (-gam) / (k * q - gam)
    tail = vals[-1] ** q * float(radial_weight(np.array(r_hi), np.array(math.inf), gam, c))
    return head + body + tail


# --- Bessel and nonlinear potentials -------------------------------------------------


def bessel(mu: Measure, alpha: float, x) -> PotentialValue:
    n = mu.n
    kern = bessel_kernel(float(alpha), n)
    x = as_point(x, n)
    if isinstance(mu, RadialMeasure):
        raise DomainError("Bessel potentials of radial profiles are not supported")
    if isinstance(mu, AtomicMeasure):
        d = np.linalg.norm(mu.points - x, axis=1)
        live = mu.masses > 0
        if np.any(d[live] == 0) and alpha <= n:
            return PotentialValue(math.inf, math.inf, "atom at evaluation point")
        v = float(mu.masses[live] @ kern(d[live]))
        return PotentialValue(v, kern.rel_error * v + 1e-14 * v)
    val = direct_sum(mu, x, kern, kern.ball_integral(mu.rho), kern.curvature)
    return PotentialValue(val.value, val.error_estimate + kern.rel_error * val.value)


def _support_ball(mu: Measure) -> tuple[np.ndarray, float]:
    pts, m = mu.discrete()
    if len(pts) == 0:
        return np.zeros(mu.n), 1.0
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    c = 0.5 * (lo + hi)
    rad = float(np.linalg.norm(pts - c, axis=1).max())
    if isinstance(mu, GridDensity):
        rad += mu.half_diagonal
    return c, max(rad, 1e-3)


def _working_density(mu: Measure, half_width: float, cells: int) -> GridDensity:
    """Empty grid on a cube of the given half-width around the support."""
    c, _ = _support_ball(mu)
    if isinstance(mu, GridDensity):
        # pad the density's own grid so cells stay aligned
        h = mu.spacing
        extra = np.maximum(np.ceil((half_width - 0.5 * (mu.upper - mu.lower)) / h), 0).astype(int)
        lo = mu.lower - extra * h
        hi = mu.upper + extra * h
        shape = tuple(np.array(mu.shape) + 2 * extra)
        return GridDensity(lo, hi, np.zeros(shape))
    return GridDensity(c - half_width, c + half_width, np.zeros((cells,) * mu.n))


def _inner_field(mu: Measure, work: GridDensity, kernel, ball_int) -> np.ndarray:
    """Linear potential of mu at the working-grid cell centres."""
    if isinstance(mu, GridDensity):
        extra = np.rint((mu.lower - work.lower) / work.spacing).astype(int)
        sl = tuple(slice(e, e + k) for e, k in zip(extra, mu.shape))
        vals = np.zeros(work.shape)
        w = np.zeros(work.shape)
        vals[sl] = mu.values
        w[sl] = mu.weights
        g = GridDensity(work.lower, work.upper, vals, w)
        return grid_field(g, kernel, ball_int)
    centers = work.centers().reshape(-1, work.n)
    out = np.zeros(centers.shape[0])
    live = mu.masses > 0
    for a, m in zip(mu.points[live], mu.masses[live]):
        d = np.linalg.norm(centers - a, axis=1)
        home = np.argmin(d)
        d[home] = 1.0
        k = kernel(d)
        k[home] = ball_int / work.cell_volume
        out += m * k
    return out.reshape(work.shape)


_FIELD_CACHE: list = []


def _cached_power_field(mu, work, kern, ball_int, q, key) -> np.ndarray:
    """(inner field)^q on the working grid; reused across probes sharing a working grid."""
    for entry in _FIELD_CACHE:
        if entry[0] is mu and entry[1] == key:
            return entry[2]
    g = _power(_inner_field(mu, work, kern, ball_int), q)
    _FIELD_CACHE.insert(0, (mu, key, g))
    del _FIELD_CACHE[4:]
    return g


def _nonlinear(mu: Measure, alpha: float, p: float, x, kind: str, cells: int,
               margin: float) -> PotentialValue:
    n = mu.n
    if isinstance(mu, RadialMeasure):
        raise DomainError("nonlinear potentials need an atomic or grid measure")
    if mu.total_mass() == 0:
        return PotentialValue(0.0, 0.0)
    q = 1.0 / (p - 1.0)
    x = as_point(x, n)
    c, rad = _support_ball(mu)
    if kind == "riesz":
        half = max(3.0 * rad, rad + 1.0, 1.5 * float(np.linalg.norm(x - c)) + rad)
        kern = _riesz_kernel_fn(n, alpha)
        work = _working_density(mu, half, cells)
        ball_int = riesz_ball_integral(n, alpha, work.rho) / (n - alpha)
    else:
        # far probes widen the cube in whole units so nearby probes share a cached field
        half = rad + margin + math.ceil(max(0.0, float(np.linalg.norm(x - c)) - rad))
        kern = bessel_kernel(float(alpha), n)
        work = _working_density(mu, half, cells)
        ball_int = kern.ball_integral(work.rho)
    key = (kind, float(alpha), float(p), work.shape, tuple(work.lower), tuple(work.upper))
    g = _cached_power_field(mu, work, kern, ball_int, q, key)
    if kind == "riesz":
        # integrate the outer potential over the inscribed ball, far field analytically
        wc = 0.5 * (work.lower + work.upper)
        L = float(0.5 * (work.upper - work.lower).min())
        frac = cell_fraction(work, [Ball(wc, L)], 4)
        outer_grid = GridDensity(work.lower, work.upper, g, frac)
        val = direct_sum(outer_grid, x, kern, ball_int)
        M = mu.total_mass()
        expo = (n - alpha) * q - alpha
        tail = sphere_area(n) * (M / (n - alpha)) ** q / (n - alpha) * L ** (-expo) / expo
        far_err = tail * (float(np.linalg.norm(x - wc)) / L + 0.25)
        return PotentialValue(val.value + tail, val.error_estimate + far_err)
    outer_grid = GridDensity(work.lower, work.upper, g)
    val = direct_sum(outer_grid, x, kern, ball_int, kern.curvature)
    return PotentialValue(val.value, val.error_estimate + 2 * kern.rel_error * val.value)


def havin_mazya(mu: Measure, alpha: float, p: float, x, grid: int = 32) -> PotentialValue:
    """I_alpha((I_alpha mu)^(1/(p-1))) via a working grid plus an analytic far field."""
    n = mu.n
    _check_alpha(alpha, n)
    if not p > 1:
        raise DomainError("p must exceed 1")
    if not alpha * p < n:
        raise DomainError(f"alpha*p < n is required (alpha*p = {alpha * p:g})")
    return _nonlinear(mu, alpha, p, x, "riesz", grid, 0.0)


def v_potential(mu: Measure, alpha: float, p: float, x, grid: int = 48,
                margin: float = 5.0) -> PotentialValue:
    """J_alpha((J_alpha mu)^(1/(p-1))); the Bessel kernels decay like e^(-r)."""
    n = mu.n
    if not alpha > 0 or not p > 1:
        raise DomainError("alpha > 0 and p > 1 are required")
    if alpha * p > n * (1 + 1e-12):
        raise DomainError(f"alpha*p <= n is required (alpha*p = {alpha * p:g})")
    return _nonlinear(mu, alpha, p, x, "bessel", grid, margin)


# --- maximal function -----------------------------------------------------------


def _subsample(f: GridDensity, sub: int):
    key = ("subsample", sub)
    hit = f._cache.get(key)
    if hit is not None:
        return hit
    h = f.spacing
    offs = (np.arange(sub) + 0.5) / sub - 0.5
    lattice = np.stack(np.meshgrid(*([offs] * f.n), indexing="ij"), axis=-1).reshape(-1, f.n) * h
    centers = f.centers().reshape(-1, f.n)
    vals = f.values.ravel()
    pts = (centers[:, None, :] + lattice[None, :, :]).reshape(-1, f.n)
    v = np.repeat(vals, lattice.shape[0])
    if f.ball is not None:
        v = np.where(np.linalg.norm(pts - f.ball.center, axis=1) < f.ball.radius, v, 0.0)
    else:
        v = v * np.repeat(f.weights.ravel(), lattice.shape[0])
    out = (pts, v, float(np.prod(h)) / lattice.shape[0])
    f._cache[key] = out
    return out


def maximal(f: GridDensity, x, sub: int = 2, steps_per_octave: int = 4) -> float:
    """max over r_k = r_0 2^(k/4) of the average of |f| over B_r(x)."""
    n = f.n
    x = as_point(x, n)
    pts, v, dv = _subsample(f, sub)
    d = np.linalg.norm(pts - x, axis=1)
    order = np.argsort(d)
    d, v = d[order], np.abs(v[order])
    cum = np.concatenate([[0.0], np.cumsum(v)])
    r0 = float(f.spacing.max())
    corners = np.stack(np.meshgrid(*[[lo, hi] for lo, hi in zip(f.lower, f.upper)],
                                   indexing="ij"), axis=-1).reshape(-1, n)
    r_top = float(np.linalg.norm(corners - x, axis=1).max())
    k = np.arange(int(math.ceil(steps_per_octave * math.log2(max(r_top / r0, 1.0)))) + 1)
    radii = r0 * 2.0 ** (k / steps_per_octave)
    inside_box = np.all(x > f.lower) and np.all(x < f.upper)
    wall = float(min((x - f.lower).min(), (f.upper - x).min())) if inside_box else -1.0
    cnt = np.searchsorted(d, radii, side="left")
    best = 0.0
    for r, c in zip(radii, cnt):
        if c == 0:
            continue
        if r <= wall:
            avg = cum[c] / c
        else:
            avg = cum[c] * dv / ball_volume(n, r)
        best = max(best, float(avg))
    return best


# --- dispatch -------------------------------------------------------------------


def evaluate(spec: PotentialSpec, mu: Measure, x) -> PotentialValue:
    spec.validate(mu.n)
    op, a, p, s = spec.operator, spec.alpha, spec.p, spec.sigma
    if op == Operator.RIESZ_LAYERCAKE:
        return riesz_layercake(mu, a, x, spec.quad_rings)
    if op == Operator.RIESZ_KERNEL:
        return riesz_kernel(mu, a, x)
    if op == Operator.BESSEL:
        return bessel(mu, a, x)
    if op == Operator.WOLFF:
        return wolff(mu, a, p, spec.c, x, spec.quad_rings)
    if op == Operator.HAVIN_MAZYA:
        return havin_mazya(mu, a, p, x, spec.grid)
    if op == Operator.V_POTENTIAL:
        return v_potential(mu, a, p, x, spec.grid)
    if not isinstance(mu, GridDensity):
        raise DomainError(f"{op.value} needs a grid density")
    if op == Operator.NEWTONIAN_BALL:
        return newtonian_ball(mu, x)
    if op == Operator.TRUNCATED_NEWTONIAN:
        if math.isinf(spec.r_max):
            raise DomainError("TruncatedNewtonian needs a finite r_max")
        return truncated_newtonian(mu, spec.r_max, x)
    if op == Operator.COMPOSITE_NN:
        return composite_NN(mu, s, x)
    return wolff_sigma(mu, s, x, spec.quad_rings)
