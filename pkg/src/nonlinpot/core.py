"""Measures, balls and the fundamental-solution kernel.

Three measure variants are supported: finite sums of point masses,
cell-centred densities on an axis-aligned box, and radially symmetric
measures given by their cumulative mass profile about the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, gamma as gamma_fn

SCHEMA_VERSION = 1


class DomainError(ValueError):
    """Raised when an input violates a named mathematical precondition."""


def check_dimension(n: int) -> int:
    if int(n) != n or n < 2:
        raise DomainError(f"dimension n must be an integer >= 2, got {n}")
    return int(n)


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / gamma_fn(n / 2)


def ball_volume(n: int, r: float = 1.0) -> float:
    return sphere_area(n) * r**n / n


def omega(n: int) -> float:
    """Normalisation making omega * Gamma a fundamental solution of -Laplace."""
    n = check_dimension(n)
    if n == 2:
        return 1.0 / (2.0 * math.pi)
    return 1.0 / ((n - 2) * sphere_area(n))


def gamma_kernel(r, n: int):
    """Gamma(r) = r^(2-n) for n >= 3 and log(2/r) for n = 2."""
    n = check_dimension(n)
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError("gamma_kernel requires r > 0")
    out = np.log(2.0 / r) if n == 2 else r ** (2.0 - n)
    return float(out) if out.ndim == 0 else out


def as_point(x, n: int | None = None) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1:
        raise DomainError("a point must be a 1-D coordinate vector")
    if not np.all(np.isfinite(p)):
        raise DomainError("point coordinates must be finite")
    if n is not None and p.size != n:
        raise DomainError(f"point has {p.size} coordinates, expected {n}")
    return p


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise DomainError("ball radius must be positive and finite")

    @property
    def n(self) -> int:
        return self.center.size

    @property
    def volume(self) -> float:
        return ball_volume(self.n, self.radius)

    def contains(self, x, closed: bool = True) -> bool:
        d = np.linalg.norm(as_point(x, self.n) - self.center)
        tol = 1e-12 * self.radius
        return d <= self.radius + tol if closed else d < self.radius

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "radius": self.radius}


class Measure:
    """Common interface of the three measure variants."""

    n: int

    def total_mass(self) -> float:
        raise NotImplementedError

    def ball_mass_profile(self, x, radii) -> tuple[np.ndarray, np.ndarray]:
        """Return (mu(B_r(x)), error) for an array of radii."""
        raise NotImplementedError

    def ball_mass(self, x, r: float) -> float:
        if not r > 0:
            raise DomainError("ball_mass requires r > 0")
        m, _ = self.ball_mass_profile(x, np.array([r], dtype=float))
        return float(m[0])

    def scaled(self, t: float) -> "Measure":
        raise NotImplementedError

    def saturation_radius(self, x) -> float:
        """Smallest R with mu(B_r(x)) equal to the total mass for all r > R."""
        raise NotImplementedError

    def inner_radius(self, x) -> float:
        """Largest r with mu(B_r(x)) = 0."""
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    def discrete(self) -> tuple[np.ndarray, np.ndarray]:
        """Point cloud and masses used by direct kernel sums."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def scale_measure(mu: Measure, t: float) -> Measure:
    if not (t > 0 and math.isfinite(t)):
        raise DomainError("scale factor must be positive and finite")
    return mu.scaled(t)


def total_mass(mu: Measure) -> float:
    return mu.total_mass()


def ball_mass(mu: Measure, x, r: float) -> float:
    return mu.ball_mass(x, r)


@dataclass(frozen=True)
class AtomicMeasure(Measure):
    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if pts.shape[0] != w.size:
            raise DomainError("points and masses differ in length")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise DomainError("atom data must be finite")
        if np.any(w < 0):
            raise DomainError("masses must be nonnegative")
        check_dimension(pts.shape[1])
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", w)

    @classmethod
    def dirac(cls, point, mass: float = 1.0) -> "AtomicMeasure":
        return cls(np.atleast_2d(point), [mass])

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def total_mass(self) -> float:
        return float(self.masses.sum())

    def _dist(self, x) -> np.ndarray:
        return np.linalg.norm(self.points - as_point(x, self.n), axis=1)

    def ball_mass_profile(self, x, radii):
        radii = np.asarray(radii, dtype=float)
        d = self._dist(x)
        order = np.argsort(d)
        ds, cum = d[order], np.concatenate([[0.0], np.cumsum(self.masses[order])])
        # open balls: count atoms with d < r
        idx = np.searchsorted(ds, radii, side="left")
        return cum[idx], np.zeros_like(radii)

    def scaled(self, t):
        return AtomicMeasure(self.points.copy(), self.masses * t)

    def saturation_radius(self, x) -> float:
        d = self._dist(x)[self.masses > 0]
        return float(d.max()) if d.size else 0.0

    def inner_radius(self, x) -> float:
        d = self._dist(x)[self.masses > 0]
        return float(d.min()) if d.size else math.inf

    def diameter(self) -> float:
        p = self.points
        if len(p) < 2:
            return 1.0
        return float(max(np.ptp(p, axis=0).max() * math.sqrt(self.n), 1e-300))

    def discrete(self):
        return self.points, self.masses

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "variant": "atomic",
            "n": self.n,
            "points": self.points.tolist(),
            "masses": self.masses.tolist(),
        }


@dataclass(frozen=True)
class GridDensity(Measure):
    """Cell-centred density on the box [lower, upper].

    ``weights`` holds the fraction of each cell inside the support (1 by
    default) so that densities restricted to a ball integrate correctly.
    Cell masses are ``values * weights * cell_volume``.
    """

    lower: np.ndarray
    upper: np.ndarray
    values: np.ndarray
    weights: np.ndarray | None = None
    ball: Ball | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float)
        if lo.size != hi.size or v.ndim != lo.size:
            raise DomainError("box corners and value array disagree on dimension")
        check_dimension(lo.size)
        if np.any(hi <= lo):
            raise DomainError("box upper corner must exceed lower corner")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise DomainError("grid values must be finite and nonnegative")
        w = np.ones_like(v) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != v.shape or np.any(w < 0) or np.any(w > 1 + 1e-12):
            raise DomainError("weights must match values and lie in [0, 1]")
        for a in (lo, hi, v, w):
            a.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    # construction helpers

    @classmethod
    def from_function(cls, func, lower, upper, cells) -> "GridDensity":
        g = cls(lower, upper, np.zeros(_cells_tuple(cells, len(np.ravel(lower)))))
        return cls(g.lower, g.upper, np.asarray(func(g.centers()), dtype=float))

    @classmethod
    def on_ball(cls, func, ball: Ball, cells, subsamples: int = 6) -> "GridDensity":
        """Density ``func`` restricted to ``ball``, on the ball's bounding box."""
        lo = ball.center - ball.radius
        hi = ball.center + ball.radius
        shape = _cells_tuple(cells, ball.n)
        g = cls(lo, hi, np.zeros(shape))
        vals = func(g.centers()) if callable(func) else np.full(shape, float(func))
        w = cell_fraction(g, [ball], subsamples)
        vals = np.where(w > 0, np.asarray(vals, dtype=float), 0.0)
        return cls(lo, hi, vals, w, ball)

    # geometry

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / np.array(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def rho(self) -> float:
        """Radius of the ball with the same volume as one cell."""
        return (self.cell_volume / ball_volume(self.n)) ** (1.0 / self.n)

    @property
    def half_diagonal(self) -> float:
        return 0.5 * float(np.linalg.norm(self.spacing))

    def axes(self) -> list[np.ndarray]:
        h = self.spacing
        return [self.lower[k] + (np.arange(self.shape[k]) + 0.5) * h[k] for k in range(self.n)]

    def centers(self) -> np.ndarray:
        """Cell centres, shape ``cells + (n,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def masses(self) -> np.ndarray:
        return self.values * self.weights * self.cell_volume

    def with_values(self, values, weights=None) -> "GridDensity":
        w = self.weights if weights is None else weights
        return GridDensity(self.lower, self.upper, values, w, self.ball)

    # norms over the support

    def norm(self, s: float) -> float:
        w = self.weights * self.cell_volume
        if math.isinf(s):
            live = self.weights > 0
            return float(self.values[live].max()) if live.any() else 0.0
        return float((w * self.values**s).sum() ** (1.0 / s))

    def support_volume(self) -> float:
        return float(self.weights.sum() * self.cell_volume)

    # Measure interface

    def total_mass(self) -> float:
        return float(self.masses().sum())

    def _sorted_profile(self, x):
        key = tuple(np.round(as_point(x, self.n), 15))
        hit = self._cache.get(("profile", key))
        if hit is not None:
            return hit
        pts, m = self.discrete()
        d = np.linalg.norm(pts - as_point(x, self.n), axis=1)
        order = np.argsort(d)
        d, m = d[order], m[order]
        out = (d, np.concatenate([[0.0], np.cumsum(m)]), m)
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[("profile", key)] = out
        return out

    def ball_mass_profile(self, x, radii):
        """Each cell is treated as a ball of equal volume centred at the cell centre."""
        radii = np.asarray(radii, dtype=float)
        d, cm, m = self._sorted_profile(x)
        rho = self.rho
        mass = np.empty_like(radii)
        for k, r in enumerate(radii):
            i0 = np.searchsorted(d, r - rho, side="right")
            i1 = np.searchsorted(d, r + rho, side="left")
            frac = lens_fraction(r, d[i0:i1], rho, self.n)
            mass[k] = cm[i0] + float(m[i0:i1] @ frac)
        mass = np.clip(mass, 0.0, cm[-1])
        hd = self.half_diagonal
        lo = np.searchsorted(d, radii - hd, side="left")
        hi = np.searchsorted(d, radii + hd, side="right")
        vmax = float(self.values.max()) if self.values.size else 0.0
        err = (hi - lo) * vmax * self.cell_volume
        return mass, err.astype(float)

    def scaled(self, t):
        return GridDensity(self.lower, self.upper, self.values * t, self.weights, self.ball)

    def saturation_radius(self, x) -> float:
        pts, m = self.discrete()
        if pts.shape[0] == 0:
            return 0.0
        return float(np.linalg.norm(pts - as_point(x, self.n), axis=1).max() + self.rho)

    def inner_radius(self, x) -> float:
        pts, m = self.discrete()
        if pts.shape[0] == 0:
            return math.inf
        return max(float(np.linalg.norm(pts - as_point(x, self.n), axis=1).min() - self.rho), 0.0)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def discrete(self):
        m = self.masses()
        live = m > 0
        return self.centers()[live], m[live]

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "variant": "grid",
            "n": self.n,
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "cells": list(self.shape),
            "values": self.values.ravel().tolist(),
        }
        if not np.all(self.weights == 1.0):
            out["weights"] = self.weights.ravel().tolist()
        if self.ball is not None:
            out["ball"] = self.ball.to_dict()
        return out


@dataclass(frozen=True)
class RadialMeasure(Measure):
    """Radially symmetric measure about the origin, mu(B_r(0)) tabulated."""

    profile_is_bracket = True

    n_dim: int
    knot_radii: np.ndarray
    cumulative_mass: np.ndarray

    def __post_init__(self):
        check_dimension(self.n_dim)
        r = np.asarray(self.knot_radii, dtype=float).ravel()
        c = np.asarray(self.cumulative_mass, dtype=float).ravel()
        if r.size == 0 or r.size != c.size:
            raise DomainError("radial knots and cumulative masses must be nonempty and equal length")
        if np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise DomainError("radial knots must be positive and strictly increasing")
        if np.any(c < 0) or np.any(np.diff(c) < 0) or not np.all(np.isfinite(c)):
            raise DomainError("cumulative mass must be finite, nonnegative and nondecreasing")
        r.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "knot_radii", r)
        object.__setattr__(self, "cumulative_mass", c)

    @property
    def n(self) -> int:
        return self.n_dim

    def total_mass(self) -> float:
        return float(self.cumulative_mass[-1])

    def _centred(self, r):
        rr = np.concatenate([[0.0], self.knot_radii])
        cc = np.concatenate([[0.0], self.cumulative_mass])
        return np.interp(np.maximum(r, 0.0), rr, cc)

    def ball_mass_profile(self, x, radii):
        radii = np.asarray(radii, dtype=float)
        off = float(np.linalg.norm(as_point(x, self.n)))
        if off == 0.0:
            return self._centred(radii), np.zeros_like(radii)
        # each shell between consecutive knots contributes its mass times the
        # fraction of a sphere inside B_r(x); the fraction is bracketed by its
        # values at the shell's inner, middle and outer radius
        outer = self.knot_radii
        inner = np.concatenate([[0.0], outer[:-1]])
        dm = np.diff(np.concatenate([[0.0], self.cumulative_mass]))
        fr = np.stack([sphere_fraction(s[:, None], off, radii[None, :], self.n_dim)
                       for s in (inner, 0.5 * (inner + outer), outer)])
        lo = dm @ fr.min(axis=0)
        hi = dm @ fr.max(axis=0)
        return 0.5 * (lo + hi), 0.5 * (hi - lo)

    def scaled(self, t):
        return RadialMeasure(self.n_dim, self.knot_radii, self.cumulative_mass * t)

    def saturation_radius(self, x) -> float:
        return float(self.knot_radii[-1] + np.linalg.norm(as_point(x, self.n)))

    def inner_radius(self, x) -> float:
        return 0.0

    def diameter(self) -> float:
        return 2.0 * float(self.knot_radii[-1])

    def discrete(self):
        # shells at mid-knot radii are not point masses; kernel sums use the
        # layer-cake route for this variant
        raise DomainError("radial measures have no discrete representation")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "variant": "radial",
            "n": self.n,
            "knot_radii": self.knot_radii.tolist(),
            "cumulative_mass": self.cumulative_mass.tolist(),
        }


def _cells_tuple(cells, n: int) -> tuple:
    if np.isscalar(cells):
        return (int(cells),) * n
    cells = tuple(int(c) for c in cells)
    if len(cells) != n:
        raise DomainError("cells_per_axis has the wrong length")
    return cells


def _cap_volume(R, h, n):
    """Volume of the cap of height h in (0, 2R) cut from the n-ball of radius R."""
    h = np.clip(h, 0.0, 2 * R)
    small = np.minimum(h, 2 * R - h)
    x = np.clip((2 * R * small - small * small) / (R * R), 0.0, 1.0)
    cap = 0.5 * ball_volume(n, 1.0) * R**n * betainc((n + 1) / 2, 0.5, x)
    full = ball_volume(n, 1.0) * R**n
    return np.where(h <= R, cap, full - cap)


def sphere_fraction(s, d: float, r, n: int):
    """Fraction of the sphere |y| = s lying in the ball B_r(x) with |x| = d > 0."""
    s, r = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(r, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (s * s + d * d - r * r) / (2 * s * d)
    t = np.where(s > 0, t, np.where(r > d, -np.inf, np.inf))
    tc = np.clip(t, -1.0, 1.0)
    cap = 0.5 * betainc((n - 1) / 2, 0.5, 1.0 - tc * tc)
    return np.where(tc >= 0, cap, 1.0 - cap)


def lens_fraction(r: float, d, rho: float, n: int):
    """|B_r(0) cap B_rho(d)| / |B_rho| for an array of centre distances d."""
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    if r <= 0:
        return out
    inner = d <= rho - r
    out[inner] = (r / rho) ** n
    whole = d <= r - rho
    out[whole] = 1.0
    mid = ~inner & ~whole & (d < r + rho)
    if np.any(mid):
        dm = d[mid]
        a = (dm * dm + r * r - rho * rho) / (2 * dm)
        vol = _cap_volume(r, r - a, n) + _cap_volume(rho, rho - (dm - a), n)
        out[mid] = np.clip(vol / ball_volume(n, rho), 0.0, 1.0)
    return out


def cell_fraction(grid: GridDensity, balls: list[Ball], subsamples: int = 6) -> np.ndarray:
    """Fraction of each cell lying in the intersection of ``balls``.

    Cells entirely inside or outside are classified from their centre;
    cells cut by a sphere are subsampled on a regular ``subsamples^n`` lattice.
    """
    centers = grid.centers()
    hd = grid.half_diagonal
    inside = np.ones(grid.shape, dtype=bool)
    cut = np.zeros(grid.shape, dtype=bool)
    for b in balls:
        d = np.linalg.norm(centers - b.center, axis=-1)
        inside &= d <= b.radius - hd
        cut |= np.abs(d - b.radius) < hd
    frac = inside.astype(float)
    cut &= ~inside
    # drop cut cells that are certainly outside some ball
    for b in balls:
        d = np.linalg.norm(centers - b.center, axis=-1)
        cut &= d < b.radius + hd
    idx = np.argwhere(cut)
    if idx.size == 0:
        return frac
    h = grid.spacing
    offs = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    sub = np.stack(np.meshgrid(*([offs] * grid.n), indexing="ij"), axis=-1).reshape(-1, grid.n) * h
    chunk = max(1, 200_000 // sub.shape[0])
    for start in range(0, len(idx), chunk):
        block = idx[start:start + chunk]
        c = centers[tuple(block.T)]
        pts = c[:, None, :] + sub[None, :, :]
        ok = np.ones(pts.shape[:2], dtype=bool)
        for b in balls:
            ok &= np.linalg.norm(pts - b.center, axis=-1) < b.radius
        frac[tuple(block.T)] = ok.mean(axis=1)
    return frac


def check_schema_version(data: dict, what: str) -> None:
    """Accept a missing version (hand-written files) or the current one."""
    if not isinstance(data, dict):
        raise DomainError(f"{what} JSON must be an object")
    v = data.get("schema_version", SCHEMA_VERSION)
    if v != SCHEMA_VERSION:
        raise DomainError(f"{what} JSON has schema_version {v!r}; this build reads {SCHEMA_VERSION}")


def measure_from_dict(data: dict) -> Measure:
    """Inverse of ``Measure.to_dict``."""
    check_schema_version(data, "measure")
    try:
        variant = data["variant"]
        if variant == "atomic":
            return AtomicMeasure(np.asarray(data["points"], dtype=float).reshape(-1, int(data["n"])),
                                 data["masses"])
        if variant == "grid":
            cells = tuple(int(c) for c in data["cells"])
            vals = np.asarray(data["values"], dtype=float).reshape(cells)
            w = data.get("weights")
            w = None if w is None else np.asarray(w, dtype=float).reshape(cells)
            b = data.get("ball")
            ball = None if b is None else Ball(np.asarray(b["center"]), float(b["radius"]))
            return GridDensity(data["lower"], data["upper"], vals, w, ball)
        if variant == "radial":
            return RadialMeasure(int(data["n"]), data["knot_radii"], data["cumulative_mass"])
    except KeyError as exc:
        raise DomainError(f"measure JSON is missing field {exc.args[0]!r}") from None
    raise DomainError(f"unknown measure variant {data.get('variant')!r}")
