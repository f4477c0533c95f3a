"""Numerical building blocks shared by the potential operators.

* ``layercake``: integrals of the form  int (mu(B_r(x)))^q r^(-gamma-1) e^(-c r) dr
  on log-spaced rings, bracketed by lower and upper Riemann sums.
* ``direct_sum`` / ``grid_field``: kernel sums over grid cells, with the cell
  that contains the evaluation point replaced by the kernel integral over a
  ball of equal volume.
* ``BesselKernel``: tabulated Bessel kernels from heat-kernel subordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve
from scipy.special import gammaln

from .core import AtomicMeasure, DomainError, GridDensity, Measure, as_point, sphere_area

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class PotentialValue:
    value: float
    error_estimate: float
    note: str = ""

    def __post_init__(self):
        if self.value < 0 or self.error_estimate < 0:
            raise ValueError("potential values and errors are nonnegative")

    def scaled(self, t: float) -> "PotentialValue":
        return PotentialValue(self.value * t, self.error_estimate * t, self.note)


def radial_weight(a, b, gamma: float, c: float):
    """int_a^b r^(-gamma-1) e^(-c r) dr for arrays a < b (b may be inf)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if c == 0.0:
        if gamma == 0.0:
            return np.log(b / a)
        if gamma < 0 and np.any(np.isinf(b)):
            return np.full(np.broadcast(a, b).shape, math.inf)
        with np.errstate(divide="ignore"):
            return (a ** -gamma - np.where(np.isinf(b), 0.0, b ** -gamma)) / gamma
    out = np.empty(np.broadcast(a, b).shape)
    finite = np.isfinite(b)
    if np.any(finite):
        la, lb = np.log(a[finite] if a.ndim else a), np.log(b[finite] if b.ndim else b)
        half, mid = 0.5 * (lb - la), 0.5 * (lb + la)
        t = mid[..., None] + half[..., None] * _GL_NODES
        f = np.exp(-gamma * t - c * np.exp(t))
        out[finite] = half * (f @ _GL_WEIGHTS)
    for idx in np.argwhere(~finite):
        lo = float(a[tuple(idx)] if a.ndim else a)
        val, _ = integrate.quad(lambda r: r ** (-gamma - 1) * math.exp(-c * r), lo, math.inf,
                                limit=200)
        out[tuple(idx)] = val
    return out


def layercake(mu: Measure, x, q: float, gamma: float, c: float = 0.0,
              rings: int = 512, r_max: float = math.inf,
              r_min_rel: float = 1e-6) -> PotentialValue:
    """Bracketed ring quadrature of  int_0^r_max M(r)^q r^(-gamma-1) e^(-c r) dr."""
    x = as_point(x, mu.n)
    total = mu.total_mass()
    if total == 0.0:
        return PotentialValue(0.0, 0.0)
    n = mu.n
    if isinstance(mu, AtomicMeasure):
        d = np.linalg.norm(mu.points - x, axis=1)
        if np.any((d == 0) & (mu.masses > 0)):
            return PotentialValue(math.inf, math.inf, "atom at evaluation point")
    r_in = mu.inner_radius(x)
    r_sat = mu.saturation_radius(x)
    r_floor = r_min_rel * mu.diameter()
    lo = min(max(r_in, r_floor), r_max)
    hi = min(max(r_sat, lo), r_max)

    value = err = 0.0
    # below the first ring the mass grows at most like the volume
    if r_in < lo:
        m_lo = float(mu.ball_mass_profile(x, np.array([lo]))[0][0])
        if m_lo > 0:
            if n * q <= gamma:
                return PotentialValue(math.inf, math.inf, "integrand not integrable at r = 0")
            small = m_lo**q * lo ** (-gamma) / (n * q - gamma)
            value += small
            err += small

    if hi > lo:
        edges = np.geomspace(lo, hi, rings + 1)
        m, e = mu.ball_mass_profile(x, edges)
        if not getattr(mu, "profile_is_bracket", False):
            e = np.zeros_like(m)
        w = radial_weight(edges[:-1], edges[1:], gamma, c)
        lower = np.maximum(m - e, 0.0)[:-1] ** q
        upper = (np.minimum(m + e, total))[1:] ** q
        lo_sum, up_sum = float(w @ lower), float(w @ upper)
        value += 0.5 * (lo_sum + up_sum)
        err += 0.5 * (up_sum - lo_sum)

    if hi < r_max:
        tail = float(radial_weight(np.array(hi), np.array(r_max), gamma, c))
        value += total**q * tail
    err += 1e-14 * value
    return PotentialValue(value, err)


# --- grid kernel sums -----------------------------------------------------------


def riesz_ball_integral(n: int, alpha: float, rho: float) -> float:
    """int_{B_rho} |y|^(alpha-n) dy."""
    return sphere_area(n) * rho**alpha / alpha


def cell_index(grid: GridDensity, x) -> tuple | None:
    idx = np.floor((as_point(x, grid.n) - grid.lower) / grid.spacing).astype(int)
    if np.any(idx < 0) or np.any(idx >= np.array(grid.shape)):
        return None
    return tuple(idx)


def direct_sum(grid: GridDensity, x, kernel, ball_integral: float, curvature=None,
               density=None) -> PotentialValue:
    """sum_cells m_i K(|x - c_i|) with the singular-cell rule.

    ``density`` overrides the grid values (used for composed fields).
    ``curvature(d)`` bounds |K''| and feeds the midpoint-rule error estimate.
    """
    vals = grid.values if density is None else density
    mass = vals * grid.weights * grid.cell_volume
    x = as_point(x, grid.n)
    live = mass > 0
    if not live.any():
        return PotentialValue(0.0, 0.0)
    home = cell_index(grid, x)
    centers = grid.centers()
    if home is not None:
        live[home] = False
    d = np.linalg.norm(centers[live] - x, axis=1)
    m = mass[live]
    kv = kernel(d)
    value = float(m @ kv)
    err = 0.0
    near = d < 2.0 * grid.half_diagonal
    err += 0.5 * float(m[near] @ kv[near])
    if curvature is not None:
        h2 = float(grid.spacing @ grid.spacing)
        err += float(m[~near] @ curvature(d[~near])) * h2 / 24.0
    if home is not None and mass[home] > 0:
        self_term = float(vals[home] * grid.weights[home]) * ball_integral
        value += self_term
        err += self_term
    return PotentialValue(value, err + 1e-14 * value)


def grid_field(grid: GridDensity, kernel, ball_integral: float, density=None) -> np.ndarray:
    """Kernel sum evaluated at every cell centre by FFT convolution."""
    vals = grid.values if density is None else density
    mass = vals * grid.weights * grid.cell_volume
    shape = np.array(grid.shape)
    offsets = [np.arange(-(k - 1), k) * h for k, h in zip(shape, grid.spacing)]
    mesh = np.meshgrid(*offsets, indexing="ij")
    dist = np.sqrt(sum(m * m for m in mesh))
    centre = tuple(shape - 1)
    dist[centre] = 1.0
    stencil = kernel(dist)
    stencil[centre] = ball_integral / grid.cell_volume
    field = fftconvolve(stencil, mass, mode="valid")
    return np.maximum(field, 0.0)


# --- Bessel kernels -------------------------------------------------------------


def bessel_riesz_constant(alpha: float, n: int) -> float:
    """Smallest c with G_alpha(r) <= c r^(alpha-n)/(n-alpha), for alpha < n."""
    if not 0 < alpha < n:
        raise DomainError("the Bessel/Riesz domination constant needs 0 < alpha < n")
    return math.exp(math.log(n - alpha) + gammaln((n - alpha) / 2) - alpha * math.log(2)
                    - (n / 2) * math.log(math.pi) - gammaln(alpha / 2))


def _subordination(r: float, alpha: float, n: int, ds: float) -> float:
    lo = math.log(max(r * r / 240.0, 1e-300)) if r > 0 else -60.0
    lo = max(lo, -700.0)
    hi = math.log(60.0)
    s = np.arange(lo, hi + ds, ds)
    expo = (0.5 * (alpha - n)) * s - np.exp(s) - 0.25 * r * r * np.exp(-s)
    expo -= 0.5 * n * math.log(4 * math.pi) + gammaln(alpha / 2)
    return float(np.trapezoid(np.exp(expo), s))


class BesselKernel:
    """G_alpha on R^n, tabulated in log-log coordinates."""

    R_LO, R_HI = 1e-8, 60.0

    def __init__(self, alpha: float, n: int, nodes: int = 600):
        if alpha <= 0:
            raise DomainError("Bessel kernels need alpha > 0")
        self.alpha, self.n = float(alpha), int(n)
        self.exact = math.isclose(alpha, 2.0) and n == 3
        r = np.geomspace(self.R_LO, self.R_HI, nodes)
        fine = np.array([_subordination(v, alpha, n, 0.02) for v in r])
        coarse = np.array([_subordination(v, alpha, n, 0.04) for v in r])
        if np.any(fine <= 0):
            raise DomainError("Bessel subordination quadrature did not converge")
        self.rel_error = float(np.max(np.abs(fine - coarse) / fine))
        self._r, self._g = r, fine
        self._spline = CubicSpline(np.log(r), np.log(fine))
        lr = np.log(r[:2])
        self._slope0 = float((np.log(fine[1]) - np.log(fine[0])) / (lr[1] - lr[0]))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.exact:
            with np.errstate(divide="ignore"):
                return np.exp(-r) / (4 * math.pi * r)
        out = np.zeros_like(r)
        mid = (r >= self.R_LO) & (r <= self.R_HI)
        out[mid] = np.exp(self._spline(np.log(r[mid])))
        small = r < self.R_LO
        if np.any(small):
            a, n = self.alpha, self.n
            g0 = self._g[0]
            if a < n:
                out[small] = g0 * (r[small] / self.R_LO) ** (a - n)
            elif a == n:
                out[small] = g0 * (1.0 - self._slope0 * np.log(self.R_LO / r[small]))
            else:
                out[small] = g0
        return out

    def ball_integral(self, rho: float) -> float:
        """int_{B_rho} G_alpha(|y|) dy."""
        f = lambda t: float(self(np.array([math.exp(t)]))[0]) * math.exp(self.n * t)
        lo = math.log(rho) - 40.0
        val, _ = integrate.quad(f, lo, math.log(rho), limit=200)
        return sphere_area(self.n) * val

    def curvature(self, d):
        # crude bound used only for error estimates
        return self(d) * ((self.n - self.alpha + 1) ** 2 / np.maximum(d, 1e-300) ** 2 + 1.0)


@lru_cache(maxsize=32)
def bessel_kernel(alpha: float, n: int) -> BesselKernel:
    return BesselKernel(alpha, n)

