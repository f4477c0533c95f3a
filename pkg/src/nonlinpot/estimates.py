"""Numerical verifiers for pointwise and sup-norm estimates of nonlinear potentials.

Each verifier samples both sides of an inequality on a probe set, fits the
unspecified constant as the largest observed ratio and returns an
``EstimateReport``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.stats import qmc

from .core import AtomicMeasure, Ball, DomainError, GridDensity, Measure, as_point, sphere_area
from .potentials import (composite_field, composite_NN, havin_mazya, maximal, v_potential,
                         wolff, wolff_phi)
from .quadrature import PotentialValue, direct_sum, layercake

ESTIMATE_IDS = (
    "Thm41_ub1", "Thm41_ub2", "Cor41_super", "Cor41_crit", "Thm42_lower", "Thm42_upper",
    "Thm42_phi", "Thm43_a", "Thm43_b", "Thm44_est1", "Thm44_est2", "Thm44_est3",
    "Thm44_est4", "Lemma42",
)


class Verdict(str, enum.Enum):
    CONSISTENT = "Consistent"
    VIOLATED = "Violated"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Sample:
    descriptor: str
    lhs: float
    rhs: float
    lhs_error: float = 0.0

    @property
    def ratio(self) -> float:
        if self.rhs > 0 and math.isfinite(self.lhs):
            return self.lhs / self.rhs
        return math.nan


@dataclass
class EstimateReport:
    estimate_id: str
    samples: list[Sample]
    max_ratio: float
    min_ratio: float
    fitted_C: float
    verdict: Verdict
    params: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "estimate_id": self.estimate_id,
            "params": self.params,
            "fitted_C": _json_float(self.fitted_C),
            "max_ratio": _json_float(self.max_ratio),
            "min_ratio": _json_float(self.min_ratio),
            "verdict": self.verdict.value,
            "notes": self.notes,
            "samples": [
                {"input": s.descriptor, "lhs": _json_float(s.lhs), "rhs": _json_float(s.rhs),
                 "lhs_error": _json_float(s.lhs_error)}
                for s in self.samples
            ],
        }

    def csv_rows(self) -> list[list]:
        return [[self.estimate_id, s.descriptor, repr(s.lhs), repr(s.rhs), repr(s.lhs_error),
                 repr(s.ratio)] for s in self.samples]


CSV_HEADER = ["estimate_id", "input", "lhs", "rhs", "lhs_error", "ratio"]


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else str(v)


def make_report(estimate_id: str, samples: list[Sample], params: dict | None = None,
                notes: list[str] | None = None, reference_C: float | None = None,
                hypothesis_ok: bool = True) -> EstimateReport:
    """Fit C as the largest ratio and decide the verdict."""
    notes = list(notes or [])
    params = dict(params or {})
    ratios = np.array([s.ratio for s in samples], dtype=float)
    finite = ratios[np.isfinite(ratios)]
    max_r = float(finite.max()) if finite.size else math.nan
    min_r = float(finite.min()) if finite.size else math.nan
    verdict = Verdict.CONSISTENT
    scale = max([abs(s.lhs) for s in samples if math.isfinite(s.lhs)] + [abs(s.rhs) for s in samples] + [0.0])
    for s in samples:
        tol = s.lhs_error + 1e-12 * scale
        if not math.isfinite(s.lhs) and math.isfinite(s.rhs):
            verdict = Verdict.VIOLATED
            notes.append(f"non-finite left side at {s.descriptor}")
        elif s.rhs <= 0 and s.lhs > tol:
            verdict = Verdict.VIOLATED
            notes.append(f"positive left side against vanishing right side at {s.descriptor}")
        elif reference_C is not None and s.lhs > reference_C * s.rhs + tol:
            verdict = Verdict.VIOLATED
            notes.append(f"reference constant {reference_C:g} exceeded at {s.descriptor}")
    if verdict != Verdict.VIOLATED:
        if not samples or scale == 0.0 or not finite.size:
            verdict = Verdict.INCONCLUSIVE
            notes.append("all samples vanish; nothing to compare")
        elif not hypothesis_ok:
            verdict = Verdict.INCONCLUSIVE
    if reference_C is not None:
        params["reference_C"] = reference_C
    return EstimateReport(estimate_id, samples, max_r, min_r, max_r, verdict, params, notes)


# --- probe sets --------------------------------------------------------------------


def quasi_random_points(n: int, count: int, lower, upper, seed: int = 0) -> np.ndarray:
    sampler = qmc.Halton(d=n, scramble=True, seed=seed)
    return qmc.scale(sampler.random(count), np.asarray(lower, float), np.asarray(upper, float))


def points_in_ball(ball: Ball, count: int, seed: int = 0, shrink: float = 0.999) -> np.ndarray:
    """Quasi-random points in a ball (rejection from the bounding cube)."""
    n = ball.n
    pts = quasi_random_points(n, 4 * count * 2**n, -np.ones(n), np.ones(n), seed)
    pts = pts[np.linalg.norm(pts, axis=1) < 1.0][:count]
    return ball.center + shrink * ball.radius * pts


def default_probes(mu: Measure, count: int = 64, seed: int = 0, near: float = 1e-3) -> np.ndarray:
    """Quasi-random points around the support plus near-singular points next to atoms."""
    pts, _ = mu.discrete()
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.5 * max(float(np.max(hi - lo)), 1.0)
    probes = [quasi_random_points(mu.n, count, lo - pad, hi + pad, seed)]
    if isinstance(mu, AtomicMeasure):
        e = np.ones(mu.n) / math.sqrt(mu.n)
        probes.append(mu.points[mu.masses > 0] + near * e)
    return np.vstack(probes)


# --- sup bounds for the composite Newtonian potential ---------------------------


def thm41_branch(n: int, sigma: float, s: float) -> str:
    if n < 3:
        raise DomainError("this estimate needs n >= 3")
    crit = 2.0 / (n - 2)
    s_crit = n * sigma / (2.0 * (sigma + 1.0))
    if sigma >= crit - 1e-12 and math.isclose(s, s_crit, rel_tol=1e-12):
        return "ub2"
    if sigma > crit and 0 < s < s_crit:
        return "ub1"
    if sigma < crit - 1e-12:
        raise DomainError(f"sigma must be at least 2/(n-2) = {crit:g}")
    raise DomainError(f"need 0 < s < n*sigma/(2(sigma+1)) = {s_crit:g} (or equality); got s = {s:g}")


def _thm41_rhs(f: GridDensity, sigma: float, s: float, branch: str) -> float:
    n = f.n
    fs, finf = f.norm(s), f.norm(math.inf)
    if fs == 0:
        return 0.0
    if branch == "ub1":
        return fs ** (2 * s * (sigma + 1) / n) * finf ** (((n - 2 * s) * sigma - 2 * s) / n)
    vol = f.support_volume()
    return fs**sigma * math.log(math.e * vol ** (1.0 / s) * finf / fs)


def _sup_composite(g: GridDensity, sigma: float, probes: np.ndarray) -> list[Sample]:
    """Samples of N((Ng)^sigma) at probe points and at the grid maximum in the ball."""
    inner, outer = composite_field(g, sigma)
    centers = g.centers()
    inside = np.linalg.norm(centers - g.ball.center, axis=-1) <= g.ball.radius
    out = []
    if inside.any():
        k = np.unravel_index(np.argmax(np.where(inside, outer, -np.inf)), outer.shape)
        out.append(("grid-max@" + ",".join(f"{c:.6g}" for c in centers[k]), float(outer[k]), 0.0))
    for x in probes:
        v = composite_NN(g, sigma, x, inner)
        out.append(("probe@" + ",".join(f"{c:.6g}" for c in x), v.value, v.error_estimate))
    return out


def verify_thm41(f: GridDensity, sigma: float, s: float, probes: int = 16, seed: int = 0,
                 reference_C: float | None = None, scale_t: float = 2.5) -> EstimateReport:
    if f.ball is None:
        raise DomainError("the density must be restricted to a ball")
    branch = thm41_branch(f.n, sigma, s)
    eid = "Thm41_ub1" if branch == "ub1" else "Thm41_ub2"
    rhs = _thm41_rhs(f, sigma, s, branch)
    pts = points_in_ball(f.ball, probes, seed)
    raw = _sup_composite(f, sigma, pts)
    samples = [Sample(d, v, rhs, e) for d, v, e in raw]
    notes = []
    # both sides are homogeneous of degree sigma in f
    ft = f.scaled(scale_t)
    lhs_t = float(composite_field(ft, sigma)[1].max())
    lhs_1 = float(composite_field(f, sigma)[1].max())
    rhs_t = _thm41_rhs(ft, sigma, s, branch)
    params = {"n": f.n, "sigma": sigma, "s": s, "branch": branch, "cells": list(f.shape)}
    if lhs_1 > 0 and rhs > 0:
        params["homogeneity_lhs_rel_error"] = abs(lhs_t / lhs_1 / scale_t**sigma - 1)
        params["homogeneity_rhs_rel_error"] = abs(rhs_t / rhs / scale_t**sigma - 1)
    notes.append("sup over the ball realised as max over probes and cell centres (a lower bound)")
    return make_report(eid, samples, params, notes, reference_C)


def cor41_branch(n: int, sigma: float) -> str:
    if n < 3:
        raise DomainError("this estimate needs n >= 3")
    crit = 2.0 / (n - 2)
    if math.isclose(sigma, crit, rel_tol=1e-12):
        return "crit"
    if sigma > crit:
        return "super"
    raise DomainError(f"sigma must be at least 2/(n-2) = {crit:g}")


def _cor41_rhs(g: GridDensity, sigma: float, branch: str) -> float:
    n = g.n
    g1, ginf = g.norm(1.0), g.norm(math.inf)
    if g1 == 0:
        return 0.0
    if branch == "super":
        return g1 ** ((2 * sigma + 2) / n) * ginf ** (((n - 2) * sigma - 2) / n)
    return g1**sigma * math.log(math.e * g.ball.volume * ginf / g1)


def _to_unit_ball(g: GridDensity) -> GridDensity:
    b = g.ball
    return GridDensity((g.lower - b.center) / b.radius, (g.upper - b.center) / b.radius,
                       g.values, g.weights, Ball(np.zeros(g.n), 1.0))


def verify_cor41(g: GridDensity, sigma: float, probes: int = 16, seed: int = 0,
                 reference_C: float | None = None) -> EstimateReport:
    if g.ball is None:
        raise DomainError("the density must be restricted to a ball")
    branch = cor41_branch(g.n, sigma)
    eid = "Cor41_super" if branch == "super" else "Cor41_crit"
    rhs = _cor41_rhs(g, sigma, branch)
    unit = Ball(np.zeros(g.n), 1.0)
    local = points_in_ball(unit, probes, seed)
    pts = g.ball.center + g.ball.radius * local
    samples = [Sample(d, v, rhs, e) for d, v, e in _sup_composite(g, sigma, pts)]
    params = {"n": g.n, "sigma": sigma, "branch": branch, "ball": g.ball.to_dict()}
    # the substituted density on the unit ball gives the same ratio
    f = _to_unit_ball(g)
    rhs_f = _cor41_rhs(f, sigma, branch)
    lhs_f = float(composite_field(f, sigma)[1].max())
    lhs_g = float(composite_field(g, sigma)[1].max())
    if rhs > 0 and rhs_f > 0 and lhs_g > 0:
        params["substitution_ratio_rel_diff"] = abs((lhs_f / rhs_f) / (lhs_g / rhs) - 1)
    return make_report(eid, samples, params,
                       ["sup over the ball realised as max over probes and cell centres"], reference_C)


# --- V against Wolff-type integrals -----------------------------------------------


def _v_probes(mu: Measure, probes, count, seed, grid, margin):
    if probes is not None:
        return np.atleast_2d(np.asarray(probes, dtype=float))
    # near-singular probes sit a few working cells away from atoms so the
    # grid-based outer integral resolves them
    _, extent = _extent(mu)
    h = 2 * (extent + margin) / grid
    return default_probes(mu, count, seed, near=max(1e-3, 3 * h))


def _extent(mu: Measure):
    pts, _ = mu.discrete()
    c = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    return c, float(np.linalg.norm(pts - c, axis=1).max()) + 1e-3


def _fmt(x):
    return "x=" + ",".join(f"{c:.6g}" for c in x)


def thm42_parts(n: int, alpha: float, p: float) -> list[str]:
    if not p > 1 or not alpha > 0:
        raise DomainError("need p > 1 and alpha > 0")
    if alpha * p > n * (1 + 1e-12):
        raise DomainError(f"need alpha <= n/p = {n / p:g}")
    parts = ["lower"]
    if p > 2 - alpha / n:
        parts.append("upper")
    elif alpha * p < n:
        parts.append("phi")
    return parts


def verify_thm42(mu: Measure, alpha: float, p: float, c: float = 1.0, probes=None,
                 count: int = 64, seed: int = 0, rings: int = 512, grid: int = 48,
                 margin: float = 5.0) -> list[EstimateReport]:
    """V against the damped Wolff potential: lower bound always, upper or majorant bound by regime."""
    n = mu.n
    parts = thm42_parts(n, alpha, p)
    if not c > 0:
        raise DomainError("the damped comparison needs c > 0")
    params = {"n": n, "alpha": alpha, "p": p, "c": c, "rings": rings, "grid": grid}
    if mu.total_mass() == 0:
        empty = [Sample("zero measure", 0.0, 0.0)]
        return [make_report(f"Thm42_{k}", empty, params) for k in parts]
    pts = _v_probes(mu, probes, count, seed, grid, margin)
    if len(pts) == 0:
        raise DomainError("empty probe set")
    vs = [v_potential(mu, alpha, p, x, grid, margin) for x in pts]
    ws = [wolff(mu, alpha, p, c, x, rings) for x in pts]
    reports = [make_report(
        "Thm42_lower",
        [Sample(_fmt(x), w.value, v.value, w.error_estimate) for x, v, w in zip(pts, vs, ws)],
        params, ["fitted_C bounds W^c / V; the lower constant c1 is 1/fitted_C"])]
    if "upper" in parts:
        reports.append(make_report(
            "Thm42_upper",
            [Sample(_fmt(x), v.value, w.value, v.error_estimate) for x, v, w in zip(pts, vs, ws)],
            params))
    if "phi" in parts:
        phi = _mass_majorant(mu, pts, min(rings, 128))
        rhs = wolff_phi(mu, alpha, p, c, phi, rings=min(rings, 128))
        reports.append(make_report(
            "Thm42_phi",
            [Sample(_fmt(x), v.value, rhs, v.error_estimate) for x, v in zip(pts, vs)],
            params, ["sup_x mu(B_r(x)) estimated over probes and support points (a lower bound)"]))
    return reports


def _mass_majorant(mu: Measure, probes: np.ndarray, rings: int, densest: int = 32):
    """r -> max_x mu(B_r(x)) over probes and the heaviest support points, tabulated
    on the ring ladder used by ``wolff_phi``."""
    support, masses = mu.discrete()
    heavy = support[np.argsort(-masses, kind="stable")[:densest]]
    centres = np.vstack([probes, heavy])
    edges = np.geomspace(1e-6, 1e3, rings + 1)
    table = np.max([mu.ball_mass_profile(x, edges)[0] for x in centres], axis=0)
    log_edges = np.log(edges)
    return lambda r: float(np.interp(math.log(r), log_edges, table))


def thm43_branch(n: int, alpha: float, p: float) -> str:
    if not p > 1 or not 0 < alpha < n / p:
        raise DomainError(f"need p > 1 and 0 < alpha < n/p = {n / p:g}")
    edge = 2 - alpha / n
    if math.isclose(p, edge, rel_tol=1e-12):
        return "b"
    if p < edge:
        return "a"
    raise DomainError(f"need p <= 2 - alpha/n = {edge:g}")


def _thm43_log_integral(mu, x, alpha, p, K, c, c2, rings):
    """int (mu(B_r)/r^(n-ap) log(c2 K^(p-1) r^(n-ap)/mu(B_r)))^(1/(p-1)) e^(-cr) dr/r."""
    n = mu.n
    q = 1.0 / (p - 1.0)
    e = n - alpha * p
    r_lo = max(mu.inner_radius(x), 1e-6 * mu.diameter())
    r_sat = max(mu.saturation_radius(x), r_lo * (1 + 1e-9))
    edges = np.geomspace(r_lo, r_sat, rings + 1)
    M = mu.ball_mass_profile(x, edges)[0]
    flagged = {"empty_rings": int(np.sum(M == 0)), "negative_log_rings": 0}

    def integrand(m, r):
        if m <= 0:
            return 0.0
        arg = c2 * K ** (p - 1) * r**e / m
        if arg < 1:
            flagged["negative_log_rings"] += 1
            return 0.0
        return (m / r**e * math.log(arg)) ** q * math.exp(-c * r) / r

    vals = np.array([integrand(m, r) for m, r in zip(M, edges)])
    body = float(np.trapezoid(vals * edges, np.log(edges)))
    total = mu.total_mass()
    tail, _ = integrate.quad(lambda r: integrand(total, r), r_sat, r_sat + 60.0 / c, limit=200)
    head = 0.0
    if M[0] > 0:
        head = vals[0] * r_lo / max(n * q - e * q, 1e-12)
    return head + body + tail, flagged


def verify_thm43(mu: Measure, alpha: float, p: float, K: float, c: float = 1.0, c2: float = 16.0,
                 probes=None, count: int = 64, seed: int = 0, rings: int = 512, grid: int = 48,
                 margin: float = 5.0) -> EstimateReport:
    n = mu.n
    if not K > 0:
        raise DomainError("K must be positive")
    branch = thm43_branch(n, alpha, p)
    pts = _v_probes(mu, probes, count, seed, grid, margin)
    vs = [v_potential(mu, alpha, p, x, grid, margin) for x in pts]
    vmax = max(v.value for v in vs)
    params = {"n": n, "alpha": alpha, "p": p, "K": K, "c": c, "branch": branch}
    notes = []
    hyp = vmax <= K
    if not hyp:
        notes.append(f"hypothesis V <= K fails: measured sup V = {vmax:.6g} > K = {K:.6g}")
    samples = []
    if branch == "a":
        # exponent (n-alpha)/(n-alpha p) keeps both sides homogeneous of degree 1/(p-1)
        q = (n - alpha) / (n - alpha * p)
        pref = K ** (((2 - p) * n - alpha) / (n - alpha * p))
        for x, v in zip(pts, vs):
            w = layercake(mu, x, q, (n - alpha * p) * q, c, rings)
            samples.append(Sample(_fmt(x), v.value, pref * w.value, v.error_estimate))
        eid = "Thm43_a"
    else:
        params["c2"] = c2
        flags = {"empty_rings": 0, "negative_log_rings": 0}
        for x, v in zip(pts, vs):
            rhs, fl = _thm43_log_integral(mu, x, alpha, p, K, c, c2, rings)
            for k in flags:
                flags[k] += fl[k]
            samples.append(Sample(_fmt(x), v.value, rhs, v.error_estimate))
        params.update(flags)
        if flags["empty_rings"]:
            notes.append("rings with mu(B_r) = 0 contribute 0 (0 log(./0) taken as 0)")
        if flags["negative_log_rings"]:
            notes.append("rings where the log argument drops below 1 were set to 0")
        eid = "Thm43_b"
    return make_report(eid, samples, params, notes, hypothesis_ok=hyp)


# --- V against maximal function and norms -----------------------------------------


def thm44_branch(n: int, alpha: float, p: float, s: float) -> str:
    """Pick the estimate whose hypotheses hold; sharper maximal-function forms first."""
    if not p > 1 or not 0 < alpha < n:
        raise DomainError("need p > 1 and 0 < alpha < n")
    s_crit = n / (alpha * p)
    edge = 2 - alpha / n
    if math.isclose(s, s_crit, rel_tol=1e-12):
        if alpha * p > n * (1 + 1e-12):
            raise DomainError(f"critical branch needs alpha <= n/p = {n / p:g}")
        return "est3" if p > edge else "est4"
    if not alpha * p < n:
        raise DomainError(f"subcritical branches need alpha < n/p = {n / p:g}")
    if not 0 < s < s_crit:
        raise DomainError(f"need 0 < s < n/(alpha p) = {s_crit:g} or s = n/(alpha p)")
    return "est1" if (p > edge and s >= 1) else "est2"


def _check_thm44(n, alpha, p, s, branch):
    auto = thm44_branch(n, alpha, p, s)
    if branch is None or branch == auto:
        return auto
    s_crit = n / (alpha * p)
    if branch == "est2" and auto == "est1":
        return branch
    if branch == "est4" and auto == "est3":
        return branch
    raise DomainError(f"{branch} does not apply to (n={n}, alpha={alpha}, p={p}, s={s}); "
                      f"s* = n/(alpha p) = {s_crit:g}")


def _thm44_rhs(branch, n, alpha, p, s, mf, fs, finf):
    q = 1.0 / (p - 1.0)
    if fs == 0:
        return 0.0
    if branch in ("est1", "est2"):
        big = mf if branch == "est1" else finf
        return big ** ((n - alpha * p * s) * q / n) * fs ** (alpha * p * s * q / n)
    big = mf if branch == "est3" else finf
    frac = big**q / (big**q + fs**q)
    log_plus = math.log(big / fs) if big > fs else 0.0
    return fs**q * (frac + log_plus)


def verify_thm44(f: GridDensity, alpha: float, p: float, s: float, branch: str | None = None,
                 probes=None, count: int = 32, seed: int = 0, grid: int = 32,
                 margin: float = 5.0) -> EstimateReport:
    n = f.n
    branch = _check_thm44(n, alpha, p, s, branch)
    if probes is None:
        lo, hi = f.lower, f.upper
        pad = 0.25 * (hi - lo)
        probes = quasi_random_points(n, count, lo - pad, hi + pad, seed)
    fs, finf = f.norm(s), f.norm(math.inf)
    samples = []
    for x in probes:
        mf = maximal(f, x)
        if branch in ("est1", "est2"):
            v = havin_mazya(f, alpha, p, x, grid)
        else:
            v = v_potential(f, alpha, p, x, grid, margin)
        rhs = _thm44_rhs(branch, n, alpha, p, s, mf, fs, finf)
        samples.append(Sample(_fmt(x), v.value, rhs, v.error_estimate))
    params = {"n": n, "alpha": alpha, "p": p, "s": s, "branch": branch}
    return make_report(f"Thm44_{branch}", samples, params,
                       ["maximal function taken over a geometric radius ladder (a lower bound)"])


# --- Newtonian potential of a ball --------------------------------------------------


def ball_newtonian(x0, R: float, x, cells: int = 32) -> PotentialValue:
    """int_{|y-x0|<R} |x-y|^(2-n) dy on a grid aligned with the ball."""
    x0 = as_point(x0)
    n = x0.size
    if n < 3:
        raise DomainError("this estimate needs n >= 3")
    g = _unit_density(n, cells)
    # evaluate in the ball's own scaled coordinates so dilations are exact
    local = (as_point(x, n) - x0) / R
    curv = lambda d: (n - 1) * (n - 2) * d ** (-n)
    v = direct_sum(g, local, lambda d: d ** (2.0 - n), sphere_area(n) * g.rho**2 / 2, curv)
    return v.scaled(R**2)


_UNIT_CACHE: dict = {}


def _unit_density(n: int, cells: int) -> GridDensity:
    key = (n, cells)
    if key not in _UNIT_CACHE:
        _UNIT_CACHE[key] = GridDensity.on_ball(1.0, Ball(np.zeros(n), 1.0), cells)
    return _UNIT_CACHE[key]


def verify_lemma42(x0, R: float, probe_xs, cells: int = 32) -> EstimateReport:
    x0 = as_point(x0)
    n = x0.size
    if n < 3:
        raise DomainError("this estimate needs n >= 3")
    if not R > 0:
        raise DomainError("R must be positive")
    samples = []
    for x in np.atleast_2d(probe_xs):
        val = ball_newtonian(x0, R, x, cells)
        dist = float(np.linalg.norm(as_point(x, n) - x0))
        rhs = R**n / (dist ** (n - 2) + R ** (n - 2))
        samples.append(Sample(_fmt(x), val.value, rhs, val.error_estimate))
    return make_report("Lemma42", samples, {"n": n, "R": R, "x0": x0.tolist(), "cells": cells})
