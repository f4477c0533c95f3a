"""Command-line interface.

Subcommands: potential, verify, construct, classify, sweep, moser, repr.

Exit codes: 0 on success (including Inconclusive verdicts), 2 for usage,
file, parse and domain errors, 3 when a verdict is Violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from . import constructor as con
from . import estimates as est
from . import repr_formula as rep
from .core import (SCHEMA_VERSION, AtomicMeasure, Ball, DomainError, GridDensity, Measure,
                   gamma_kernel, measure_from_dict)
from .potentials import PotentialSpec, evaluate, v_potential

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_VIOLATED = 3


class CliError(Exception):
    """Any failure reported with exit code 2."""


# --- configuration ------------------------------------------------------------------

_RUN_KEYS = {"n": int, "grid": int, "rings": int, "probes": int, "seed": int, "workers": int,
             "out": str}


@dataclass
class RunConfig:
    n: int = 3
    grid: int = 48
    rings: int = 512
    probes: int = 16
    seed: int = 0
    workers: int = 1
    out: str | None = None
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        for key in ("n", "grid", "rings", "probes", "workers"):
            if getattr(self, key) <= 0:
                raise CliError(f"{key} must be positive, got {getattr(self, key)}")
        if self.seed < 0:
            raise CliError(f"seed must be nonnegative, got {self.seed}")


def parse_value(text: str):
    """int, float or string, in that order of preference."""
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise CliError(f"{path}: cannot read config file ({exc.strerror})") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            col = len(line) - len(line.lstrip()) + 1
            raise CliError(f"{path}:{lineno}:{col}: expected key = value")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key.isidentifier():
            col = len(line) - len(line.lstrip()) + 1
            raise CliError(f"{path}:{lineno}:{col}: invalid key {key!r}")
        vcol = len(line.split("=", 1)[0]) + 2 + (len(value) - len(value.lstrip()))
        value = value.strip()
        if key in _RUN_KEYS:
            try:
                out[key] = _RUN_KEYS[key](value)
            except ValueError:
                raise CliError(f"{path}:{lineno}:{vcol}: {key} expects "
                               f"{_RUN_KEYS[key].__name__}, got {value!r}") from None
        else:
            out.setdefault("params", {})[key] = parse_value(value)
    return out


def parse_params(items) -> dict:
    params = {}
    for item in items or []:
        if "=" not in item:
            raise CliError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = parse_value(v.strip())
    return params


def build_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        data = read_config(args.config)
        cfg = replace(cfg, **{k: v for k, v in data.items() if k != "params"})
        cfg.params = dict(data.get("params", {}))
    for key in _RUN_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    cfg.params.update(parse_params(args.param))
    cfg.validate()
    return cfg


def load_json(path: str) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise CliError(f"{path}: cannot read file ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def load_measure(path: str) -> Measure:
    data = load_json(path)
    if not isinstance(data, dict):
        raise CliError(f"{path}: a measure must be a JSON object")
    try:
        return measure_from_dict(data)
    except (DomainError, ValueError, TypeError) as exc:
        raise CliError(f"{path}: {exc}") from None


def load_points(path: str) -> np.ndarray:
    """JSON list of points, or an object with a "points" list."""
    data = load_json(path)
    pts = data.get("points") if isinstance(data, dict) else data
    try:
        arr = np.atleast_2d(np.asarray(pts, dtype=float))
    except (TypeError, ValueError):
        raise CliError(f"{path}: points must be a list of coordinate lists") from None
    if arr.ndim != 2 or arr.size == 0:
        raise CliError(f"{path}: points must be a nonempty list of coordinate lists")
    return arr


# --- output -------------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def to_json(obj) -> str:
    data = _clean(obj)
    if isinstance(data, dict) and "schema_version" not in data:
        data = {"schema_version": SCHEMA_VERSION, **data}
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


@dataclass
class Result:
    """Named text artifacts; the first one is printed when no output directory is set."""
    files: dict
    code: int = EXIT_OK
    plot: tuple | None = None


def emit(result: Result, cfg: RunConfig, plot: bool) -> None:
    if cfg.out is None:
        if plot:
            raise CliError("--plot needs an output directory (--out)")
        sys.stdout.write(next(iter(result.files.values())))
        return
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in result.files.items():
            (out / name).write_text(text)
    except OSError as exc:
        raise CliError(f"{cfg.out}: cannot write output ({exc.strerror})") from None
    if plot and result.plot is not None:
        from . import plotting

        kind, payload = result.plot
        plotting.render(kind, payload, out)


def _param(cfg: RunConfig, key: str, default):
    v = cfg.params.get(key, default)
    if default is not None and isinstance(default, (int, float)) and not isinstance(v, (int, float)):
        raise CliError(f"parameter {key} must be numeric, got {v!r}")
    return v


def _pmap(func, items, workers: int):
    if workers <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# --- potential ----------------------------------------------------------------------


def cmd_potential(args, cfg: RunConfig) -> Result:
    mu = load_measure(args.measure)
    if args.spec:
        data = load_json(args.spec)
        if not isinstance(data, dict):
            raise CliError(f"{args.spec}: a spec must be a JSON object")
        try:
            spec = PotentialSpec.from_dict(data)
        except DomainError as exc:
            raise CliError(f"{args.spec}: {exc}") from None
    else:
        spec = PotentialSpec(args.operator or "RieszKernel")
    overrides = {k: v for k, v in cfg.params.items() if k in ("alpha", "p", "sigma", "c", "r_max")}
    if args.grid is not None:
        overrides["grid"] = cfg.grid
    if args.rings is not None:
        overrides["quad_rings"] = cfg.rings
    if overrides:
        spec = replace(spec, **overrides)
    spec.validate(mu.n)
    if args.points:
        pts = load_points(args.points)
        if pts.shape[1] != mu.n:
            raise CliError(f"{args.points}: probe dimension {pts.shape[1]} does not match n = {mu.n}")
    else:
        pts = est.default_probes(mu, cfg.probes, cfg.seed)
    values = _pmap(lambda x: evaluate(spec, mu, x), pts, cfg.workers)
    header = [f"x{i}" for i in range(mu.n)] + ["value", "error_estimate"]
    rows = [list(map(float, x)) + [v.value, v.error_estimate] for x, v in zip(pts, values)]
    report = {"spec": spec.to_dict(), "measure_variant": mu.to_dict()["variant"],
              "probes": len(pts)}
    plot = ("potential", {"norms": np.linalg.norm(pts, axis=1).tolist(),
                          "values": [v.value for v in values], "operator": spec.operator.value})
    return Result({"potential.csv": to_csv(header, rows), "potential.json": to_json(report)},
                  plot=plot)


# --- verify -------------------------------------------------------------------------


def _default_density(cfg: RunConfig, radius: float = 1.0) -> GridDensity:
    """Smooth random density on a ball, reproducible from the seed."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    centre = rng.uniform(-0.3, 0.3, n) * radius
    width = rng.uniform(0.3, 0.8) * radius
    amp = rng.uniform(0.5, 2.0)

    def f(x):
        d2 = np.sum((np.asarray(x) - centre) ** 2, axis=-1)
        return amp * np.exp(-d2 / (2 * width**2))

    cells = int(_param(cfg, "cells", 16))
    return GridDensity.on_ball(f, Ball(np.zeros(n), radius), cells)


def _default_atoms(cfg: RunConfig) -> AtomicMeasure:
    rng = np.random.default_rng(cfg.seed)
    k = int(_param(cfg, "atoms", 3))
    return AtomicMeasure(rng.uniform(-1, 1, (k, cfg.n)), rng.uniform(0.5, 2.0, k))


_VERIFY_DEFAULTS = {
    "Thm41_ub1": {"sigma": 3.0, "s": 1.0},
    "Thm41_ub2": {"sigma": 2.0, "s": 1.0},
    "Cor41_super": {"sigma": 3.0},
    "Cor41_crit": {"sigma": 2.0},
    "Thm42_lower": {"alpha": 1.0, "p": 2.0, "c": 1.0},
    "Thm42_upper": {"alpha": 1.0, "p": 2.0, "c": 1.0},
    "Thm42_phi": {"alpha": 1.0, "p": 1.5, "c": 1.0},
    "Thm43_a": {"alpha": 1.0, "p": 1.5, "c": 1.0},
    "Thm43_b": {"alpha": 1.0, "p": 5.0 / 3.0, "c": 1.0},
    "Thm44_est1": {"alpha": 1.0, "p": 2.0, "s": 1.0},
    "Thm44_est2": {"alpha": 1.0, "p": 1.5, "s": 1.0},
    "Thm44_est3": {"alpha": 1.0, "p": 2.0, "s": 1.5},
    "Thm44_est4": {"alpha": 1.0, "p": 1.5, "s": 2.0},
    "Lemma42": {"R": 1.0},
}


def _need_grid(mu: Measure, eid: str) -> GridDensity:
    if not isinstance(mu, GridDensity):
        raise CliError(f"{eid} needs a grid density measure")
    return mu


def run_verify(eid: str, cfg: RunConfig, mu: Measure | None = None) -> est.EstimateReport:
    """Run one estimate; a ``reference_C`` param re-judges the samples against that constant."""
    if eid not in est.ESTIMATE_IDS:
        raise CliError(f"unknown estimate id {eid!r}; choose from {', '.join(est.ESTIMATE_IDS)}")
    params = {k: v for k, v in cfg.params.items() if k != "reference_C"}
    report = _run_verify(eid, replace(cfg, params=params), mu)
    if "reference_C" not in cfg.params:
        return report
    C = float(cfg.params["reference_C"])
    if not C > 0:
        raise CliError("reference_C must be positive")
    return est.make_report(report.estimate_id, report.samples, report.params, report.notes,
                           reference_C=C, hypothesis_ok=report.verdict != est.Verdict.INCONCLUSIVE)


def _run_verify(eid: str, cfg: RunConfig, mu: Measure | None) -> est.EstimateReport:
    prm = dict(_VERIFY_DEFAULTS[eid])
    prm.update(cfg.params)
    g = lambda k: float(prm[k])
    family, _, branch = eid.partition("_")
    n_eff = mu.n if mu is not None else cfg.n
    if eid == "Thm43_b" and "p" not in cfg.params:
        prm["p"] = 2.0 - g("alpha") / n_eff
    if family == "Lemma42":
        n = n_eff
        R = g("R")
        x0 = np.zeros(n)
        probes = est.quasi_random_points(n, cfg.probes, x0 - 3 * R, x0 + 3 * R, cfg.seed)
        return est.verify_lemma42(x0, R, probes, int(prm.get("cells", 32)))
    if family in ("Thm42", "Thm43"):
        if mu is None:
            # atoms make sup mu(B_r) stay positive as r -> 0, so the majorant form needs a density
            mu = _default_atoms(cfg) if eid in ("Thm42_lower", "Thm42_upper") else _default_density(cfg)
        if family == "Thm42":
            reports = est.verify_thm42(mu, g("alpha"), g("p"), g("c"), count=cfg.probes,
                                       seed=cfg.seed, rings=cfg.rings, grid=cfg.grid)
            match = [r for r in reports if r.estimate_id == eid]
            if not match:
                got = ", ".join(r.estimate_id for r in reports)
                raise CliError(f"{eid} does not apply to alpha={g('alpha')}, p={g('p')} "
                               f"(applicable: {got})")
            return match[0]
        probes = None
        if isinstance(mu, GridDensity) and mu.ball is not None:
            # V peaks on the support; probes there share one working grid
            probes = est.points_in_ball(mu.ball, cfg.probes, cfg.seed)
        if "K" not in prm:
            # K defaults to the measured sup of V, so the hypothesis holds on the probes
            pts = probes if probes is not None else est.default_probes(mu, cfg.probes, cfg.seed)
            prm["K"] = max(v_potential(mu, g("alpha"), g("p"), x, cfg.grid).value for x in pts)
        rep_ = est.verify_thm43(mu, g("alpha"), g("p"), g("K"), g("c"), float(prm.get("c2", 16.0)),
                                probes=probes, count=cfg.probes, seed=cfg.seed, rings=cfg.rings,
                                grid=cfg.grid)
    elif family == "Thm41":
        f = _need_grid(mu, eid) if mu is not None else _default_density(cfg)
        if branch == "ub2" and "s" not in cfg.params:
            prm["s"] = f.n * g("sigma") / (2 * (g("sigma") + 1))
        rep_ = est.verify_thm41(f, g("sigma"), g("s"), cfg.probes, cfg.seed)
    elif family == "Cor41":
        f = _need_grid(mu, eid) if mu is not None else _default_density(cfg)
        rep_ = est.verify_cor41(f, g("sigma"), cfg.probes, cfg.seed)
    else:
        f = _need_grid(mu, eid) if mu is not None else _default_density(cfg)
        rep_ = est.verify_thm44(f, g("alpha"), g("p"), g("s"), branch=branch, count=cfg.probes,
                                seed=cfg.seed, grid=min(cfg.grid, 32))
    if rep_.estimate_id != eid:
        raise CliError(f"parameters select {rep_.estimate_id}, not {eid}")
    return rep_


def cmd_verify(args, cfg: RunConfig) -> Result:
    mu = load_measure(args.measure) if args.measure else None
    report = run_verify(args.estimate_id, cfg, mu)
    code = EXIT_VIOLATED if report.verdict == est.Verdict.VIOLATED else EXIT_OK
    plot = ("ratios", {"ratios": [s.ratio for s in report.samples], "title": report.estimate_id})
    return Result({"report.json": to_json(report.to_dict()),
                   "samples.csv": to_csv(est.CSV_HEADER, report.csv_rows())}, code, plot)


# --- construct ----------------------------------------------------------------------

CONSTRUCT_TAGS = ("lemma41", "thm22", "thm62", "thm33", "thm34")


def build_construction(tag: str, cfg: RunConfig):
    """Seed, solution, reference function and description for a construction tag."""
    count = int(_param(cfg, "count", 6))
    ratio = float(_param(cfg, "ratio", 0.2))
    first = float(_param(cfg, "first_norm", 0.2))
    extra = {}
    if tag == "lemma41":
        seed = con.reference_seed(cfg.n, count, ratio, first)
        sol = con.lemma41_build(seed)
        n = cfg.n
        if n == 2:
            ref = lambda r: sol.A * r * math.log(2.0 / r)
        else:
            ref = lambda r: sol.A * r * (r / 2.0) ** (2 - n)
        label = "A phi(r) / (r/2)^(n-2)" if n > 2 else "A phi(r) log(2/r)"
    elif tag == "thm33":
        lam = float(_param(cfg, "lam", 4.0))
        q = float(_param(cfg, "psi_power", 1.0))
        psi = lambda r: r**q
        seed = con.schedule_thm33(lam, cfg.n, psi, int(_param(cfg, "count", 8)), ratio, first)
        sol = con.lemma41_build(seed)
        e = (cfg.n - 2) ** 2 * lam / cfg.n
        ref = lambda r: psi(r) * r ** (-e)
        label = f"psi(r) r^(-{e:g})"
    elif tag == "thm62":
        k = float(_param(cfg, "h_power", 2.0))
        if not k > 1:
            raise CliError("h_power must exceed 1 so that h(t)/t grows without bound")
        q = float(_param(cfg, "psi_power", 1.0))
        seed = con.schedule_thm62(lambda t: t**k, lambda r: r**q, count, ratio, first)
        sol = con.lemma41_build(seed)
        ref = lambda r: float(gamma_kernel(r, 2))
        label = "log(2/r)"
    elif tag == "thm22":
        k = float(_param(cfg, "growth_power", 2.0))
        grow = lambda t: t**k
        seed = con.schedule_thm22(grow, grow, lambda r: math.log(1.0 / r), count, ratio, first,
                                  log_scale=True)
        sol = con.lemma41_build(seed)
        ref = lambda r: math.log(1.0 / r)
        label = "log(1/r)"
    elif tag == "thm34":
        lam = float(_param(cfg, "lam", 4.0))
        sigma = float(_param(cfg, "sigma", 2.9))
        pair = con.schedule_thm34(lam, sigma, cfg.n, count=count, ratio=ratio, first_norm=first)
        seed = pair.u_seed
        sol = con.lemma41_build(seed)
        extra = {"pair": pair.to_dict(),
                 "v_solution": con.lemma41_build(pair.v_seed).to_dict()}
        n = cfg.n
        ref = lambda r: r ** (2 - n) * math.log(1.0 / r)
        label = "r^(2-n) log(1/r)"
    else:
        raise CliError(f"unknown construction {tag!r}; choose from {', '.join(CONSTRUCT_TAGS)}")
    return seed, sol, ref, label, extra


def cmd_construct(args, cfg: RunConfig) -> Result:
    _, sol, ref, label, extra = build_construction(args.tag, cfg)
    check = con.check_lemma41(sol, int(_param(cfg, "samples_per_ball", 32)),
                              int(_param(cfg, "samples", 1000)), cfg.seed)
    factor = float(_param(cfg, "factor", 10.0))
    blow = con.measure_blowup(sol, ref, factor)
    bundle = {"construction": args.tag, "solution": sol.to_dict(), "check": check.to_dict(),
              "blowup": blow.to_dict(), "reference": label, **extra}
    plot = ("blowup", {"norms": blow.norms, "ratios": blow.ratios, "title": args.tag})
    code = EXIT_OK if check.passed else EXIT_VIOLATED
    return Result({"construction.json": to_json(bundle),
                   "rates.csv": to_csv(con.BlowupReport.CSV_HEADER, blow.csv_rows())}, code, plot)


# --- classify / sweep / moser --------------------------------------------------------


def _try(func, *a, **kw):
    try:
        return func(*a, **kw).to_dict()
    except DomainError as exc:
        return {"not_applicable": str(exc)}


def classify(lam: float, sigma: float, n: int, alpha: float = 0.0, beta: float = 0.0) -> dict:
    if not lam >= sigma >= 0:
        raise CliError(f"need 0 <= sigma <= lambda, got lambda={lam}, sigma={sigma}")
    region = asy.classify_region(lam, sigma, n)
    pb = asy.pointwise_bounds(lam, sigma, n)
    out = {"lambda": lam, "sigma": sigma, "n": n, "region": region.value,
           "memberships": {k.value: v for k, v in asy.region_memberships(lam, sigma, n).items()},
           "critical_sigma": asy.critical_sigma(lam, n),
           "pointwise": pb.to_dict()}
    if region is asy.Region.C:
        out["marker"] = "no pointwise bound"
    out["weighted"] = _try(asy.bounds_thm37, lam, sigma, n, alpha, beta)
    out["weighted"]["alpha"], out["weighted"]["beta"] = alpha, beta
    out["exterior"] = _try(asy.bounds_thm36, lam, sigma, n)
    return out


def cmd_classify(args, cfg: RunConfig) -> Result:
    data = classify(args.lam, args.sigma, cfg.n, args.alpha, args.beta)
    return Result({"classify.json": to_json(data)})


def cmd_sweep(args, cfg: RunConfig) -> Result:
    size = int(_param(cfg, "size", 200))
    lam_max = float(_param(cfg, "lam_max", 6.0))
    if size < 2 or not lam_max > 0:
        raise CliError("sweep needs size >= 2 and lam_max > 0")
    rows = asy.region_sweep(cfg.n, lam_max, size)
    plot = ("regions", {"rows": rows, "n": cfg.n})
    return Result({"regions.csv": to_csv(asy.REGION_CSV_HEADER, rows)}, plot=plot)


def cmd_moser(args, cfg: RunConfig) -> Result:
    trace = asy.moser_ledger(cfg.n, args.lam, args.sigma, int(_param(cfg, "granularity", 16)))
    data = trace.to_dict()
    data.update(step_limit=trace.step_limit, terminated=trace.terminated)
    return Result({"moser.json": to_json(data),
                   "moser.csv": to_csv(asy.MoserTrace.CSV_HEADER, trace.csv_rows())})


# --- repr ---------------------------------------------------------------------------


def _roundtrip_decomposition(cfg: RunConfig, m: float) -> rep.Decomposition:
    """m Gamma plus a small atomic measure away from 0 and a linear harmonic part."""
    n = cfg.n
    rng = np.random.default_rng(cfg.seed)
    dirs = rng.normal(size=(3, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = dirs * rng.uniform(0.3, 0.6, (3, 1))
    mu = AtomicMeasure(pts, rng.uniform(0.1, 1.0, 3))
    h = rep.HarmonicPoly(float(rng.uniform(0, 1)), 0.5 * rng.normal(size=n), None, n)
    return rep.Decomposition(m, mu, h, 0.25, n)


def cmd_repr(args, cfg: RunConfig) -> Result:
    if args.action == "roundtrip":
        m = float(_param(cfg, "m", 1.0))
        dec = _roundtrip_decomposition(cfg, m)
    else:
        if not args.file:
            raise CliError(f"repr {args.action} needs a decomposition file")
        data = load_json(args.file)
        try:
            dec = rep.Decomposition.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise CliError(f"{args.file}: invalid decomposition ({exc})") from None
    out = {"action": args.action, "decomposition": dec.to_dict()}
    code = EXIT_OK
    if args.action in ("roundtrip", "fit"):
        fit = rep.estimate_point_mass(dec, dec.n, seed=cfg.seed)
        out["fit"] = fit.to_dict()
        if args.action == "roundtrip":
            out["input_m"] = dec.m
            out["relative_error"] = abs(fit.m - dec.m) / max(1.0, dec.m)
    if args.action in ("check", "roundtrip"):
        rng = np.random.default_rng(cfg.seed)
        pts = rng.normal(size=(cfg.probes, dec.n))
        pts *= (rng.uniform(0.02, 0.2, cfg.probes) * dec.epsilon / 0.25
                / np.linalg.norm(pts, axis=1))[:, None]
        sh = rep.superharmonic_check(dec, pts, 1e-3 * dec.epsilon)
        hb = rep.harmonic_bound_verdict(dec, dec.n)
        out["superharmonic"] = sh.to_dict()
        out["harmonic_bound"] = hb.to_dict()
        if sh.verdict == est.Verdict.VIOLATED:
            code = EXIT_VIOLATED
    return Result({"repr.json": to_json(out)}, code)


# --- parser -------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default: print the main artifact)")
    p.add_argument("--grid", type=int, help="working-grid cells per axis")
    p.add_argument("--rings", type=int, help="layer-cake ring count")
    p.add_argument("--probes", type=int, help="probe count")
    p.add_argument("--workers", type=int, help="worker threads for probe evaluation")
    p.add_argument("--n", type=int, help="dimension")
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="extra parameter, repeatable")
    p.add_argument("--plot", action="store_true", help="also write PNG plots (needs matplotlib)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonlinpot",
                                     description="Nonlinear potentials and singular solutions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("potential", help="evaluate a potential at probe points")
    p.add_argument("--measure", required=True, help="measure JSON file")
    p.add_argument("--spec", help="potential spec JSON file")
    p.add_argument("--operator", help="operator name when no spec file is given")
    p.add_argument("--points", help="probe points JSON file")
    _common(p)
    p.set_defaults(func=cmd_potential)

    p = sub.add_parser("verify", help="check an estimate numerically")
    p.add_argument("estimate_id", help=", ".join(est.ESTIMATE_IDS))
    p.add_argument("--measure", help="measure JSON file (default: random problem from the seed)")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("construct", help="build a bump-superposition solution")
    p.add_argument("tag", choices=CONSTRUCT_TAGS)
    _common(p)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("classify", help="region and bound shapes for (lambda, sigma)")
    p.add_argument("--lam", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)
    _common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="region map over 0 <= sigma <= lambda <= lam_max")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("moser", help="integrability bootstrap ledger")
    p.add_argument("--lam", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    _common(p)
    p.set_defaults(func=cmd_moser)

    p = sub.add_parser("repr", help="point-mass decomposition tools")
    p.add_argument("action", choices=("roundtrip", "fit", "check"))
    p.add_argument("file", nargs="?", help="decomposition JSON file")
    _common(p)
    p.set_defaults(func=cmd_repr)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = build_config(args)
        result = args.func(args, cfg)
        emit(result, cfg, args.plot)
    except (CliError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return result.code


if __name__ == "__main__":
    sys.exit(main())
