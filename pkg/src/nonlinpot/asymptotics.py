"""Pointwise-bound bookkeeping for the coupled Lane-Emden type inequalities.

Covers the partition of the (lambda, sigma) quadrant into regions A-D, the
case tables giving the predicted growth of u and v near an isolated
singularity (and at infinity after inversion), the bootstrap exponent ledger
and the Kelvin transform on sampled data.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import SCHEMA_VERSION, DomainError, check_dimension

_REL = 1e-12


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=_REL, abs_tol=_REL)


def _need_high_dim(n: int) -> int:
    n = check_dimension(n)
    if n < 3:
        raise DomainError("this classification is for n >= 3")
    return n


def critical_sigma(lam: float, n: int) -> float:
    """2/(n-2) + n/((n-2) lambda): the curve separating bounded from unbounded growth."""
    n = _need_high_dim(n)
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    return 2.0 / (n - 2) + n / ((n - 2) * lam)


# --- regions ---------------------------------------------------------------------


class Region(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"


def region_memberships(lam: float, sigma: float, n: int) -> dict[Region, bool]:
    """Each region's defining predicate evaluated independently."""
    n = _need_high_dim(n)
    if sigma < 0 or sigma > lam:
        raise DomainError(f"need 0 <= sigma <= lambda, got sigma={sigma}, lambda={lam}")
    corner = n / (n - 2)
    big = lam > corner and not _close(lam, corner)
    crit = critical_sigma(lam, n) if lam > 0 else math.inf
    on_curve = _close(sigma, crit)
    return {
        Region.A: not big,
        Region.B: big and sigma < crit and not on_curve,
        Region.C: big and sigma > crit and not on_curve,
        Region.D: big and on_curve,
    }


def classify_region(lam: float, sigma: float, n: int) -> Region:
    hits = [r for r, ok in region_memberships(lam, sigma, n).items() if ok]
    if len(hits) != 1:
        raise RuntimeError(f"region predicates overlap or leave a gap at {(lam, sigma, n)}: {hits}")
    return hits[0]


# --- bound descriptors -------------------------------------------------------------


class Flavor(str, enum.Enum):
    BIG_O = "O"
    LITTLE_O = "o"


@dataclass(frozen=True)
class BoundDescriptor:
    """Growth bound  flavor( t^base_exponent * (log t)^log_power ), t = 1/|x| or |y|.

    ``epsilon_slack`` is the amount added to the exponent when the bound holds
    for every epsilon > 0; it is kept apart from ``base_exponent``.
    """

    base_exponent: float
    log_power: float = 0.0
    flavor: Flavor = Flavor.BIG_O
    epsilon_slack: float = 0.0
    at: str = "0"

    def __post_init__(self):
        if self.log_power < 0 or self.epsilon_slack < 0:
            raise DomainError("log powers and epsilon slack are nonnegative")
        if self.at not in ("0", "inf"):
            raise DomainError("bounds are taken at '0' or 'inf'")

    @property
    def exponent(self) -> float:
        return self.base_exponent + self.epsilon_slack

    def key(self) -> tuple:
        # ordering by growth: exponent, then log power, then O beats o
        return (self.exponent, self.log_power, self.flavor == Flavor.BIG_O)

    def same_shape(self, other: "BoundDescriptor") -> bool:
        return (math.isclose(self.base_exponent, other.base_exponent, rel_tol=1e-12, abs_tol=1e-12)
                and math.isclose(self.log_power, other.log_power, rel_tol=1e-12, abs_tol=1e-12)
                and self.flavor == other.flavor
                and (self.epsilon_slack > 0) == (other.epsilon_slack > 0)
                and self.at == other.at)

    def render(self) -> str:
        var = "1/|x|" if self.at == "0" else "|y|"
        e = f"{self.base_exponent:.6g}" + ("+eps" if self.epsilon_slack > 0 else "")
        body = f"({var})^{e}"
        if self.log_power:
            body += f" (log {var})^{self.log_power:.6g}"
        return f"{self.flavor.value}({body})"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["flavor"] = self.flavor.value
        return d


def dominant(*terms: BoundDescriptor) -> BoundDescriptor:
    """The bound implied by a sum of bounds: the fastest-growing term."""
    return max(terms, key=lambda t: t.key())


def _O(e, log_power=0.0, slack=0.0, at="0"):
    return BoundDescriptor(float(e), float(log_power), Flavor.BIG_O, float(slack), at)


def _o(e, log_power=0.0, slack=0.0, at="0"):
    return BoundDescriptor(float(e), float(log_power), Flavor.LITTLE_O, float(slack), at)


@dataclass(frozen=True)
class BoundPair:
    u: BoundDescriptor | None
    v: BoundDescriptor | None
    case: str
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "case": self.case,
                "u": None if self.u is None else self.u.to_dict(),
                "v": None if self.v is None else self.v.to_dict(),
                "notes": list(self.notes)}


def _check_system_range(lam: float, sigma: float, n: int):
    if not (lam >= sigma >= 0):
        raise DomainError(f"need lambda >= sigma >= 0, got lambda={lam}, sigma={sigma}")
    crit = critical_sigma(lam, n)
    if not sigma < crit or _close(sigma, crit):
        raise DomainError(f"need sigma < {crit:.12g} (the critical curve), got {sigma}")


def bounds_thm37(lam: float, sigma: float, n: int, alpha: float = 0.0, beta: float = 0.0,
                 eps: float = 1e-3) -> BoundPair:
    """Bounds near 0 for -Delta u <= |x|^-alpha (v + Gamma)^lambda, -Delta v <= |x|^-beta (u + Gamma)^sigma."""
    n = _need_high_dim(n)
    _check_system_range(lam, sigma, n)
    if not eps > 0:
        raise DomainError("epsilon must be positive")
    k = n - 2
    sc = lambda e: k * e / n  # (n-2)/n * e, ordered so k*k*lam/n rounds like the closed form
    harm = _O(k)
    notes: list[str] = []
    edge = 2.0 / k

    if sigma == 0:
        if beta <= n:
            return BoundPair(dominant(harm, _o(sc(k * lam + alpha))), harm, "A1")
        return BoundPair(dominant(harm, _o(sc(sc(beta) * lam + alpha))), _o(sc(beta)), "A2")

    if sigma < edge and not _close(sigma, edge):
        delta = max(k * lam + alpha, (k * sigma - 2 + beta) * lam + alpha)
        if _close(delta, n):
            notes.append("delta == n: assigned to B1")
        if delta <= n or _close(delta, n):
            v = harm if beta <= n - k * sigma else _o(sc(k * sigma + beta))
            return BoundPair(harm, v, "B1", tuple(notes))
        return BoundPair(_o(sc(delta)), dominant(harm, _O(k * sigma - 2 + beta)), "B2", tuple(notes))

    if _close(sigma, edge):
        cond_i = beta < k and (k * lam + alpha <= n)
        cond_ii = beta >= k and (beta * lam + alpha < n)
        if _close(k * lam + alpha, n) or _close(beta, k) or _close(beta * lam + alpha, n):
            notes.append("boundary equality in the C1/C2 split; inequality signs taken literally")
        if cond_i or cond_ii:
            v = harm if beta <= k else _o(sc(beta + 2))
            return BoundPair(harm, v, "C1", tuple(notes))
        if beta < k:
            u = _o(sc(k * lam + alpha))
        else:
            u = _o(sc(beta * lam + alpha), log_power=sc(lam))
        return BoundPair(u, dominant(harm, _o(beta, log_power=1.0)), "C2", tuple(notes))

    a = lam / n * (k * sigma - 2)
    b = alpha / n * (k * sigma - 2) + beta
    if not 0 < a < 1:
        raise DomainError(f"expected 0 < a < 1, got a = {a}")
    ratio = b / (1 - a)
    cond_i = ratio < k and (k * lam <= n - alpha)
    cond_ii = ratio >= k and (b * lam / (1 - a) < n - alpha)
    if _close(ratio, k) or _close(k * lam, n - alpha) or _close(b * lam / (1 - a), n - alpha):
        notes.append("boundary equality in the D1/D2 split; inequality signs taken literally")
    if cond_i or cond_ii:
        v = harm if beta <= n - k * sigma else _o(sc(k * sigma + beta))
        return BoundPair(harm, v, "D1", tuple(notes))
    if ratio < k:
        return BoundPair(_o(sc(k * lam + alpha)), harm, "D2", tuple(notes))
    return BoundPair(_o(sc(b * lam / (1 - a) + alpha), slack=sc(eps)), _o(ratio, slack=eps),
                     "D2", tuple(notes))


def bounds_thm36(lam: float, sigma: float, n: int, eps: float = 1e-3) -> BoundPair:
    """Bounds as |y| -> infinity for -Delta U <= (V+1)^lambda, -Delta V <= (U+1)^sigma."""
    n = _need_high_dim(n)
    _check_system_range(lam, sigma, n)
    k = n - 2
    edge = 2.0 / k
    if sigma == 0:
        return BoundPair(_o(k / n * (2 * k * lam / n + 2), at="inf"), _o(2 * k / n, at="inf"), "A")
    if sigma < edge and not _close(sigma, edge):
        return BoundPair(_o(2 * k * (lam + 1) / n, at="inf"), _O(2, at="inf"), "B")
    if _close(sigma, edge):
        return BoundPair(_o(2 * k * (lam + 1) / n, log_power=k * lam / n, at="inf"),
                         _o(2, log_power=1.0, at="inf"), "C")
    D = k * lam * (critical_sigma(lam, n) - sigma)
    if not D > 0:
        raise DomainError("D must be positive below the critical curve")
    return BoundPair(_o(2 * k * (lam + 1) / D, slack=eps, at="inf"),
                     _o(2 * k * (sigma + 1) / D, slack=eps, at="inf"), "D")


def kelvin_weights(lam: float, sigma: float, n: int) -> tuple[float, float]:
    """Weights (alpha, beta) produced by inverting the exterior problem."""
    return n + 2 - (n - 2) * lam, n + 2 - (n - 2) * sigma


def kelvin_descriptor(desc: BoundDescriptor, n: int) -> BoundDescriptor:
    """Map a bound on u near 0 to the bound on U(y) = |x|^(n-2) u(x) as |y| -> infinity.

    t^e (log t)^k with t = 1/|x| = |y| becomes |y|^(e - (n-2)) (log |y|)^k.
    """
    if desc.at != "0":
        raise DomainError("only bounds at the origin are inverted")
    return BoundDescriptor(desc.base_exponent - (n - 2), desc.log_power, desc.flavor,
                           desc.epsilon_slack, "inf")


def kelvin_image_of_thm37(lam: float, sigma: float, n: int, eps: float = 1e-3) -> BoundPair:
    alpha, beta = kelvin_weights(lam, sigma, n)
    inner = bounds_thm37(lam, sigma, n, alpha, beta, eps)
    return BoundPair(kelvin_descriptor(inner.u, n), kelvin_descriptor(inner.v, n),
                     inner.case, inner.notes)


def bounds_2d(lam: float) -> BoundPair:
    """Planar bounds for  -Delta u <= f(v), -Delta v <= g(u) with f = O(e^(t^lambda)) style growth."""
    if not lam >= 1:
        raise DomainError(f"the planar bounds need lambda >= 1, got {lam}")
    v = _O(0.0, log_power=1.0)
    if lam == 1:
        return BoundPair(v, v, "harmonic")
    return BoundPair(_o(0.0, log_power=lam), v, "log-power")


def bounds_thm35(sigma: float, n: int) -> BoundPair:
    """-Delta u >= 0 only, -Delta v <= g(u) with g = O(t^sigma): v harmonically bounded."""
    n = _need_high_dim(n)
    if not 0 <= sigma < 2.0 / (n - 2):
        raise DomainError(f"need 0 <= sigma < 2/(n-2), got {sigma}")
    return BoundPair(None, _O(n - 2), "v-harmonic")


def pointwise_bounds(lam: float, sigma: float, n: int) -> BoundPair:
    """Region-level answer for  -Delta u <= f(v), -Delta v <= g(u), f = O(t^lambda), g = O(t^sigma).

    Region C admits no pointwise bound (u = v = None); region D is not covered.
    """
    region = classify_region(lam, sigma, n)
    k = n - 2
    if region is Region.A:
        return BoundPair(_O(k), _O(k), "A")
    if region is Region.B:
        return BoundPair(_o(k * k * lam / n), _O(k), "B")
    if region is Region.C:
        return BoundPair(None, None, "C", ("no pointwise bound exists",))
    return BoundPair(None, None, "D", ("the critical curve is not classified",))


def region_sweep(n: int, lam_max: float = 6.0, size: int = 200) -> list[tuple]:
    """Rows (lambda, sigma, region, u_exponent, v_exponent, log_power) on the sigma <= lambda grid."""
    rows = []
    grid = np.linspace(0.0, lam_max, size)
    for lam in grid:
        for sigma in grid:
            if sigma > lam:
                continue
            pb = pointwise_bounds(float(lam), float(sigma), n)
            ue = math.inf if pb.u is None else pb.u.exponent
            ve = math.inf if pb.v is None else pb.v.exponent
            lp = 0.0 if pb.u is None else pb.u.log_power
            rows.append((float(lam), float(sigma), pb.case, ue, ve, lp))
    return rows


REGION_CSV_HEADER = ("lambda", "sigma", "region", "u_exponent", "v_exponent", "log_power")


# --- bootstrap ledger --------------------------------------------------------------


@dataclass(frozen=True)
class MoserStep:
    p: float
    p2: float | None
    p3: float | None
    q: float
    gain: float
    note: str = ""


@dataclass
class MoserTrace:
    n: int
    lam: float
    sigma: float
    epsilon: float
    C1: float
    C2: float
    C0: float
    steps: list = field(default_factory=list)

    @property
    def iterations_needed(self) -> int:
        """Smallest integer m > 1/C0."""
        return math.floor(1.0 / self.C0) + 1

    @property
    def step_limit(self) -> int:
        return math.ceil(1.0 / self.C0) + 1

    @property
    def terminated(self) -> bool:
        return bool(self.steps) and math.isinf(self.steps[-1].q)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "n": self.n, "lambda": self.lam,
                "sigma": self.sigma, "epsilon": self.epsilon, "C1": self.C1, "C2": self.C2,
                "C0": self.C0, "iterations_needed": self.iterations_needed,
                "steps": [_step_dict(s) for s in self.steps]}

    CSV_HEADER = ("step", "p", "p2", "p3", "q", "gain", "note")

    def csv_rows(self) -> list[tuple]:
        return [(i + 1, s.p, s.p2, s.p3, s.q, s.gain, s.note) for i, s in enumerate(self.steps)]


def _step_dict(s: MoserStep) -> dict:
    fix = lambda v: None if v is None else ("inf" if math.isinf(v) else v)
    return {"p": fix(s.p), "p2": fix(s.p2), "p3": fix(s.p3), "q": fix(s.q), "gain": s.gain,
            "note": s.note}


def _eps_ok(n: int, lam: float, sigma: float, e: float) -> bool:
    return (sigma < n / (n - 2 + e)
            and sigma < (2 - e) / (n - 2 + e) + n / ((n - 2 + e) * lam))


def moser_ledger(n: int, lam: float, sigma: float, granularity: int = 16,
                 max_steps: int = 10_000) -> MoserTrace:
    """Iterate integrability exponents p -> q from p = 1 until q = infinity.

    epsilon is the smallest k/granularity satisfying both admissibility
    inequalities; smaller epsilon gives the larger guaranteed gain C0.
    """
    n = _need_high_dim(n)
    edge = 2.0 / (n - 2)
    if not (lam >= sigma and (sigma >= edge or _close(sigma, edge))):
        raise DomainError(f"need lambda >= sigma >= 2/(n-2) = {edge:.6g}")
    crit = critical_sigma(lam, n)
    if not sigma < crit or _close(sigma, crit):
        raise DomainError(f"need sigma < {crit:.12g} (the critical curve)")
    eps = next((k / granularity for k in range(1, granularity) if _eps_ok(n, lam, sigma, k / granularity)),
               None)
    if eps is None:
        raise DomainError(f"no epsilon = k/{granularity} is admissible; use a finer granularity")
    s = 2.0 - eps
    C1 = s * lam * (sigma + 1) / n
    C2 = (n - s) * lam / n * (s / (n - s) + n / ((n - s) * lam) - sigma)
    C0 = min(C1, C2)
    trace = MoserTrace(n, lam, sigma, eps, C1, C2, C0)
    inv_p = 1.0
    for _ in range(max_steps):
        inv_p2 = inv_p - s / n
        inv_q_formula = lam * (sigma * inv_p2 - s / n)
        gain = inv_p - inv_q_formula
        if inv_p < 2.0 / n:
            trace.steps.append(MoserStep(1 / inv_p, None, None, math.inf, gain, "p > n/2"))
            break
        if sigma * inv_p2 < 2.0 / n:
            trace.steps.append(MoserStep(1 / inv_p, 1 / inv_p2, None, math.inf, gain, "p2/sigma > n/2"))
            break
        inv_p3 = sigma * inv_p2 - s / n
        if inv_q_formula <= 0:
            trace.steps.append(MoserStep(1 / inv_p, 1 / inv_p2, 1 / inv_p3, math.inf, gain, "1/q <= 0"))
            break
        trace.steps.append(MoserStep(1 / inv_p, 1 / inv_p2, 1 / inv_p3, 1 / inv_q_formula, gain))
        inv_p = inv_q_formula
    else:
        raise RuntimeError("bootstrap did not terminate")
    return trace


# --- Kelvin transform --------------------------------------------------------------


def kelvin(points, values, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Inversion y = x/|x|^2 with U(y) = |x|^(n-2) u(x) (U = u when n = 2)."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    u = np.asarray(values, dtype=float).reshape(len(x))
    n = x.shape[1] if n is None else check_dimension(n)
    if x.shape[1] != n:
        raise DomainError("point dimension does not match n")
    r2 = np.einsum("ij,ij->i", x, x)
    if np.any(r2 == 0):
        raise DomainError("the Kelvin transform is undefined at the origin")
    y = x / r2[:, None]
    U = u * r2 ** ((n - 2) / 2.0) if n > 2 else u.copy()
    return y, U
