"""Recurrence certificates built on the bootstrap iteration.

If B Poi(lam) dominates Poi(lam + delta) for every lam >= 0 with a fixed
delta > 0, then starting from Poi(0) and iterating pushes the fixed point V
above every Poisson law, so V is infinite almost surely.  With mu = C (d + 1),

    critical_rate(B Poi(lam)) - lam = C - h(lam),   h(lam) = lam + log E exp(-lam U / d),

so a certificate amounts to an upper bound on sup_lam h that stays below C.
For d = 2 the law of U is explicit; for general d a two-case lower bound U''
(see :func:`frogsim.operators.U_doubleprime_dist`) takes its place.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from .operators import case2_bound, case2_probability, hoeffding_exponent, kappa

LOG2 = math.log(2.0)
Q_MODES = ("exact", "bounded")
VERDICTS = ("certified", "not_certified", "unknown")


# --------------------------------------------------------------------------- binary tree


def binary_gap(mu: float, lam) -> float | np.ndarray:
    """critical_rate(B Poi(lam)) - lam on the binary tree; lam may be inf."""
    lam = np.asarray(lam, dtype=float)
    a = math.exp(-mu / 3)
    out = mu / 3 - np.log1p(a * -np.expm1(-lam / 2))
    return float(out) if out.ndim == 0 else out


def binary_delta(mu: float) -> float:
    """inf over lam of binary_gap, attained as lam -> inf."""
    return mu / 3 - math.log1p(math.exp(-mu / 3))


def binary_threshold() -> float:
    """The zero of binary_delta."""
    return optimize.brentq(binary_delta, 0.5, 3.0, xtol=1e-15)


@dataclass
class CertificateReport:
    d: int
    mu: float
    C: float
    c: float | None
    kappa_d: int | None
    b: float | None
    p: float | None
    q_mode: str
    delta: float
    lambda_sup: float
    uniform_bound: float
    verdict: str
    d0: int | None = None
    details: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else str(value)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def binary_certificate(mu: float, check_grid=None) -> CertificateReport:
    """Certificate for d = 2, where the infimum of the gap is its limit at lam = inf.

    d gap / d lam = -a e^{-lam/2} / (2 (1 + a (1 - e^{-lam/2}))) < 0 with
    a = e^{-mu/3}, so the gap decreases; this is also checked on ``check_grid``.
    """
    if not mu >= 0:
        raise ValueError("mu must be nonnegative")
    grid = np.linspace(0.0, 200.0, 2001) if check_grid is None else np.asarray(check_grid, dtype=float)
    gaps = binary_gap(mu, grid)
    monotone = bool(np.all(np.diff(gaps) <= 1e-15))
    delta = binary_delta(mu)
    verdict = "certified" if delta > 0 and monotone else ("unknown" if delta > 0 else "not_certified")
    return CertificateReport(
        d=2, mu=mu, C=mu / 3, c=None, kappa_d=None, b=None, p=None, q_mode="exact",
        delta=delta, lambda_sup=math.inf, uniform_bound=math.log1p(math.exp(-mu / 3)),
        verdict=verdict, details={"gap_nonincreasing_on_grid": monotone, "gap_at_zero": float(gaps[0])},
    )


# --------------------------------------------------------------------------- general d


def _check_dc(d, c):
    if not c > 1:
        raise ValueError("c must exceed 1")
    if not d > c:
        raise ValueError(f"need d > c (got d={d}, c={c})")
    if kappa(d, c) >= d:
        raise ValueError(f"kappa = ceil(d/c) must be below d (d={d}, c={c})")


def case2_weight(d: int, C: float, c: float, q_mode: str) -> float:
    if q_mode == "exact":
        return case2_probability(d, C, c)
    if q_mode == "bounded":
        return case2_bound(d, C, c)
    raise ValueError(f"q_mode must be one of {Q_MODES}")


def _log_base(lam: np.ndarray, d: int, c: float) -> np.ndarray:
    """log(1 + e^{-lam/c}(e^{lam/d} - 1)); tends to 0 as lam -> inf since d > c."""
    finite = np.isfinite(lam)
    safe = np.where(finite, lam, 0.0)
    return np.where(finite, np.log1p(np.exp(-safe / c) * np.expm1(safe / d)), 0.0)


def _log_terms(lam: np.ndarray, d: int, c: float, k: int):
    """log of (e^{-lam/c+lam/d} + 1 - e^{-lam/c})^{d-k} and of (2 - e^{-lam/d})^{d-1}."""
    g = _log_base(lam, d, c)
    return (d - k) * g, (d - 1) * np.log1p(-np.expm1(-lam / d))


def h_Cc(lam, d: int, C: float, c: float, q_mode: str = "bounded"):
    """log[(e^{-lam/c+lam/d} + 1 - e^{-lam/c})^{d-kappa} + p (2 - e^{-lam/d})^{d-1}].

    ``q_mode="exact"`` evaluates the sharper
    log[(1-q)(...)^{d-kappa} + q (2 - e^{-lam/d})^{d-1}] with q the exact
    probability of the second case.  Both are in log space.
    """
    _check_dc(d, c)
    lam = np.asarray(lam, dtype=float)
    k = kappa(d, c)
    w = case2_weight(d, C, c, q_mode)
    first, second = _log_terms(lam, d, c, k)
    lw = math.log(w) if w > 0 else -math.inf
    if q_mode == "exact":
        out = np.logaddexp(math.log1p(-w) + first if w < 1 else -math.inf, lw + second)
    else:
        out = np.logaddexp(first, lw + second)
    return float(out) if out.ndim == 0 else out


def lipschitz_constant(d: int, c: float) -> float:
    """Bound on |h_Cc'| valid for every lam >= 0 and both q modes.

    h' is a convex combination of the log-derivatives of the two terms:
    (d - kappa) g'/g with |g'| <= 1/d + 1/c and g >= 1, and (d - 1) e^{-lam/d} / (d (2 - e^{-lam/d})) < 1.
    """
    return max((d - kappa(d, c)) * (1.0 / d + 1.0 / c), 1.0)


def eq_Cc_threshold(c: float) -> float:
    """C above which b > log 2; inf when no C works for this c."""
    inner = 1.0 - 1.0 / c - math.sqrt(LOG2 / 2.0)
    return -math.log(inner) if inner > 0 else math.inf


def log_majorant(d: int, C: float, c: float) -> float:
    """log of exp(d(c-1)/(d-c)) + e^{-bd} 2^{d-1}."""
    b = hoeffding_exponent(C, c) if 1.0 - math.exp(-C) - 1.0 / c > 0 else 0.0
    return float(np.logaddexp(d * (c - 1) / (d - c), -b * d + (d - 1) * LOG2))


def majorant(d: int, C: float, c: float) -> float:
    return math.exp(log_majorant(d, C, c))


def log_tobound(lam, d: int, C: float, c: float, q_mode: str = "bounded"):
    """log of (1 + e^{-lam/c}(e^{lam/d} - 1))^{d(1-1/c)} + w 2^{d-1}, w = p or q."""
    lam = np.asarray(lam, dtype=float)
    w = case2_weight(d, C, c, q_mode)
    g = _log_base(lam, d, c)
    lw = math.log(w) if w > 0 else -math.inf
    out = np.logaddexp(d * (1 - 1 / c) * g, lw + (d - 1) * LOG2)
    return float(out) if out.ndim == 0 else out


def dary_certificate(
    d: int,
    C: float,
    c: float,
    q_mode: str = "bounded",
    lambda_grid_step: float | None = None,
    chunk: int = 1 << 18,
) -> CertificateReport:
    """Bound sup_lam h_Cc and compare it with C.

    On [0, lam_T] the grid values are closed with the Lipschitz slack
    (h_i + h_{i+1})/2 + L s/2.  Beyond lam_T, the first term of h_Cc is
    decreasing (its base peaks where e^{lam/d} = d/(d-c) < e^{lam_T/d}) and the
    second is below w 2^{d-1}, so log_tobound(lam_T) covers the rest.
    """
    _check_dc(d, c)
    if not C > 0:
        raise ValueError("C must be positive")
    case2_weight(d, C, c, q_mode)
    k = kappa(d, c)
    b = hoeffding_exponent(C, c)
    p = case2_bound(d, C, c)
    lam_star = d * math.log(d / (d - c))
    lam_T = 4.0 * lam_star
    L = lipschitz_constant(d, c)
    step = 0.02 / L if lambda_grid_step is None else float(lambda_grid_step)
    if not step > 0:
        raise ValueError("grid step must be positive")
    n = int(math.ceil(lam_T / step))
    step = lam_T / n

    point_max, point_arg, closed = -math.inf, 0.0, -math.inf
    prev = None
    for start in range(0, n + 1, chunk):
        idx = np.arange(start, min(start + chunk, n + 1))
        vals = h_Cc(idx * step, d, C, c, q_mode)
        vals = np.atleast_1d(vals)
        j = int(np.argmax(vals))
        if vals[j] > point_max:
            point_max, point_arg = float(vals[j]), float(idx[j] * step)
        joined = vals if prev is None else np.concatenate([[prev], vals])
        if len(joined) > 1:
            closed = max(closed, float(np.max(0.5 * (joined[:-1] + joined[1:]))))
        prev = vals[-1]
    grid_bound = closed + L * step / 2
    tail_bound = log_tobound(lam_T, d, C, c, q_mode)
    w = case2_weight(d, C, c, q_mode)
    limit = h_Cc(np.inf, d, C, c, q_mode) if w > 0 else 0.0
    sup_bound = max(grid_bound, tail_bound)
    delta = C - sup_bound
    if delta > 0:
        verdict = "certified"
    elif point_max >= C or limit >= C:
        verdict = "not_certified"
    else:
        verdict = "unknown"
    lam_sup = point_arg if grid_bound >= tail_bound else math.inf
    eq_cc = eq_Cc_threshold(c)
    return CertificateReport(
        d=d, mu=C * (d + 1), C=C, c=c, kappa_d=k, b=b, p=p, q_mode=q_mode,
        delta=delta, lambda_sup=lam_sup, uniform_bound=sup_bound, verdict=verdict,
        details={
            "grid_points": n + 1,
            "grid_step": step,
            "lipschitz": L,
            "lambda_T": lam_T,
            "lambda_star": lam_star,
            "grid_max": point_max,
            "grid_bound": grid_bound,
            "tail_bound": tail_bound,
            "limit_at_infinity": limit,
            "q": case2_probability(d, C, c),
            "eq_Cc_threshold": eq_cc,
            "eq_Cc_holds": C > eq_cc,
            "b_minus_log2": b - LOG2 if 1.0 - math.exp(-C) - 1.0 / c > 0 else -LOG2,
            "log_majorant": log_majorant(d, C, c),
            "majorant_below_eC": log_majorant(d, C, c) < C,
        },
    )


# --------------------------------------------------------------------------- d0 and constants


def _majorant_ok(d, C, c):
    return log_majorant(d, C, c) < C


def find_d0(C: float, c: float, d_max: int = 10**9) -> int:
    """Smallest d with the lam-free majorant below e^C.

    Both terms decrease in d once b > log 2, so after the first hit the
    condition holds for all larger d; the search doubles then bisects.
    """
    if not c > 1:
        raise ValueError("c must exceed 1")
    if not C > eq_Cc_threshold(c):
        raise ValueError(f"C = {C} does not exceed the threshold {eq_Cc_threshold(c):.6f} where b = log 2")
    if not C > c - 1:
        raise ValueError("the first term tends to e^{c-1} >= e^C; no d works")
    lo = int(math.floor(c)) + 1
    while kappa(lo, c) >= lo:
        lo += 1
    if _majorant_ok(lo, C, c):
        return lo
    hi = lo
    while not _majorant_ok(hi, C, c):
        lo, hi = hi, hi * 2
        if hi > d_max:
            raise ValueError("majorant stays above e^C up to d_max")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _majorant_ok(mid, C, c):
            hi = mid
        else:
            lo = mid
    return hi


def majorant_min_C(d: int, c: float, C_max: float = 20.0) -> float:
    """Smallest C with the lam-free majorant below e^C at (d, c); inf if none up to C_max."""
    if not d > c > 1:
        raise ValueError("need d > c > 1")
    lo = max(eq_Cc_threshold(c), 1e-9)
    if not math.isfinite(lo) or not _majorant_ok(d, C_max, c):
        return math.inf
    hi = C_max
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _majorant_ok(d, mid, c):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class OptimizationResult:
    d: int
    feasible: bool
    C: float
    c: float
    report: CertificateReport | None
    q_mode: str = "exact"

    def to_dict(self) -> dict:
        out = {"d": self.d, "feasible": self.feasible, "C": self.C, "c": self.c, "q_mode": self.q_mode}
        out["report"] = None if self.report is None else self.report.to_dict()
        return _jsonable(out)


def _min_C_for(d, c, q_mode, C_lo, C_hi, tol, step):
    """Smallest certifying C in [C_lo, C_hi], bisecting on the verdict; inf if C_hi fails."""
    def ok(C):
        return dary_certificate(d, C, c, q_mode, step).certified

    if not ok(C_hi):
        return math.inf
    lo, hi = C_lo, C_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def optimize_constants(
    d: int,
    q_mode: str = "exact",
    c_bounds: tuple = (1.1, 8.0),
    C_bounds: tuple = (0.01, 6.0),
    c_points: int = 24,
    tol: float = 1e-4,
    lambda_grid_step: float | None = None,
) -> OptimizationResult:
    """Smallest C (over c in ``c_bounds``) for which ``dary_certificate`` certifies.

    A coarse scan over c is followed by golden-section refinement of the best
    cell; for each c the smallest C is found by bisection.  The returned point is
    re-certified at the default grid step.
    """
    if d < 3:
        raise ValueError("d must be at least 3")
    c_lo, c_hi = c_bounds
    c_lo = max(c_lo, d / (d - 1) + 1e-9)
    c_hi = min(c_hi, d - 1e-9)
    if not c_hi > c_lo or c_hi <= 1:
        return OptimizationResult(d, False, math.inf, math.nan, None, q_mode)

    def best_C(c):
        try:
            return _min_C_for(d, c, q_mode, C_bounds[0], C_bounds[1], tol, lambda_grid_step)
        except ValueError:
            return math.inf

    cs = np.linspace(c_lo, c_hi, c_points)
    Cs = np.array([best_C(c) for c in cs])
    if not np.isfinite(Cs).any():
        return OptimizationResult(d, False, math.inf, math.nan, None, q_mode)
    i = int(np.argmin(Cs))
    a, bnd = cs[max(i - 1, 0)], cs[min(i + 1, len(cs) - 1)]
    res = optimize.minimize_scalar(best_C, bounds=(a, bnd), method="bounded", options={"xatol": 1e-3})
    c_best, C_best = (float(res.x), float(res.fun)) if res.fun < Cs[i] else (float(cs[i]), float(Cs[i]))
    report = dary_certificate(d, C_best, c_best, q_mode)
    if not report.certified:
        C_best = _min_C_for(d, c_best, q_mode, C_best, C_bounds[1], tol, None)
        report = dary_certificate(d, C_best, c_best, q_mode)
    return OptimizationResult(d, report.certified, C_best, c_best, report, q_mode)


# --------------------------------------------------------------------------- iteration


@dataclass
class BootstrapTrace:
    lambdas: list
    gaps: list
    diverged: bool

    def to_dict(self):
        return _jsonable(asdict(self))


def bootstrap_iterate(gap, steps: int, bound: float = math.inf) -> BootstrapTrace:
    """lam_0 = 0, lam_{k+1} = lam_k + gap(lam_k), stopping past ``bound`` or at a nonpositive gap."""
    lambdas, gaps = [0.0], []
    lam = 0.0
    for _ in range(steps):
        g = float(gap(lam))
        gaps.append(g)
        if not g > 0:
            return BootstrapTrace(lambdas, gaps, False)
        lam += g
        if lam == lambdas[-1]:
            # increment below floating resolution: a numerical fixed point
            return BootstrapTrace(lambdas, gaps, False)
        lambdas.append(lam)
        if lam > bound:
            return BootstrapTrace(lambdas, gaps, True)
    return BootstrapTrace(lambdas, gaps, False)
