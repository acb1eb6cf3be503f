"""Stochastic dominance between a Poisson law and Poisson mixtures.

For a random rate U, Poi(lam) is stochastically below Poi(U) exactly when
lam <= -log E exp(-U), i.e. when the zero probabilities are ordered.  The
helpers ``h_n`` give the link: h_n(exp(-lam)) = P[Poi(lam) <= n] and h_n is
increasing and concave on (0, 1], so Jensen applied to h_n(E e^{-U}) compares
every distribution function at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .operators import DiscreteDist, FinitePmf, Poisson, PoissonMixture

CDF_TOL = 1e-12


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)) or np.any(x > 1):
        raise ValueError("h_n is defined for 0 < x <= 1")
    return x


def h_n(n: int, x):
    """x * sum_{k<=n} (-log x)^k / k!."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    x = _check_x(x)
    y = -np.log(x)
    term = np.ones_like(y)
    total = np.ones_like(y)
    for k in range(1, n + 1):
        term = term * y / k
        total = total + term
    out = x * total
    return float(out) if out.ndim == 0 else out


def h_n_derivative(n: int, x):
    """(-log x)^n / n!; every other term of the derivative telescopes away."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    x = _check_x(x)
    out = np.exp(n * np.log(np.maximum(-np.log(x), 0.0)) - math.lgamma(n + 1)) if n else np.ones_like(x)
    out = np.where(x == 1.0, 1.0 if n == 0 else 0.0, out)
    return float(out) if out.ndim == 0 else out


def _mixture_form(dist) -> tuple[np.ndarray, np.ndarray] | None:
    """(weights, rates) when ``dist`` is a Poisson law or a finite Poisson mixture."""
    if isinstance(dist, Poisson):
        return np.array([1.0]), np.array([float(dist.rate)])
    if isinstance(dist, PoissonMixture):
        return dist.weights, dist.rates
    return None


def critical_rate(target) -> float:
    """-log E exp(-U) for target Poi(U); the largest lam with Poi(lam) below target."""
    form = _mixture_form(target)
    if form is None:
        raise ValueError(f"critical_rate needs a Poisson or Poisson-mixture law, got {type(target).__name__}")
    w, r = form
    keep = w > 0
    return float(-logsumexp(np.log(w[keep]) - r[keep]))


def critical_rate_affine(a: float, U: FinitePmf, s: float) -> float:
    """critical_rate of Poi(a + s U) for a finite random variable U."""
    if U.inf_mass > 0:
        raise ValueError("U must be finite")
    keep = U.probs > 0
    return float(a - logsumexp(np.log(U.probs[keep]) - s * U.values[keep]))


@dataclass(frozen=True)
class DominanceVerdict:
    dominated: bool
    critical_rate: float
    margin: float


def poisson_dominance(lam: float, target) -> DominanceVerdict:
    crit = critical_rate(target)
    margin = crit - lam
    return DominanceVerdict(margin >= 0, crit, margin)


@dataclass(frozen=True)
class BruteForceResult:
    """Outcome of a direct comparison; ``holds`` is None when the tail stays open."""

    holds: bool | None
    first_violation: int | None = None
    reason: str = ""

    def __bool__(self):
        if self.holds is None:
            raise ValueError("inconclusive dominance check has no truth value: " + self.reason)
        return self.holds


def _tail_closes(a: DiscreteDist, b: DiscreteDist, n_max: int) -> tuple[bool | None, str]:
    """Decide P[a > k] <= P[b > k] for every k > n_max."""
    a_top = a.support_max()
    if a_top is not None and a_top <= n_max + 1 and a.inf_mass == 0:
        return True, "a has no mass beyond n_max + 1"
    if b.inf_mass > 0 and float(a.sf(np.array([n_max]))[0]) <= b.inf_mass + CDF_TOL:
        return True, "mass of b at infinity covers the tail of a"
    b_top = b.support_max()
    if b_top is not None and (a_top is None or a_top > b_top) and b_top <= n_max:
        # b has no mass past b_top while a still does
        return False, "b has bounded support, a does not"
    fa, fb = _mixture_form(a), _mixture_form(b)
    if fa is not None and fb is not None:
        # Restrict b to components J with rate >= every rate of a.  Each
        # pmf(s, k) / pmf(r_j, k) is nonincreasing in k, hence so is
        # pmf_a / sum_J w_j pmf(r_j); once <= 1 at n_max + 1 it stays there.
        k = np.array([n_max + 1])
        pa = float(a.pmf(k)[0])
        wb, rb = fb
        top = rb >= fa[1].max()
        if top.any() and float(PoissonMixture(wb[top] / wb[top].sum(), rb[top]).pmf(k)[0]) * wb[top].sum() >= pa:
            return True, "likelihood ratio against the upper components of b"
    return None, "no tail certificate applies; increase n_max"


def brute_force_dominates(a: DiscreteDist, b: DiscreteDist, n_max: int) -> BruteForceResult:
    """Check a <= b in the usual stochastic order by comparing distribution functions.

    Every k <= n_max is compared directly (upper tails are compared through the
    survival functions for accuracy), and the region past n_max is closed by a
    tail certificate or reported as inconclusive.
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    if a.inf_mass > b.inf_mass + CDF_TOL:
        return BruteForceResult(False, None, "a puts more mass at infinity")
    k = np.arange(n_max + 1)
    ca, cb = a.cdf(k), b.cdf(k)
    sa, sb = a.sf(k), b.sf(k)
    upper = (ca > 0.5) & (cb > 0.5)
    bad = np.where(upper, sa > sb + CDF_TOL, cb > ca + CDF_TOL)
    if bad.any():
        return BruteForceResult(False, int(np.argmax(bad)), "distribution functions cross")
    holds, why = _tail_closes(a, b, n_max)
    return BruteForceResult(holds, None, why)
