"""Laws on the extended nonnegative integers and the star-graph operators B, U.

The star graph has centre rho', root leaf rho and leaves u_1..u_d (index 0 is
u_1).  The initial frog walks rho -> rho' -> u_1, waking the Poi(mu) frogs at
rho'; each of those takes one uniform step to a leaf (rho included) and stops.
Every newly woken leaf u_i releases pi-many frogs, which step back to rho' and
then uniformly to one of the d leaves other than u_i.  B(pi) is the law of the
number of frogs ending at rho, U(pi) the law of the number of u_i visited.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .rng import poisson_quantile

WEIGHT_TOL = 1e-12
INFINITE = np.iinfo(np.int64).max


def _poisson_cutoff(rate: float) -> int:
    return int(math.ceil(rate + 40.0 * math.sqrt(rate) + 40.0))


class DiscreteDist:
    """Common interface.  ``pmf``/``cdf``/``sf`` accept integer arrays."""

    kind = "abstract"

    def pmf(self, k) -> np.ndarray:
        raise NotImplementedError

    def cdf(self, k) -> np.ndarray:
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        table = np.cumsum(self.pmf(np.arange(int(k.max()) + 1)))
        return np.where(k < 0, 0.0, table[np.clip(k, 0, None)])

    def sf(self, k) -> np.ndarray:
        """P[X > k], mass at infinity included."""
        return 1.0 - self.cdf(k)

    @property
    def inf_mass(self) -> float:
        return 0.0

    def zero_prob(self) -> float:
        return float(self.pmf(np.array([0]))[0])

    def truncation_point(self) -> int:
        """Index beyond which the finite mass is negligible (or zero)."""
        raise NotImplementedError

    def support_max(self) -> int | None:
        """Largest finite support point if the support is bounded, else None."""
        return None

    def pmf_table(self, n_max: int | None = None) -> tuple[np.ndarray, float]:
        """pmf on 0..n_max and the finite mass left beyond it (excluding infinity)."""
        n_max = self.truncation_point() if n_max is None else n_max
        table = self.pmf(np.arange(n_max + 1))
        remainder = max(0.0, float(self.sf(np.array([n_max]))[0]) - self.inf_mass)
        return table, remainder

    def mean(self) -> float:
        if self.inf_mass > 0:
            return math.inf
        table, _ = self.pmf_table()
        return float(np.dot(np.arange(len(table)), table))

    def ppf(self, u: float) -> int:
        """Smallest k with P[X <= k] >= u; INFINITE when only infinity reaches u."""
        if u <= 0.0:
            return 0
        hi = self.truncation_point()
        table = np.cumsum(self.pmf(np.arange(hi + 1)))
        idx = int(np.searchsorted(table, u, side="left"))
        return idx if idx <= hi else INFINITE

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.array([self.ppf(u) for u in rng.random(size)], dtype=np.int64)

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class FinitePmf(DiscreteDist):
    values: np.ndarray
    probs: np.ndarray
    infinity: float = 0.0

    kind = "finite"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=float)
        if values.shape != probs.shape or values.ndim != 1:
            raise ValueError("values and probabilities must be 1-d arrays of equal length")
        if np.any(values < 0) or len(np.unique(values)) != len(values):
            raise ValueError("values must be distinct nonnegative integers")
        if np.any(probs < 0) or np.any(probs > 1) or not 0 <= self.infinity <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(probs.sum() + self.infinity - 1.0) > WEIGHT_TOL:
            raise ValueError(f"probabilities sum to {probs.sum() + self.infinity!r}, not 1")
        order = np.argsort(values)
        object.__setattr__(self, "values", values[order])
        object.__setattr__(self, "probs", probs[order])

    @classmethod
    def from_samples(cls, samples) -> "FinitePmf":
        samples = np.asarray(samples)
        infinite = samples >= INFINITE
        values, counts = np.unique(samples[~infinite], return_counts=True)
        n = len(samples)
        return cls(values, counts / n, infinity=float(infinite.sum()) / n)

    @classmethod
    def point_mass(cls, k: int) -> "FinitePmf":
        return cls(np.array([k]), np.array([1.0]))

    @classmethod
    def from_mapping(cls, mapping: dict) -> "FinitePmf":
        keys = sorted(mapping)
        return cls(np.array(keys), np.array([mapping[k] for k in keys]))

    @property
    def inf_mass(self) -> float:
        return float(self.infinity)

    def pmf(self, k) -> np.ndarray:
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        out = np.zeros(k.shape)
        idx = np.searchsorted(self.values, k)
        ok = (idx < len(self.values)) & (self.values[np.minimum(idx, len(self.values) - 1)] == k)
        out[ok] = self.probs[idx[ok]]
        return out

    def cdf(self, k) -> np.ndarray:
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        cum = np.concatenate([[0.0], np.cumsum(self.probs)])
        return cum[np.searchsorted(self.values, k, side="right")]

    def sf(self, k) -> np.ndarray:
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        tail = np.concatenate([np.cumsum(self.probs[::-1])[::-1], [0.0]])
        return tail[np.searchsorted(self.values, k, side="right")] + self.infinity

    def truncation_point(self) -> int:
        return int(self.values.max()) if len(self.values) else 0

    def support_max(self) -> int | None:
        return None if self.infinity > 0 else self.truncation_point()

    def ppf(self, u: float) -> int:
        if u <= 0.0:
            return 0
        cum = np.cumsum(self.probs)
        idx = int(np.searchsorted(cum, u, side="left"))
        if idx < len(self.values):
            return int(self.values[idx])
        return INFINITE if self.infinity > 0 else int(self.values[-1])

    def sample(self, rng, size):
        support = np.append(self.values, INFINITE) if self.infinity > 0 else self.values
        p = np.append(self.probs, self.infinity) if self.infinity > 0 else self.probs
        return rng.choice(support, size=size, p=p / p.sum())

    def to_dict(self):
        return {
            "kind": self.kind,
            "values": [int(v) for v in self.values],
            "probabilities": [float(p) for p in self.probs],
            "infinity": float(self.infinity),
        }


@dataclass(frozen=True, eq=False)
class Poisson(DiscreteDist):
    rate: float

    kind = "poisson"

    def __post_init__(self):
        if not self.rate >= 0:
            raise ValueError("Poisson rate must be nonnegative")

    def pmf(self, k):
        return stats.poisson.pmf(np.atleast_1d(k), self.rate)

    def cdf(self, k):
        return stats.poisson.cdf(np.atleast_1d(k), self.rate)

    def sf(self, k):
        return stats.poisson.sf(np.atleast_1d(k), self.rate)

    def truncation_point(self):
        return _poisson_cutoff(self.rate)

    def zero_prob(self):
        return math.exp(-self.rate)

    def mean(self):
        return float(self.rate)

    def ppf(self, u):
        return poisson_quantile(self.rate, u)

    def sample(self, rng, size):
        return rng.poisson(self.rate, size)

    def as_mixture(self) -> "PoissonMixture":
        return PoissonMixture(np.array([1.0]), np.array([self.rate]))

    def to_dict(self):
        return {"kind": self.kind, "rate": float(self.rate)}


@dataclass(frozen=True, eq=False)
class PoissonMixture(DiscreteDist):
    """Law of Poi(R) where R takes value ``rates[j]`` with probability ``weights[j]``."""

    weights: np.ndarray
    rates: np.ndarray

    kind = "poisson_mixture"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        r = np.asarray(self.rates, dtype=float)
        if w.shape != r.shape or w.ndim != 1 or len(w) == 0:
            raise ValueError("weights and rates must be nonempty 1-d arrays of equal length")
        if np.any(w < 0) or np.any(w > 1) or abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError("mixture weights must be probabilities summing to 1")
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("mixture rates must be finite and nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rates", r)

    def pmf(self, k):
        k = np.atleast_1d(k)
        return stats.poisson.pmf(k[:, None], self.rates[None, :]) @ self.weights

    def cdf(self, k):
        k = np.atleast_1d(k)
        return stats.poisson.cdf(k[:, None], self.rates[None, :]) @ self.weights

    def sf(self, k):
        k = np.atleast_1d(k)
        return stats.poisson.sf(k[:, None], self.rates[None, :]) @ self.weights

    def truncation_point(self):
        return _poisson_cutoff(float(self.rates.max()))

    def zero_prob(self):
        return float(np.dot(self.weights, np.exp(-self.rates)))

    def mean(self):
        return float(np.dot(self.weights, self.rates))

    def sample(self, rng, size):
        comp = rng.choice(len(self.weights), size=size, p=self.weights / self.weights.sum())
        return rng.poisson(self.rates[comp])

    def simplified(self) -> "PoissonMixture":
        """Merge components with equal rates and drop zero weights."""
        merged: dict = defaultdict(float)
        for w, r in zip(self.weights, self.rates):
            if w > 0:
                merged[float(r)] += float(w)
        rates = np.array(sorted(merged))
        return PoissonMixture(np.array([merged[r] for r in rates]), rates)

    def to_dict(self):
        return {"kind": self.kind, "weights": self.weights.tolist(), "rates": self.rates.tolist()}


@dataclass(frozen=True, eq=False)
class ShiftedBinomialMixture(DiscreteDist):
    """Mixture of ``shift + Bin(trials, p)`` components; rows are (weight, shift, trials, p)."""

    components: tuple

    kind = "shifted_binomial_mixture"

    def __post_init__(self):
        comps = tuple((float(w), int(s), int(n), float(p)) for w, s, n, p in self.components)
        if not comps:
            raise ValueError("need at least one component")
        total = sum(c[0] for c in comps)
        if abs(total - 1.0) > WEIGHT_TOL or any(not 0 <= c[0] <= 1 for c in comps):
            raise ValueError("mixture weights must be probabilities summing to 1")
        if any(c[1] < 0 or c[2] < 0 or not 0 <= c[3] <= 1 for c in comps):
            raise ValueError("shifts and trials must be nonnegative, success probabilities in [0, 1]")
        object.__setattr__(self, "components", comps)

    def pmf(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        out = np.zeros(k.shape)
        for w, s, n, p in self.components:
            out += w * stats.binom.pmf(k - s, n, p)
        return out

    def cdf(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        out = np.zeros(k.shape)
        for w, s, n, p in self.components:
            out += w * stats.binom.cdf(k - s, n, p)
        return out

    def sf(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        out = np.zeros(k.shape)
        for w, s, n, p in self.components:
            out += w * stats.binom.sf(k - s, n, p)
        return out

    def truncation_point(self):
        return max(s + n for _, s, n, _ in self.components)

    def support_max(self):
        return self.truncation_point()

    def sample(self, rng, size):
        weights = np.array([c[0] for c in self.components])
        comp = rng.choice(len(weights), size=size, p=weights / weights.sum())
        shifts = np.array([c[1] for c in self.components])[comp]
        trials = np.array([c[2] for c in self.components])[comp]
        probs = np.array([c[3] for c in self.components])[comp]
        return shifts + rng.binomial(trials, probs)

    def to_dict(self):
        return {
            "kind": self.kind,
            "components": [
                {"weight": w, "shift": s, "trials": n, "p": p} for w, s, n, p in self.components
            ],
        }


def dist_from_dict(data: dict) -> DiscreteDist:
    kind = data.get("kind")
    if kind == "finite":
        return FinitePmf(np.array(data["values"]), np.array(data["probabilities"]), data.get("infinity", 0.0))
    if kind == "poisson":
        return Poisson(data["rate"])
    if kind == "poisson_mixture":
        return PoissonMixture(np.array(data["weights"]), np.array(data["rates"]))
    if kind == "shifted_binomial_mixture":
        return ShiftedBinomialMixture(
            tuple((c["weight"], c["shift"], c["trials"], c["p"]) for c in data["components"])
        )
    raise ValueError(f"unknown distribution kind {kind!r}")


def total_variation(a: DiscreteDist, b: DiscreteDist) -> float:
    """TV distance, with any finite mass past the truncation points counted in full.

    The result is an upper bound; it is exact when both laws have bounded support.
    """
    n = max(a.truncation_point(), b.truncation_point())
    pa, ra = a.pmf_table(n)
    pb, rb = b.pmf_table(n)
    return 0.5 * (float(np.abs(pa - pb).sum()) + ra + rb + abs(a.inf_mass - b.inf_mass))


# --------------------------------------------------------------------------- star model


@dataclass(frozen=True)
class StarModelParams:
    d: int
    mu: float
    leaf_law: DiscreteDist

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 2:
            raise ValueError("d must be an integer >= 2")
        if not self.mu >= 0:
            raise ValueError("mu must be nonnegative")


def sample_star(params: StarModelParams, rng: np.random.Generator) -> tuple[int | float, int]:
    """One run of the star-graph cascade; returns (frogs ending at rho, leaves visited).

    Leaf frog counts are drawn by inversion from one uniform per leaf and the
    moves of the frogs at leaf i come from their own child stream, in order, so
    two calls with equal seeds but leaf laws pi_1 <= pi_2 run on nested frog sets.
    Returns ``math.inf`` frogs at rho when some visited leaf holds infinitely many.
    """
    d, mu = int(params.d), params.mu
    n_center = int(rng.poisson(mu))
    landing = np.floor(rng.random(n_center) * (d + 1)).astype(np.int64)
    leaf_u = rng.random(d)
    leaf_streams = rng.spawn(d)

    returns: int | float = int(np.count_nonzero(landing == 0))
    visited = {0} | {int(x) - 1 for x in landing[landing > 0]}
    frontier = sorted(visited)
    while frontier:
        fresh = set()
        for i in frontier:
            count = params.leaf_law.ppf(leaf_u[i])
            if count >= INFINITE:
                returns = math.inf
                fresh |= set(range(d)) - visited
                continue
            for slot in np.floor(leaf_streams[i].random(count) * d).astype(np.int64):
                if slot == 0:
                    returns += 1
                else:
                    j = int(slot) - 1
                    fresh.add(j if j < i else j + 1)
        fresh -= visited
        visited |= fresh
        frontier = sorted(fresh)
    return returns, len(visited)


def _star_batch(params: StarModelParams, rng: np.random.Generator, n: int):
    """Vectorized cascade for ``n`` independent star models."""
    d, mu = int(params.d), params.mu
    n_center = rng.poisson(mu, n)
    dest = rng.multinomial(n_center, np.full(d + 1, 1.0 / (d + 1)))
    returns = dest[:, 0].astype(np.int64)
    visited = dest[:, 1:] > 0
    visited[:, 0] = True
    infinite = np.zeros(n, dtype=bool)
    new = visited.copy()
    # slot j >= 1 from leaf i goes to leaf (j - 1) if j - 1 < i else j
    slot_to_leaf = np.array([[j - 1 if j - 1 < i else j for j in range(1, d)] for i in range(d)], dtype=np.int64)
    while new.any():
        rows, leaves = np.nonzero(new)
        counts = params.leaf_law.sample(rng, len(rows))
        inf_draw = counts >= INFINITE
        if inf_draw.any():
            hit_rows = np.unique(rows[inf_draw])
            infinite[hit_rows] = True
            counts = np.where(inf_draw, 0, counts)
        moves = rng.multinomial(counts, np.full(d, 1.0 / d))
        np.add.at(returns, rows, moves[:, 0])
        hits = np.zeros((n, d), dtype=np.int64)
        if d > 1:
            np.add.at(hits, (np.repeat(rows, d - 1), slot_to_leaf[leaves].ravel()), moves[:, 1:].ravel())
        fresh = (hits > 0) & ~visited
        if inf_draw.any():
            fresh[hit_rows] = ~visited[hit_rows]
        visited |= fresh
        new = fresh
    return returns, visited.sum(axis=1), infinite


MC_BLOCK = 1 << 16


def monte_carlo_star(params: StarModelParams, samples: int, seed: int = 0, threads: int = 1):
    """``samples`` independent star runs in fixed blocks of 2**16, one seed stream per block.

    Returns (returns_to_rho, activated_leaves, infinite_flags); identical for any
    ``threads``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    sizes = [min(MC_BLOCK, samples - start) for start in range(0, samples, MC_BLOCK)]

    def block(b):
        rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(b,)))
        return _star_batch(params, rng, sizes[b])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, range(len(sizes))))
    else:
        parts = [block(b) for b in range(len(sizes))]
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def monte_carlo_B(params: StarModelParams, samples: int, seed: int = 0, threads: int = 1) -> FinitePmf:
    """Empirical law of the number of frogs ending at rho."""
    returns, _, infinite = monte_carlo_star(params, samples, seed, threads)
    return FinitePmf.from_samples(np.where(infinite, INFINITE, returns))


def monte_carlo_U(params: StarModelParams, samples: int, seed: int = 0, threads: int = 1) -> FinitePmf:
    _, leaves, _ = monte_carlo_star(params, samples, seed, threads)
    return FinitePmf.from_samples(leaves)


# --------------------------------------------------------------------------- exact forms


def _check_nonnegative(**values):
    for name, value in values.items():
        if not value >= 0:
            raise ValueError(f"{name} must be nonnegative, got {value!r}")


def exact_U_binary(mu: float, lam: float) -> FinitePmf:
    """U(Poi(lam)) on the binary tree: 1 w.p. exp(-mu/3 - lam/2), else 2."""
    _check_nonnegative(mu=mu, lam=lam)
    one = math.exp(-mu / 3 - lam / 2)
    return FinitePmf(np.array([1, 2]), np.array([one, 1.0 - one]))


def exact_B_binary(mu: float, lam: float) -> PoissonMixture:
    _check_nonnegative(mu=mu, lam=lam)
    w = math.exp(-mu / 3 - lam / 2)
    return PoissonMixture(np.array([w, 1.0 - w]), np.array([mu / 3 + lam / 2, mu / 3 + lam]))


def exact_U(d: int, mu: float, lam: float) -> FinitePmf:
    """U(Poi(lam)) for any d, as the final size of a chain-binomial epidemic.

    By thinning, the rho' frogs hit each u_2..u_d independently with
    probability 1 - exp(-mu/(d+1)), and each visited leaf independently hits each
    unvisited one with probability 1 - exp(-lam/d).  Generations are tracked as
    (unvisited, newly visited) pairs until no new leaf is visited.
    """
    _check_nonnegative(mu=mu, lam=lam)
    if d < 2:
        raise ValueError("d must be >= 2")
    a = -math.expm1(-mu / (d + 1))
    final = np.zeros(d + 1)
    states: dict = defaultdict(float)
    for extra, pr in enumerate(stats.binom.pmf(np.arange(d), d - 1, a)):
        states[(d - 1 - extra, 1 + extra)] += pr
    while states:
        nxt: dict = defaultdict(float)
        for (s, i), pr in states.items():
            if s == 0:
                final[d] += pr
                continue
            hit = -math.expm1(-lam * i / d)
            probs = stats.binom.pmf(np.arange(s + 1), s, hit)
            final[d - s] += pr * probs[0]
            for k in range(1, s + 1):
                if probs[k] > 0:
                    nxt[(s - k, k)] += pr * probs[k]
        states = nxt
    support = np.arange(1, d + 1)
    probs = final[1:]
    return FinitePmf(support, probs / probs.sum())


def B_from_U(mu: float, d: int, lam: float, U_dist: DiscreteDist) -> PoissonMixture:
    """B(Poi(lam)) = Poi(mu/(d+1) + U lam/d) as a mixture over the values of U."""
    _check_nonnegative(mu=mu, lam=lam)
    if U_dist.inf_mass > 0:
        raise ValueError("U must be supported on {1, ..., d}")
    top = U_dist.truncation_point()
    probs = U_dist.pmf(np.arange(max(top, d) + 1))
    outside = probs[0] + probs[d + 1 :].sum() + (U_dist.sf(np.array([max(top, d)]))[0])
    if outside > WEIGHT_TOL:
        raise ValueError("U must be supported on {1, ..., d}")
    u = np.arange(1, d + 1)
    w = probs[1 : d + 1]
    keep = w > 0
    return PoissonMixture(w[keep] / w[keep].sum(), mu / (d + 1) + u[keep] * lam / d)


def exact_B(d: int, mu: float, lam: float) -> PoissonMixture:
    return B_from_U(mu, d, lam, exact_U(d, mu, lam))


# --------------------------------------------------------------------------- U'' and friends


def kappa(d: int, c: float) -> int:
    """Case-1 activation threshold ceil(d/c)."""
    return int(math.ceil(d / c))


def hoeffding_exponent(C: float, c: float) -> float:
    """b = 2 (1 - e^{-C} - 1/c)^2."""
    return 2.0 * (1.0 - math.exp(-C) - 1.0 / c) ** 2


def case2_bound(d: int, C: float, c: float) -> float:
    """Bound p on P[Bin(d, 1 - e^{-C}) < kappa]; the trivial 1 when Hoeffding does not apply."""
    if 1.0 - math.exp(-C) - 1.0 / c <= 0:
        return 1.0
    return math.exp(-hoeffding_exponent(C, c) * d)


def case2_probability(d: int, C: float, c: float) -> float:
    """Exact q = P[Bin(d, 1 - e^{-C}) < kappa]."""
    return float(stats.binom.cdf(kappa(d, c) - 1, d, -math.expm1(-C)))


def U_doubleprime_dist(lam: float, d: int, C: float, c: float, use_exact_q: bool = False) -> ShiftedBinomialMixture:
    """Two-case lower bound for the number of activated leaves.

    Weight 1 - q on kappa + Bin(d - kappa, 1 - e^{-lam/c}) and weight q on
    1 + Bin(d - 1, 1 - e^{-lam/d}).  Replacing q by its bound p moves weight
    onto the smaller second case, so the bounded mixture is stochastically
    smaller still.
    """
    _check_nonnegative(lam=lam)
    if not c > 1:
        raise ValueError("c must exceed 1")
    if d < 2 or C <= 0:
        raise ValueError("need d >= 2 and C > 0")
    k = kappa(d, c)
    if k >= d:
        raise ValueError(f"kappa = ceil(d/c) = {k} >= d = {d}: degenerate split")
    q = case2_probability(d, C, c) if use_exact_q else case2_bound(d, C, c)
    return ShiftedBinomialMixture(
        (
            (1.0 - q, k, d - k, -math.expm1(-lam / c)),
            (q, 1, d - 1, -math.expm1(-lam / d)),
        )
    )
