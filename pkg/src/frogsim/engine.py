"""The frog model on the d-ary tree with i.i.d. Poisson sleeping frogs.

Site occupancies are sampled lazily the first time a vertex is visited, from a
stream keyed by the vertex, and each frog's path is keyed by its start vertex
and index.  A realization is therefore a pure function of ``(seed, trial)``,
which is what makes the order in which active frogs are processed provably
irrelevant here rather than merely irrelevant in distribution.
"""

from __future__ import annotations

import csv
import heapq
import io
import os
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .rng import KeyedStream, poisson_quantile
from .tree import ROOT, Tree, VertexId
from .walks import DEFAULT_STEP_CAP, ReplayWalker, Walker, WalkKind, WalkStream, loop_erased_path

ORDERS = ("fifo", "lifo", "depth")
TRIALS_CSV_HEADER = "# frogsim trials v1"


class BudgetExceeded(RuntimeError):
    """Raised when a run passes its wall-clock deadline."""


@dataclass(frozen=True)
class SimConfig:
    d: int = 2
    mu: float = 1.0
    walk: WalkKind = WalkKind.SELF_SIMILAR
    depth_cap: int = 16
    step_cap: int = DEFAULT_STEP_CAP
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "walk", WalkKind.parse(self.walk))
        problems = []
        if not isinstance(self.d, (int, np.integer)) or self.d < 2:
            problems.append(f"d: must be an integer >= 2 (got {self.d!r})")
        if not (isinstance(self.mu, (int, float)) and self.mu >= 0 and np.isfinite(self.mu)):
            problems.append(f"mu: must be a finite nonnegative number (got {self.mu!r})")
        for name in ("depth_cap", "step_cap", "trials"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                problems.append(f"{name}: must be an integer >= 1 (got {value!r})")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            problems.append(f"seed: must be an integer in [0, 2**64) (got {self.seed!r})")
        if problems:
            raise ValueError("invalid SimConfig: " + "; ".join(problems))

    def replace(self, **changes) -> "SimConfig":
        data = self.to_dict()
        data.update(changes)
        return SimConfig(**data)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["walk"] = self.walk.value
        data["mu"] = float(self.mu)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"invalid SimConfig: unknown field(s) {sorted(unknown)}")
        return cls(**data)


@dataclass
class VisitRecord:
    root_visits: int
    activated_vertices: int
    censored: bool
    max_depth_reached: int


def site_count(config: SimConfig, trial: int, v: VertexId, key_salt=None) -> int:
    """Number of sleeping frogs placed at ``v`` (zero at the root)."""
    if not v:
        return 0
    stream = KeyedStream.for_identity(config.seed, "eta", trial, v, *(() if key_salt is None else (key_salt,)))
    return poisson_quantile(config.mu, stream.uniform())


def run_frog_model(
    config: SimConfig,
    trial_index: int,
    order: str = "fifo",
    loop_erase: bool = False,
    deadline: float | None = None,
    frog_log: list | None = None,
) -> VisitRecord:
    """Simulate one realization of the frog model with SRW or stopped NB paths.

    ``loop_erase=True`` replaces every SRW path by its stopped loop erasure while
    keeping the site counts, which trims ranges without touching anything else.
    Identities ``(start, index)`` of processed frogs are appended to ``frog_log``.
    """
    kind = config.walk
    if kind not in (WalkKind.SRW, WalkKind.NONBACKTRACKING):
        raise ValueError(f"run_frog_model does not simulate walk kind {kind.value!r}")
    if loop_erase and kind is not WalkKind.SRW:
        raise ValueError("loop erasure applies to simple random walk paths only")
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}")
    tree = Tree(int(config.d))

    visited = {ROOT}
    root_visits = 0
    censored = False
    max_depth = 0

    pending: deque | list = deque() if order != "depth" else []
    if order == "depth":
        push = lambda frog: heapq.heappush(pending, (len(frog[0]), frog))  # noqa: E731
        pop = lambda: heapq.heappop(pending)[1]  # noqa: E731
    elif order == "lifo":
        push, pop = pending.append, pending.pop
    else:
        push, pop = pending.append, pending.popleft

    push((ROOT, 1))
    processed = 0
    while pending:
        start, index = pop()
        processed += 1
        if frog_log is not None:
            frog_log.append((start, index))
        if deadline is not None and processed % 256 == 0 and time.monotonic() > deadline:
            raise BudgetExceeded(f"trial {trial_index} exceeded its deadline")
        stream = WalkStream.for_frog(config.seed, trial_index, start, index, kind)
        if loop_erase:
            path = loop_erased_path(tree, stream, config.step_cap, config.depth_cap)
            walker = ReplayWalker(path.vertices, path.censored)
        else:
            walker = Walker(tree, stream, config.step_cap, config.depth_cap)
        while (v := walker.advance()) is not None:
            if not v:
                root_visits += 1
            elif v not in visited:
                visited.add(v)
                if len(v) > max_depth:
                    max_depth = len(v)
                for j in range(1, site_count(config, trial_index, v) + 1):
                    push((v, j))
        censored = censored or walker.censored

    return VisitRecord(root_visits, len(visited), censored, max_depth)


def run_trial(config: SimConfig, trial_index: int, **kwargs) -> VisitRecord:
    """Dispatch on ``config.walk`` to the general or the self-similar engine."""
    if config.walk is WalkKind.SELF_SIMILAR:
        from .selfsimilar import run_self_similar

        return run_self_similar(config, trial_index, **kwargs)
    return run_frog_model(config, trial_index, **kwargs)


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("FROGSIM_THREADS", "1"))
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return threads


def run_trials(config: SimConfig, threads: int | None = None, **kwargs) -> list[VisitRecord]:
    """All trials ``0 .. config.trials - 1``, returned in trial order."""
    threads = resolve_threads(threads)
    indices = range(config.trials)
    if threads == 1:
        return [run_trial(config, t, **kwargs) for t in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: run_trial(config, t, **kwargs), indices))


@dataclass
class RunSummary:
    trials: int
    mean: float
    variance: float
    quantiles: dict = field(default_factory=dict)
    censoring_rate: float = 0.0
    max_root_visits: int = 0
    mean_activated: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


def summarize(records: list[VisitRecord]) -> RunSummary:
    visits = np.array([r.root_visits for r in records], dtype=float)
    return RunSummary(
        trials=len(records),
        mean=float(visits.mean()),
        variance=float(visits.var(ddof=1)) if len(records) > 1 else 0.0,
        quantiles={str(q): float(np.quantile(visits, q)) for q in QUANTILE_LEVELS},
        censoring_rate=float(np.mean([r.censored for r in records])),
        max_root_visits=int(visits.max()),
        mean_activated=float(np.mean([r.activated_vertices for r in records])),
    )


def run_many(config: SimConfig, threads: int | None = None, **kwargs) -> RunSummary:
    return summarize(run_trials(config, threads, **kwargs))


def trials_csv(records: list[VisitRecord]) -> str:
    buf = io.StringIO(newline="")
    buf.write(TRIALS_CSV_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "root_visits", "activated_vertices", "censored", "max_depth"])
    for t, r in enumerate(records):
        writer.writerow([t, r.root_visits, r.activated_vertices, int(r.censored), r.max_depth_reached])
    return buf.getvalue()
