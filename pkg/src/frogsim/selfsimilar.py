"""The self-similar frog model and samples of its root-visit count V.

Frogs follow non-backtracking paths stopped at the root, and every edge from a
parent ``u`` into a child ``v`` lets exactly one frog through: the first to
cross it.  Frogs crossing at the same time are ranked by identity (start depth,
start labels, index) and the lowest continues; everyone else entering ``v`` from
``u``, then or later, stops at ``v``.  Since the rule refers to time, the model
is stepped synchronously.

With ``paths="loop-erased"`` each frog follows the stopped loop erasure of the
simple random walk the general engine would give it, so a run can be compared
pathwise with :func:`frogsim.engine.run_frog_model` on the same seed.
"""

from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .engine import BudgetExceeded, SimConfig, VisitRecord, run_trials, site_count
from .operators import FinitePmf
from .rng import derive_key
from .tree import ROOT, ROOT_CHILD, Tree, is_ancestor
from .walks import ReplayWalker, Walker, WalkKind, WalkStream, loop_erased_path

PATH_SOURCES = ("nonbacktracking", "loop-erased")


@dataclass
class SelfSimilarTrace:
    """What happened at every edge of one realization."""

    activator: dict = field(default_factory=dict)
    activation_time: dict = field(default_factory=dict)
    crossings: list = field(default_factory=list)
    emissions: Counter = field(default_factory=Counter)


def _identity_rank(frog):
    start, index = frog
    return (len(start), start, index)


def run_self_similar(
    config: SimConfig,
    trial_index: int,
    paths: str = "nonbacktracking",
    trace: SelfSimilarTrace | None = None,
    reseed: dict | None = None,
    deadline: float | None = None,
) -> VisitRecord:
    """One realization of the self-similar frog model; ``root_visits`` samples V.

    ``reseed`` maps subtree roots to salts; randomness indexed inside a salted
    subtree (site counts and paths of frogs starting there) is redrawn while
    everything else is kept.
    """
    if paths not in PATH_SOURCES:
        raise ValueError(f"paths must be one of {PATH_SOURCES}")
    tree = Tree(int(config.d))
    kind = WalkKind.SRW if paths == "loop-erased" else WalkKind.NONBACKTRACKING

    def salt(v):
        if reseed:
            for w, s in reseed.items():
                if is_ancestor(tuple(w), v):
                    return s
        return None

    def make_walker(frog):
        start, index = frog
        s = salt(start)
        key = derive_key(config.seed, "walk", trial_index, start, index, *(() if s is None else (s,)))
        stream = WalkStream(start, kind, key)
        if paths == "loop-erased":
            path = loop_erased_path(tree, stream, config.step_cap, config.depth_cap)
            return ReplayWalker(path.vertices, path.censored)
        first = ROOT_CHILD if not start else None
        return Walker(tree, stream, config.step_cap, config.depth_cap, first_step=first)

    initial = (ROOT, 1)
    visited = {ROOT}
    active = [(initial, make_walker(initial))]
    root_visits = 0
    censored = False
    max_depth = 0
    t = 0
    while active:
        t += 1
        if deadline is not None and time.monotonic() > deadline:
            raise BudgetExceeded(f"trial {trial_index} exceeded its deadline")
        survivors = []
        entering: dict = {}
        for frog, walker in active:
            here = walker.current
            nxt = walker.advance()
            if nxt is None:
                censored = censored or walker.censored
                continue
            if len(nxt) < len(here):
                if trace is not None:
                    trace.emissions[here] += 1
                if not nxt:
                    root_visits += 1
                else:
                    survivors.append((frog, walker))
            else:
                entering.setdefault(nxt, []).append((frog, walker))
        for v in sorted(entering, key=lambda w: (len(w), w)):
            group = entering[v]
            if v in visited:
                if trace is not None:
                    trace.crossings.extend((t, frog, v, False) for frog, _ in group)
                continue
            visited.add(v)
            if len(v) > max_depth:
                max_depth = len(v)
            group.sort(key=lambda fw: _identity_rank(fw[0]))
            survivors.append(group[0])
            if trace is not None:
                trace.activator[v] = group[0][0]
                trace.activation_time[v] = t
                trace.crossings.append((t, group[0][0], v, True))
                trace.crossings.extend((t, frog, v, False) for frog, _ in group[1:])
            for j in range(1, site_count(config, trial_index, v, salt(v)) + 1):
                woken = (v, j)
                survivors.append((woken, make_walker(woken)))
        active = survivors
    return VisitRecord(root_visits, len(visited), censored, max_depth)


@dataclass
class EmpiricalV:
    """Empirical law of V together with the per-trial censoring flags."""

    samples: np.ndarray
    censored: np.ndarray
    excluded_censored: bool = False

    @property
    def censored_fraction(self) -> float:
        return float(self.censored.mean()) if len(self.censored) else 0.0

    def kept(self) -> np.ndarray:
        return self.samples[~self.censored] if self.excluded_censored else self.samples

    @property
    def dist(self) -> FinitePmf:
        kept = self.kept()
        if len(kept) == 0:
            raise ValueError("no samples left after excluding censored trials")
        return FinitePmf.from_samples(kept)

    def to_json(self) -> str:
        d = self.dist
        return json.dumps(
            {
                "values": [int(v) for v in d.values],
                "probabilities": [float(p) for p in d.probs],
                "censored_fraction": self.censored_fraction,
            }
        )


def sample_V(
    config: SimConfig,
    exclude_censored: bool = False,
    threads: int | None = None,
    deadline: float | None = None,
    paths: str = "nonbacktracking",
) -> EmpiricalV:
    """Run ``config.trials`` self-similar trials and collect the root-visit counts.

    Censored counts are lower bounds for the infinite tree; with
    ``exclude_censored`` they are dropped from :attr:`EmpiricalV.dist`.
    """
    config = config.replace(walk=WalkKind.SELF_SIMILAR)
    records = run_trials(config, threads, deadline=deadline, paths=paths)
    return EmpiricalV(
        samples=np.array([r.root_visits for r in records], dtype=np.int64),
        censored=np.array([r.censored for r in records], dtype=bool),
        excluded_censored=exclude_censored,
    )


__all__ = ["BudgetExceeded", "EmpiricalV", "SelfSimilarTrace", "run_self_similar", "sample_V"]
