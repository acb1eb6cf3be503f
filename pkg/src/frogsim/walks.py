"""Frog paths on the d-ary tree.

Three path regimes are supported: simple random walk, non-backtracking walk
stopped on arrival at the root, and (inside :mod:`frogsim.selfsimilar`) the
self-similar stopping rule layered on top of a non-backtracking path.  Paths are
drawn from a :class:`~frogsim.rng.KeyedStream`, so a frog's whole trajectory is
a pure function of its identity however lazily it is realized.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .rng import KeyedStream, derive_key
from .tree import ROOT, Tree, VertexId

DEFAULT_STEP_CAP = 10_000


class WalkKind(str, enum.Enum):
    SRW = "srw"
    NONBACKTRACKING = "nonbacktracking"
    SELF_SIMILAR = "self-similar"

    @classmethod
    def parse(cls, value) -> "WalkKind":
        if isinstance(value, WalkKind):
            return value
        aliases = {
            "simple": cls.SRW,
            "simplerandomwalk": cls.SRW,
            "nb": cls.NONBACKTRACKING,
            "nonbacktrackingstoppedatroot": cls.NONBACKTRACKING,
            "selfsimilar": cls.SELF_SIMILAR,
            "selfsimilarstopped": cls.SELF_SIMILAR,
        }
        key = str(value).strip().lower()
        try:
            return cls(key)
        except ValueError:
            pass
        compact = key.replace("-", "").replace("_", "")
        if compact in aliases:
            return aliases[compact]
        raise ValueError(f"unknown walk kind {value!r}")


def _below(rng, k: int) -> int:
    if hasattr(rng, "below"):
        return rng.below(k)
    return int(rng.integers(k))


def step_srw(tree: Tree, current: VertexId, rng) -> VertexId:
    """One simple-random-walk step: uniform over the neighbours of ``current``."""
    if not current:
        return (_below(rng, tree.d),)
    k = _below(rng, tree.d + 1)
    return current[:-1] if k == 0 else current + (k - 1,)


def step_nonbacktracking(tree: Tree, current: VertexId, previous: VertexId | None, rng) -> VertexId:
    """Uniform step over the neighbours of ``current`` other than ``previous``.

    With ``previous=None`` (the first step of a walk) every neighbour is allowed.
    Neighbours are ordered parent first, then children by label.
    """
    if previous is None:
        return step_srw(tree, current, rng)
    if len(previous) == len(current) - 1 and current[:-1] == previous:
        # arrived from the parent: only children remain
        return current + (_below(rng, tree.d),)
    if len(previous) == len(current) + 1 and previous[:-1] == current:
        came_from = previous[-1]
        if not current:
            j = _below(rng, tree.d - 1)
            return (j if j < came_from else j + 1,)
        k = _below(rng, tree.d)
        if k == 0:
            return current[:-1]
        j = k - 1
        return current + (j if j < came_from else j + 1,)
    raise ValueError(f"{previous!r} is not a neighbour of {current!r}")


@dataclass(frozen=True)
class WalkStream:
    """A frog's path source: start vertex, regime, and 128-bit key."""

    start: VertexId
    kind: WalkKind
    rng_key: bytes

    @classmethod
    def for_frog(cls, seed: int, trial: int, start: VertexId, index: int, kind: WalkKind) -> "WalkStream":
        return cls(start, kind, derive_key(seed, "walk", trial, start, index))

    def rng(self) -> KeyedStream:
        return KeyedStream(self.rng_key)


@dataclass
class Path:
    vertices: list
    censored: bool = False


class Walker:
    """Lazily realizes the path of a :class:`WalkStream`.

    ``advance()`` returns the next vertex or ``None`` once the path is over.  A
    frog that would step below ``depth_cap`` is frozen where it stands, and a
    walk that exhausts ``step_cap`` steps is truncated; both set ``censored``.
    Non-backtracking walks end on arrival at the root (time 0 does not count).
    ``first_step`` overrides the first move; the self-similar model uses it to
    send the initial frog into the distinguished child of the root.
    """

    __slots__ = ("tree", "kind", "rng", "current", "previous", "steps", "step_cap", "depth_cap",
                 "first_step", "done", "censored")

    def __init__(self, tree: Tree, stream: WalkStream, step_cap: int = DEFAULT_STEP_CAP,
                 depth_cap: int | None = None, first_step: VertexId | None = None):
        kind = WalkKind.parse(stream.kind)
        self.kind = WalkKind.NONBACKTRACKING if kind is WalkKind.SELF_SIMILAR else kind
        self.tree = tree
        self.rng = stream.rng()
        self.current = stream.start
        self.previous = None
        self.steps = 0
        self.step_cap = step_cap
        self.depth_cap = depth_cap
        if first_step is not None and not tree.is_neighbor(stream.start, first_step):
            raise ValueError("forced first step must go to a neighbour")
        self.first_step = first_step
        self.done = False
        self.censored = False

    def advance(self) -> VertexId | None:
        if self.done:
            return None
        if self.steps >= self.step_cap:
            self.done = self.censored = True
            return None
        cur = self.current
        if self.steps == 0 and self.first_step is not None:
            nxt = self.first_step
        elif self.kind is WalkKind.SRW:
            nxt = step_srw(self.tree, cur, self.rng)
        else:
            nxt = step_nonbacktracking(self.tree, cur, self.previous, self.rng)
        if self.depth_cap is not None and len(nxt) > self.depth_cap:
            self.done = self.censored = True
            return None
        self.steps += 1
        self.previous, self.current = cur, nxt
        if not nxt and self.kind is WalkKind.NONBACKTRACKING:
            self.done = True
        return nxt


class ReplayWalker:
    """Walker interface over a precomputed vertex sequence."""

    __slots__ = ("vertices", "pos", "censored", "done", "_censored_at_end")

    def __init__(self, vertices, censored: bool):
        self.vertices = vertices
        self.pos = 0
        self.censored = False
        self.done = False
        self._censored_at_end = censored

    @property
    def current(self) -> VertexId:
        return self.vertices[self.pos]

    def advance(self) -> VertexId | None:
        if self.pos + 1 >= len(self.vertices):
            if not self.done:
                self.done = True
                self.censored = self._censored_at_end
            return None
        self.pos += 1
        return self.vertices[self.pos]


def generate_path(
    tree: Tree,
    stream: WalkStream,
    step_cap: int = DEFAULT_STEP_CAP,
    depth_cap: int | None = None,
    first_step: VertexId | None = None,
) -> Path:
    """Realize the whole path of ``stream`` up to the caps (see :class:`Walker`)."""
    walker = Walker(tree, stream, step_cap, depth_cap, first_step)
    out = [stream.start]
    while (v := walker.advance()) is not None:
        out.append(v)
    return Path(out, censored=walker.censored)


def stopped_loop_erasure(path) -> list:
    """Chronological loop erasure of a path stopped at its first return to the root.

    Cycles are erased as they close.  The result is self-avoiding, uses only
    vertices of the input, and ends at the root whenever the input reaches it
    after time 0.
    """
    path = [tuple(v) for v in path]
    if not path:
        raise ValueError("cannot loop-erase an empty path")
    for t in range(1, len(path)):
        if path[t] == ROOT:
            path = path[: t + 1]
            break
    erased: list = []
    position: dict = {}
    for v in path:
        if v in position:
            cut = position[v]
            for w in erased[cut + 1 :]:
                del position[w]
            del erased[cut + 1 :]
        else:
            position[v] = len(erased)
            erased.append(v)
    return erased


def loop_erased_path(
    tree: Tree, stream: WalkStream, step_cap: int = DEFAULT_STEP_CAP, depth_cap: int | None = None
) -> Path:
    """Stopped loop erasure of the simple random walk carried by ``stream``.

    Censored iff the underlying walk was censored before reaching the root.
    """
    srw = generate_path(tree, WalkStream(stream.start, WalkKind.SRW, stream.rng_key), step_cap, depth_cap)
    hit_root = any(not v for v in srw.vertices[1:])
    return Path(stopped_loop_erasure(srw.vertices), censored=srw.censored and not hit_root)


def is_nonbacktracking(path) -> bool:
    return all(path[t + 1] != path[t - 1] for t in range(1, len(path) - 1))
