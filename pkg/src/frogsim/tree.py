"""Implicit addressing on the infinite d-ary tree.

A vertex is the tuple of child labels read from the root, so the root is ``()``
and its distinguished child (the vertex every self-similar run enters first) is
``(0,)``. Nothing is ever materialized.
"""

from __future__ import annotations

from dataclasses import dataclass

VertexId = tuple[int, ...]

ROOT: VertexId = ()
ROOT_CHILD: VertexId = (0,)


@dataclass(frozen=True)
class Tree:
    """The d-ary tree: the root has d neighbours, every other vertex d + 1."""

    d: int

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 2:
            raise ValueError(f"branching factor must be an integer >= 2, got {self.d!r}")

    def child(self, v: VertexId, i: int) -> VertexId:
        if not 0 <= i < self.d:
            raise ValueError(f"child label {i} out of range for d={self.d}")
        return v + (i,)

    def children(self, v: VertexId) -> list[VertexId]:
        return [v + (i,) for i in range(self.d)]

    def degree(self, v: VertexId) -> int:
        return self.d if not v else self.d + 1

    def neighbors(self, v: VertexId) -> list[VertexId]:
        """Neighbours in a fixed order: parent first (if any), then children by label."""
        kids = self.children(v)
        return kids if not v else [v[:-1]] + kids

    def is_neighbor(self, v: VertexId, w: VertexId) -> bool:
        return (len(w) == len(v) + 1 and w[:-1] == v) or (len(v) == len(w) + 1 and v[:-1] == w)

    def validate(self, v: VertexId) -> VertexId:
        if any((not isinstance(x, int)) or x < 0 or x >= self.d for x in v):
            raise ValueError(f"invalid vertex {v!r} for d={self.d}")
        return tuple(v)


def parent(v: VertexId) -> VertexId:
    if not v:
        raise ValueError("the root has no parent")
    return v[:-1]


def depth(v: VertexId) -> int:
    return len(v)


def is_ancestor(u: VertexId, v: VertexId) -> bool:
    """True if ``u`` lies on the geodesic from the root to ``v`` (inclusive)."""
    return len(u) <= len(v) and v[: len(u)] == u


def to_json(v: VertexId) -> list[int]:
    return list(v)


def from_json(labels) -> VertexId:
    return tuple(int(x) for x in labels)
