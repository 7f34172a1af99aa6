"""Addressing and genealogy on the rooted binary tree.

The tree of depth ``n`` has one leaf level ``n`` with ``2**n`` vertices,
a single vertex at level 0, and an extra root at level -1 attached to it.
Vertex indices are binary-coded paths: appending a child bit descends one
level, so ancestors are right-shifts and the last common ancestor is the
longest common prefix.  Everything here is pure and immutable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator


@dataclass(frozen=True, order=True)
class VertexId:
    """Address (level, index) of a vertex; level -1 with index 0 is the root."""

    level: int
    index: int

    def __post_init__(self):
        if self.level < -1:
            raise ValueError(f"level {self.level} below the root level -1")
        if self.level <= 0:
            if self.index != 0:
                raise ValueError(f"level {self.level} has only index 0")
        elif not 0 <= self.index < (1 << self.level):
            raise ValueError(f"index {self.index} out of range at level {self.level}")

    @property
    def is_root(self) -> bool:
        return self.level == -1

    def heap_index(self) -> int:
        """Flat array slot: root -> 0, vertex (j, i) -> 2**j + i for j >= 0."""
        if self.level == -1:
            return 0
        return (1 << self.level) + self.index


ROOT = VertexId(-1, 0)


@dataclass(frozen=True)
class TreeShape:
    """Depth-n tree: 2**n leaves and 2**(n+1) - 1 edges (root edge included)."""

    depth: int

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")

    @property
    def num_leaves(self) -> int:
        return 1 << self.depth

    @property
    def num_edges(self) -> int:
        return (1 << (self.depth + 1)) - 1

    def vertices(self) -> Iterator[VertexId]:
        yield ROOT
        for level in range(self.depth + 1):
            for index in range(1 << level):
                yield VertexId(level, index)

    def leaves(self) -> Iterator[VertexId]:
        for index in range(1 << self.depth):
            yield VertexId(self.depth, index)


def ancestor(v: VertexId, j: int) -> VertexId:
    """Level-j vertex on the geodesic from v to the root (j <= v.level)."""
    if not -1 <= j <= v.level:
        raise ValueError(f"ancestor level {j} outside [-1, {v.level}]")
    if j == -1:
        return ROOT
    return VertexId(j, v.index >> (v.level - j))


def lca(u: VertexId, v: VertexId) -> VertexId:
    """Deepest common ancestor of two non-root vertices."""
    if u.level < 0 or v.level < 0:
        raise ValueError("lca is defined for vertices at levels >= 0")
    # Align to the shallower level, then strip bits until the prefixes agree.
    j = min(u.level, v.level)
    a = u.index >> (u.level - j)
    b = v.index >> (v.level - j)
    while a != b:
        a >>= 1
        b >>= 1
        j -= 1
    return VertexId(j, a)


def subtree_leaves(u: VertexId, n: int) -> Iterator[VertexId]:
    """Leaves of the depth-n tree whose level-|u| ancestor is u."""
    if not 0 <= u.level <= n:
        raise ValueError(f"subtree root level {u.level} outside [0, {n}]")
    width = 1 << (n - u.level)
    start = u.index * width
    for index in range(start, start + width):
        yield VertexId(n, index)
