"""Count-tree and sample records shared by the walk and branching engines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import ResourceLimitError
from .tree import VertexId

# Full count arrays are only materialized up to this depth (1 MiB at 16);
# deeper runs must stream.
MAX_MATERIALIZED_DEPTH = 16


def _check_depth(n: int):
    if n < 0:
        raise ValueError("depth must be nonnegative")
    if n > MAX_MATERIALIZED_DEPTH:
        raise ResourceLimitError(
            f"count trees are materialized only up to depth {MAX_MATERIALIZED_DEPTH}, got {n}"
        )


@dataclass
class CountTree:
    """Per-edge excursion counts over the first s root excursions.

    `counts` is heap-indexed (slot of the child vertex); slot 0 is unused
    and slot 1 always equals s, since every excursion crosses the root
    edge exactly once.
    """

    depth: int
    s: int
    counts: np.ndarray

    def __post_init__(self):
        _check_depth(self.depth)
        size = 1 << (self.depth + 1)
        if self.counts.shape != (size,):
            raise ValueError(f"counts must have shape ({size},)")
        if self.counts[1] != self.s:
            raise ValueError("root-edge count must equal the excursion count s")

    def count(self, v: VertexId) -> int:
        """Count on the edge from v's parent into v."""
        if v.level < 0:
            raise ValueError("the root has no incoming edge")
        return int(self.counts[v.heap_index()])

    def level_counts(self, j: int) -> np.ndarray:
        if not 0 <= j <= self.depth:
            raise ValueError(f"level {j} outside [0, {self.depth}]")
        return self.counts[(1 << j) : (2 << j)]

    def leaf_counts(self) -> np.ndarray:
        return self.level_counts(self.depth)

    def geodesic_counts(self, v: VertexId) -> np.ndarray:
        """Counts along the geodesic: entry j is the level-j edge count."""
        out = np.empty(v.level + 1, dtype=np.int64)
        for j in range(v.level + 1):
            out[j] = self.counts[(1 << j) + (v.index >> (v.level - j))]
        return out

    def total(self) -> int:
        return int(self.counts[1:].sum())

    def min_leaf_count(self) -> int:
        return int(self.leaf_counts().min())

    def nonzero_edges(self) -> Iterator[tuple[VertexId, int]]:
        for h in np.nonzero(self.counts)[0]:
            h = int(h)
            if h == 0:
                continue
            level = h.bit_length() - 1
            yield VertexId(level, h - (1 << level)), int(self.counts[h])

    def add(self, other: "CountTree") -> "CountTree":
        """Edge-wise sum; the law of s1+s2 excursions by additivity."""
        if other.depth != self.depth:
            raise ValueError("depth mismatch")
        return CountTree(self.depth, self.s + other.s, self.counts + other.counts)


@dataclass
class CoverSample:
    """One cover-time record.

    `t_star` counts root excursions until the last leaf is reached.  The
    step-level fields stay None for samples produced by the branching
    engine, which never walks individual steps.  The starting vertex is
    treated as visited at time zero.
    """

    n: int
    seed: int
    replica: int = 0
    t_star: int = 0
    cover_steps: Optional[int] = None
    steps_at_s: Optional[int] = None
    counts: Optional[CountTree] = field(default=None, repr=False)
