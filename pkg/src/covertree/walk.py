"""Exact step-level simulation of the walk started at the root.

Each replica is a pure function of (master seed, replica index): the walk
consumes an xorshift stream keyed by them, so results are identical for
any batching or worker layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .counts import CountTree, CoverSample
from .errors import CapExceededError, ResourceLimitError
from .rng import stream_key, stream_keys
from .scaling import m

# Step-level runs beyond this depth are impractical; use the branching
# engine for t* at larger n.
MAX_WALK_DEPTH = 14


@dataclass
class WalkConfig:
    """Walk parameters: tree depth, master seed, replica, and the cap margin
    entering the default step cap 2**(n+1) * (m_n + margin)**2."""

    n: int
    seed: int
    replica: int = 0
    cap_margin: float = 50.0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("depth must be nonnegative")
        if self.n > MAX_WALK_DEPTH:
            raise ResourceLimitError(
                f"step-level walks are limited to depth {MAX_WALK_DEPTH}, got {self.n}"
            )

    def step_cap(self) -> int:
        # Cover times concentrate at 2**(n+1) m_n**2, so this cap is
        # astronomically safe while still catching runaway loops.
        mn = m(max(self.n, 1))
        return int((1 << (self.n + 1)) * (mn + self.cap_margin) ** 2)


def _key(cfg: WalkConfig, tag: str) -> np.ndarray:
    return stream_key(cfg.seed, tag, cfg.n, cfg.replica)


def run_excursions(cfg: WalkConfig, s: int) -> CountTree:
    """Exact per-edge counts over the first s root excursions."""
    if s < 1:
        raise ValueError("need at least one excursion")
    key = _key(cfg, "walk_excursions")
    counts, steps = kernels.walk_excursions(cfg.n, s, key[0], key[1])
    assert steps == 2 * counts.sum(), "step accounting must be exact"
    return CountTree(cfg.n, s, counts)


def run_to_cover(cfg: WalkConfig, keep_counts: bool = False) -> CoverSample:
    """Walk until every vertex has been visited.

    Returns the covering step, the index of the excursion in progress at
    that step, and the step total once that excursion completes.
    """
    key = _key(cfg, "walk_cover")
    cover_steps, t_star, steps_end, counts, status = kernels.walk_cover(
        cfg.n, key[0], key[1], cfg.step_cap()
    )
    if status != 0:
        raise CapExceededError(
            f"walk exceeded the step cap {cfg.step_cap()} before covering (n={cfg.n})"
        )
    tree = CountTree(cfg.n, int(counts[1]), counts) if keep_counts else None
    return CoverSample(
        n=cfg.n,
        seed=cfg.seed,
        replica=cfg.replica,
        t_star=int(t_star),
        cover_steps=int(cover_steps),
        steps_at_s=int(steps_end),
        counts=tree,
    )


def run_to_cover_batch(n: int, seed: int, replicas: np.ndarray, cap_margin: float = 50.0) -> np.ndarray:
    """Vectorized cover runs; rows (cover_steps, t_star, steps_at_s, status).

    Capped replicas are reported in the status column, never truncated
    silently.
    """
    cfg = WalkConfig(n, seed, cap_margin=cap_margin)
    keys = stream_keys(seed, "walk_cover", n, np.asarray(replicas))
    return kernels.walk_cover_batch(n, keys, cfg.step_cap())


def normalized_cover(sample: CoverSample) -> tuple[float, float]:
    """Centered statistics (sqrt(C_n / 2**(n+1)) - m_n, sqrt(2 t*) - m_n)."""
    if sample.cover_steps is None:
        raise ValueError("sample carries no step-level cover time")
    mn = m(sample.n)
    c_norm = math.sqrt(sample.cover_steps / (1 << (sample.n + 1))) - mn
    t_norm = math.sqrt(2.0 * sample.t_star) - mn
    return c_norm, t_norm
