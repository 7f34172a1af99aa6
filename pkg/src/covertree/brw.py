"""Gaussian branching random walk on the binary tree and its derivative
martingale.

Independent standard normal weights sit on the edges below level 0; the
field value g_u is the weight sum along the geodesic from the level-0
vertex (whose value is fixed to 0, so Var(g_u) = |u| and the covariance
of two values is the level of their last common ancestor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError
from .scaling import CSTAR

MAX_BRW_DEPTH = 22


def _check_depth(k: int):
    if k < 0:
        raise ValueError("depth must be nonnegative")
    if k > MAX_BRW_DEPTH:
        raise ResourceLimitError(f"level arrays beyond depth {MAX_BRW_DEPTH} do not fit the budget")


def _derivative_terms(k: int, g_leaf: np.ndarray) -> tuple[float, float]:
    """Return (sum of (c*k+g) e^{-c*(c*k+g)}, sum of e^{-c*(c*k+g)})."""
    a = CSTAR * k + g_leaf
    w = np.exp(-CSTAR * a)
    return float((a * w).sum()), float(w.sum())


@dataclass
class BrwSample:
    """One realization up to depth k with its derivative-martingale values.

    x and xtilde are the weighted sums over level k; xprime is the same
    functional of the empirically centered field, and the three satisfy
    xprime = (x - gbar_k * xtilde) * exp(c* gbar_k) exactly.
    """

    depth: int
    g_levels: list[np.ndarray]  # g_levels[j] has 2**j entries
    gbar: np.ndarray  # level averages, length depth + 1
    x: float
    xprime: float
    xtilde: float

    def g(self, level: int) -> np.ndarray:
        return self.g_levels[level]


def sample_brw(k: int, rng: np.random.Generator) -> BrwSample:
    """Sample the field level by level and evaluate the martingale terms."""
    _check_depth(k)
    g = np.zeros(1)
    levels = [g]
    gbar = np.zeros(k + 1)
    for j in range(1, k + 1):
        g = np.repeat(g, 2) + rng.standard_normal(1 << j)
        levels.append(g)
        # Pairwise summation inside numpy keeps the average stable at 2**22 terms.
        gbar[j] = g.mean()
    x, xtilde = _derivative_terms(k, g)
    xc, _ = _derivative_terms(k, g - gbar[k])
    return BrwSample(depth=k, g_levels=levels, gbar=gbar, x=x, xprime=xc, xtilde=xtilde)


def identity_residual(sample: BrwSample) -> float:
    """Relative residual of xprime = (x - gbar xtilde) e^{c* gbar}."""
    k = sample.depth
    lhs = sample.xprime
    rhs = (sample.x - sample.gbar[k] * sample.xtilde) * math.exp(CSTAR * sample.gbar[k])
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return abs(lhs - rhs) / scale


def _xprime_block(k: int, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized sampler: returns (x, xprime, xtilde, gbar_k) arrays."""
    g = np.zeros((count, 1))
    for j in range(1, k + 1):
        g = np.repeat(g, 2, axis=1) + rng.standard_normal((count, 1 << j))
    gbar = g.mean(axis=1)
    a = CSTAR * k + g
    w = np.exp(-CSTAR * a)
    x = (a * w).sum(axis=1)
    xtilde = w.sum(axis=1)
    ac = a - gbar[:, None]
    xprime = (ac * np.exp(-CSTAR * ac)).sum(axis=1)
    return x, xprime, xtilde, gbar


def sample_xprime_stream(
    k: int,
    count: int,
    rng: np.random.Generator,
    batch: int = 64,
) -> tuple[np.ndarray, np.ndarray]:
    """i.i.d. (xprime, gbar) pairs at depth k, for the mixture CDF and the
    independence diagnostics."""
    _check_depth(k)
    xs = np.empty(count)
    gs = np.empty(count)
    done = 0
    while done < count:
        b = min(batch, count - done)
        _, xp, _, gb = _xprime_block(k, b, rng)
        xs[done : done + b] = xp
        gs[done : done + b] = gb
        done += b
    return xs, gs


@dataclass
class MartingaleReport:
    mean_deviation: float
    se: float
    zscore: float
    outer: int
    inner: int


def martingale_check(k: int, outer: int, inner: int, rng: np.random.Generator) -> MartingaleReport:
    """One-level martingale test: average the depth-(k+1) continuation of
    each depth-k sample over `inner` fresh extensions and compare with the
    depth-k value; the deviation has mean zero exactly."""
    _check_depth(k + 1)
    size = 1 << k
    devs = np.empty(outer)
    for i in range(outer):
        g = np.zeros(1)
        for j in range(1, k + 1):
            g = np.repeat(g, 2) + rng.standard_normal(1 << j)
        xk, _ = _derivative_terms(k, g)
        child = np.repeat(g[None, :], inner, axis=0)
        child = np.repeat(child, 2, axis=1) + rng.standard_normal((inner, 2 * size))
        a = CSTAR * (k + 1) + child
        w = np.exp(-CSTAR * a)
        x_next = (a * w).sum(axis=1)
        devs[i] = x_next.mean() - xk
    mean = float(devs.mean())
    se = float(devs.std(ddof=1) / math.sqrt(outer))
    return MartingaleReport(mean, se, mean / se if se > 0 else 0.0, outer, inner)
