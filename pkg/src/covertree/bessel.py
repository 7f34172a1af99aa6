"""Continuous-process machinery: Brownian-bridge barrier closed forms,
exact squared-Bessel(0) skeletons, the Gamma-Poisson chain whose marginals
match the count chain, the change-of-measure identity between the two
process laws, and the tail-scale integral built from non-cover
probabilities of small trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats as sstats

from . import kernels
from .errors import AccuracyError
from .rng import stream_keys
from .scaling import CSTAR, endpoint_window

# ---------------------------------------------------------------------------
# Brownian bridge above a linear barrier.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BarrierLine:
    """Linear barrier through (t1, m1) and (t2, m2)."""

    t1: float
    t2: float
    m1: float
    m2: float

    def __post_init__(self):
        if not self.t2 > self.t1:
            raise ValueError("need t2 > t1")

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        lam = (t - self.t1) / (self.t2 - self.t1)
        return self.m1 + lam * (self.m2 - self.m1)


def bridge_barrier_prob(x: float, w: float, line: BarrierLine) -> float:
    """Exact probability that the Brownian bridge from (t1, x) to (t2, w)
    stays above the line: 1 - exp(-2 (x-m1)+ (w-m2)+ / (t2-t1))."""
    d1 = max(x - line.m1, 0.0)
    d2 = max(w - line.m2, 0.0)
    return -math.expm1(-2.0 * d1 * d2 / (line.t2 - line.t1))


def crossing_survival_factor(d1, d2, length):
    """Per-segment reflection factor 1 - exp(-2 d1 d2 / length) for the
    bridge with clearances d1, d2 at the segment ends; 0 if either
    clearance is nonpositive.  Lets unit-step skeletons represent
    continuous barrier events without discretization bias."""
    d1 = np.asarray(d1, dtype=np.float64)
    d2 = np.asarray(d2, dtype=np.float64)
    out = -np.expm1(-2.0 * d1 * d2 / length)
    return np.where((d1 > 0) & (d2 > 0), out, 0.0)


def simulate_bridge_barrier(
    x: float,
    w: float,
    line: BarrierLine,
    dt: float,
    paths: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo oracle for the closed form: discretized bridge paths
    with per-segment crossing factors (so no grid bias).  Returns
    (estimate, standard error)."""
    steps = int(round((line.t2 - line.t1) / dt))
    if steps < 2:
        raise ValueError("window too short for the grid")
    v = np.full(paths, float(x))
    weight = np.ones(paths)
    t = line.t1
    d_prev = np.full(paths, x - line.m1)
    for i in range(1, steps + 1):
        remain = line.t2 - t
        if i < steps:
            mean = v + (w - v) * (dt / remain)
            var = dt * (remain - dt) / remain
            v = mean + math.sqrt(max(var, 0.0)) * rng.standard_normal(paths)
        else:
            v = np.full(paths, float(w))
        t = line.t1 + i * dt
        d = v - line.value(t)
        weight *= crossing_survival_factor(d_prev, d, dt)
        d_prev = d
    est = float(weight.mean())
    se = float(weight.std(ddof=1) / math.sqrt(paths))
    return est, se


# ---------------------------------------------------------------------------
# Squared Bessel of dimension zero, exactly.
# ---------------------------------------------------------------------------


def besq0_step(z: np.ndarray, s: float, rng: np.random.Generator) -> np.ndarray:
    """One exact transition of squared Bessel(0) over time s: a
    Gamma(N, 2s) draw with N ~ Poisson(z / (2s)), absorbed at zero."""
    z = np.asarray(z, dtype=np.float64)
    n = rng.poisson(z / (2.0 * s))
    out = np.zeros_like(z)
    alive = n > 0
    if np.any(alive):
        out[alive] = rng.gamma(shape=n[alive], scale=2.0 * s)
    return out


def sample_bessel0(y0: float, horizon: int, rng: np.random.Generator, step: float = 1.0) -> np.ndarray:
    """Exact skeleton of the 0-dimensional Bessel process started at y0,
    sampled every `step` time units, `horizon` steps (absorbed at 0)."""
    if y0 < 0:
        raise ValueError("the process lives on [0, inf)")
    z = np.array([y0 * y0])
    path = np.empty(horizon + 1)
    path[0] = y0
    for i in range(1, horizon + 1):
        z = besq0_step(z, step, rng)
        path[i] = math.sqrt(z[0])
    return path


# ---------------------------------------------------------------------------
# The Gamma-Poisson chain behind the counts.
# ---------------------------------------------------------------------------


@dataclass
class ChainState:
    """Alternating chain (eta(0), Y_1, eta(1), Y_2, ...): the squared
    halves follow Gamma(shape = count) then Poisson transitions, so the
    embedded count chain has NegativeBinomial(count, 1/2) marginals."""

    etas: list[float]
    ys: list[float]

    @classmethod
    def start(cls, s: float) -> "ChainState":
        return cls(etas=[math.sqrt(2.0 * s)], ys=[])

    @property
    def eta(self) -> float:
        return self.etas[-1]


def chain_step(state: ChainState, rng: np.random.Generator) -> ChainState:
    """Append one (Y, eta) pair; absorbed once the count hits zero."""
    t = state.eta**2 / 2.0
    lam = float(rng.gamma(shape=t, scale=1.0)) if t > 0 else 0.0
    count = int(rng.poisson(lam)) if lam > 0 else 0
    return ChainState(
        etas=state.etas + [math.sqrt(2.0 * count)],
        ys=state.ys + [math.sqrt(2.0 * lam)],
    )


def chain_child_counts(t: float, reps: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized one-step counts from parent count t via Gamma-Poisson."""
    if t <= 0:
        return np.zeros(reps, dtype=np.int64)
    lam = rng.gamma(shape=t, scale=1.0, size=reps)
    return rng.poisson(lam).astype(np.int64)


def sample_U(s: float, rng: np.random.Generator, size: Optional[int] = None):
    """Centered start fluctuation sqrt(2 Gamma(s, 1)) - sqrt(2 s); tends
    to a centered Gaussian of variance 1/2 as s grows."""
    if s <= 0:
        raise ValueError("shape must be positive")
    g = rng.gamma(shape=s, scale=1.0, size=size)
    return np.sqrt(2.0 * g) - math.sqrt(2.0 * s)


def gtilde(g: Callable[[np.ndarray], np.ndarray], w, tail_eps: float = 1e-12):
    """Poisson regularization E[g(sqrt(2 xi(w^2/2)))] evaluated by a
    truncated exact sum."""
    w_arr = np.atleast_1d(np.asarray(w, dtype=np.float64))
    out = np.empty_like(w_arr)
    for i, wi in enumerate(w_arr):
        lam = wi * wi / 2.0
        if lam == 0:
            out[i] = float(g(np.array([0.0]))[0])
            continue
        width = 10.0 * math.sqrt(lam) + 25.0
        ks = np.arange(max(0, int(lam - width)), int(lam + width) + 1)
        pmf = sstats.poisson.pmf(ks, lam)
        vals = np.asarray(g(np.sqrt(2.0 * ks.astype(np.float64))))
        out[i] = float((pmf * vals).sum() / max(pmf.sum(), 1.0 - tail_eps))
    return out if np.ndim(w) else float(out[0])


# ---------------------------------------------------------------------------
# Change of measure between the Bessel and Brownian path laws.
# ---------------------------------------------------------------------------


@dataclass
class GirsanovReport:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    zscore: float
    x: float
    horizon: int
    barrier: Optional[BarrierLine]


def _skeleton_weight(values: np.ndarray, barrier: Optional[BarrierLine]) -> np.ndarray:
    """Path functional shared by both sides: indicator-free product of
    per-unit-step crossing factors against the barrier (1 with none)."""
    paths, horizon = values.shape
    w = np.ones(paths)
    if barrier is None:
        return w
    ts = np.arange(1, horizon + 1, dtype=np.float64)
    clear = values - barrier.value(ts)[None, :]
    for j in range(horizon - 1):
        w *= crossing_survival_factor(clear[:, j], clear[:, j + 1], 1.0)
    return w


def girsanov_check(
    x: float,
    horizon: int,
    barrier: Optional[BarrierLine],
    replicas: int,
    rng: np.random.Generator,
    dt: float = 1e-3,
    w_floor: float = 1e-6,
) -> GirsanovReport:
    """Compare both sides of the change-of-measure identity.

    Left: exact Bessel skeleton at integer times (absorption included in
    the transitions), weighted by the shared barrier functional.  Right:
    Brownian paths on a dt-grid carrying sqrt(x / W_end), the exponential
    of -(3/8) * integral of W^-2, sub-grid positivity factors, and the
    same barrier functional on integer-time values.  Both sides estimate
    the same expectation; only the time integral is discretized.
    """
    if x <= 0:
        raise ValueError("the start point must be positive")
    if horizon < 2:
        raise ValueError("need at least one unit step")

    # Bessel side: times 1..horizon, unit steps.
    z = np.full(replicas, x * x)
    ys = np.empty((replicas, horizon))
    ys[:, 0] = x
    for j in range(1, horizon):
        z = besq0_step(z, 1.0, rng)
        ys[:, j] = np.sqrt(z)
    lhs_w = _skeleton_weight(ys, barrier) * (ys[:, -1] > 0)
    lhs = float(lhs_w.mean())
    lhs_se = float(lhs_w.std(ddof=1) / math.sqrt(replicas))

    # Brownian side on the fine grid.
    per_unit = int(round(1.0 / dt))
    nsteps = (horizon - 1) * per_unit
    w = np.full(replicas, float(x))
    alive = np.ones(replicas, dtype=bool)
    log_cross = np.zeros(replicas)
    integral = np.zeros(replicas)
    integer_vals = np.empty((replicas, horizon))
    integer_vals[:, 0] = x
    inv2_prev = 1.0 / np.maximum(w, w_floor) ** 2
    sqdt = math.sqrt(dt)
    for i in range(1, nsteps + 1):
        w_new = w + sqdt * rng.standard_normal(replicas)
        pos = (w > 0) & (w_new > 0)
        alive &= pos
        with np.errstate(over="ignore", divide="ignore"):
            log_cross += np.where(
                alive, np.log1p(-np.exp(-2.0 * np.maximum(w, 0) * np.maximum(w_new, 0) / dt)), 0.0
            )
        inv2 = 1.0 / np.maximum(w_new, w_floor) ** 2
        integral += 0.5 * dt * (inv2_prev + inv2)
        inv2_prev = inv2
        w = w_new
        if i % per_unit == 0:
            integer_vals[:, i // per_unit] = w
    rhs_w = np.where(
        alive,
        _skeleton_weight(integer_vals, barrier)
        * np.sqrt(x / np.maximum(integer_vals[:, -1], w_floor))
        * np.exp(-0.375 * integral + log_cross),
        0.0,
    )
    rhs = float(rhs_w.mean())
    rhs_se = float(rhs_w.std(ddof=1) / math.sqrt(replicas))

    denom = math.hypot(lhs_se, rhs_se)
    z_score = (lhs - rhs) / denom if denom > 0 else 0.0
    return GirsanovReport(lhs, lhs_se, rhs, rhs_se, z_score, x, horizon, barrier)


# ---------------------------------------------------------------------------
# Non-cover probabilities with a Poissonized start, and their integral.
# ---------------------------------------------------------------------------


def poissonized_window_prob(ell: int, y: float) -> float:
    """Exact P(the Poissonized excursion count lands in the endpoint
    window); an upper envelope for the non-cover estimate at this y."""
    lam = 0.5 * (CSTAR * ell + y) ** 2
    lo, hi = endpoint_window(ell)
    a = math.ceil((CSTAR * ell + lo) ** 2 / 2.0)
    b = math.floor((CSTAR * ell + hi) ** 2 / 2.0)
    if b < a:
        return 0.0
    return float(sstats.poisson.cdf(b, lam) - sstats.poisson.cdf(a - 1, lam))


def gamma_tilde_grid(
    ell: int,
    ys: Sequence[float],
    replicas: int,
    seed: int,
    excursion_floor: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo estimates of the Poissonized non-cover probability
    gamma~(y) = E[ 1{count in window} * P(depth-ell tree not covered) ]
    over the y grid; returns (estimates, standard errors)."""
    lo, hi = endpoint_window(ell)
    a = math.ceil((CSTAR * ell + lo) ** 2 / 2.0)
    b = math.floor((CSTAR * ell + hi) ** 2 / 2.0)
    est = np.zeros(len(ys))
    se = np.zeros(len(ys))
    for i, y in enumerate(ys):
        lam = 0.5 * (CSTAR * ell + y) ** 2
        rng = np.random.Generator(np.random.Philox(key=stream_keys(seed, "gamma_tilde_xi", ell, np.array([i]))[0]))
        xi = rng.poisson(lam, replicas)
        inwin = (xi >= max(a, excursion_floor)) & (xi <= b)
        vals = np.zeros(replicas)
        idx = np.nonzero(inwin)[0]
        if idx.size:
            keys = stream_keys(seed, f"gamma_tilde_gw_{i}", ell, idx)
            vals[idx] = kernels.gw_uncovered_batch(ell, xi[idx].astype(np.int64), keys)
        p = vals.mean()
        est[i] = p
        se[i] = math.sqrt(max(p * (1 - p), 1e-300) / replicas)
    return est, se


@dataclass
class AlphaEstimate:
    value: float
    se: float
    tail_bound: float
    quad_rel_err: float
    ell: int


def alpha_ell(
    ell: int,
    ys: np.ndarray,
    gamma_est: np.ndarray,
    gamma_se: np.ndarray,
    max_quad_rel_err: float = 0.10,
) -> AlphaEstimate:
    """Trapezoidal integral of y e^{c* y} gamma~(y) / sqrt(pi ell) over the
    grid, with the off-grid remainder bounded by the exact Poisson window
    envelope.  Refuses to report when the grid is too coarse."""
    ys = np.asarray(ys, dtype=np.float64)
    if ys.size < 4 or np.any(np.diff(ys) <= 0):
        raise ValueError("need an increasing grid with at least 4 points")
    norm = 1.0 / math.sqrt(math.pi * ell)
    f = ys * np.exp(CSTAR * ys) * np.asarray(gamma_est) * norm
    value = float(np.trapezoid(f, ys))

    # Propagate the per-point Monte Carlo errors through the trapezoid weights.
    wts = np.zeros_like(ys)
    wts[1:] += 0.5 * np.diff(ys)
    wts[:-1] += 0.5 * np.diff(ys)
    var = float(((wts * ys * np.exp(CSTAR * ys) * norm * np.asarray(gamma_se)) ** 2).sum())

    # Off-grid remainder under the exact Poisson window envelope.
    tail = 0.0
    for lo_edge, hi_edge, direction in ((ys[-1], ys[-1] + 30.0, 1), (max(ys[0] - 30.0, 0.0), ys[0], -1)):
        grid = np.linspace(lo_edge, hi_edge, 241)
        env = np.array([poissonized_window_prob(ell, y) for y in grid])
        tail += float(np.trapezoid(grid * np.exp(CSTAR * grid) * env * norm, grid))

    coarse = float(np.trapezoid(f[::2], ys[::2]))
    denom = max(abs(value), 1e-300)
    rel_err = abs(value - coarse) / denom
    if rel_err > max_quad_rel_err:
        raise AccuracyError(
            f"trapezoid grid too coarse: halving changes the integral by {rel_err:.1%}"
        )
    return AlphaEstimate(value=value, se=math.sqrt(var), tail_bound=tail, quad_rel_err=rel_err, ell=ell)
