"""Branching-representation sampler for the excursion-count field.

One root excursion sends exactly one crossing into the level-0 edge, and
each vertex relays its incoming crossings to its two child edges with the
joint generating function 1/(3 - x - y) per crossing (marginals geometric
with mean one).  Summing independent excursion trees gives the counts of
s excursions, which makes exact sampling of cover-by-excursion quantities
possible without stepping the walk.  The equivalence with the step walker
is itself a tested claim, not an assumption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import kernels
from .counts import CountTree, CoverSample
from .errors import CapExceededError
from .rng import stream_keys
from .scaling import barrier, endpoint_window, excursion_budget_int, h_ell, psi
from .stats import wilson_interval
from .tree import VertexId

DEFAULT_EXCURSION_CAP = 10**7

# Counts are int64; keep far away from overflow even per edge.
MAX_TOTAL_EXCURSIONS = 1 << 40


def _keys_from_rng(rng: np.random.Generator, count: int) -> np.ndarray:
    keys = rng.integers(0, 1 << 64, size=(count, 2), dtype=np.uint64)
    zero = (keys == 0).all(axis=1)
    keys[zero, 0] = np.uint64(0x9E3779B97F4A7C15)
    return keys


@dataclass(frozen=True)
class OffspringPair:
    """Counts relayed into the two child edges by one incoming crossing."""

    a: int
    b: int


def sample_offspring(rng: np.random.Generator) -> OffspringPair:
    """Draw one offspring pair: total ~ Geometric(1/3) on {0,1,...} via
    inversion, split ~ Binomial(total, 1/2)."""
    u = 1.0 - rng.random()  # in (0, 1]
    m = int(math.log(u) / math.log(2.0 / 3.0))
    a = int(rng.binomial(m, 0.5)) if m else 0
    return OffspringPair(a, m - a)


def sample_single_excursion(n: int, rng: np.random.Generator) -> CountTree:
    """Counts of one root excursion (level-0 count is 1)."""
    return sample_counts(n, 1, rng)


def sample_counts(n: int, s: int, rng: np.random.Generator) -> CountTree:
    """Counts of s root excursions: edge-wise sum of s independent
    single-excursion trees, streamed inside the kernel."""
    if s < 1:
        raise ValueError("need at least one excursion")
    if s > MAX_TOTAL_EXCURSIONS:
        raise ArithmeticError(f"excursion count {s} risks count overflow")
    key = _keys_from_rng(rng, 1)[0]
    return CountTree(n, s, kernels.gw_counts(n, s, key[0], key[1]))


def sample_counts_batch(n: int, s: int, seed: int, replicas: np.ndarray) -> np.ndarray:
    """Replica-addressable count matrix, one heap-indexed row per replica."""
    keys = stream_keys(seed, "gw_counts", n, np.asarray(replicas))
    return kernels.gw_counts_batch(n, s, keys)


def sample_t_star(
    n: int,
    rng: np.random.Generator,
    cap: int = DEFAULT_EXCURSION_CAP,
    seed: int = 0,
    replica: int = 0,
) -> CoverSample:
    """Excursion cover time: index of the excursion reaching the last leaf."""
    key = _keys_from_rng(rng, 1)[0]
    t = int(kernels.gw_tstar(n, key[0], key[1], cap))
    if t < 0:
        raise CapExceededError(f"no cover within {cap} excursions (n={n})")
    return CoverSample(n=n, seed=seed, replica=replica, t_star=t)


def sample_t_star_batch(
    n: int, seed: int, replicas: np.ndarray, cap: int = DEFAULT_EXCURSION_CAP
) -> np.ndarray:
    """t* per replica; -1 marks replicas that hit the excursion cap."""
    keys = stream_keys(seed, "gw_tstar", n, np.asarray(replicas))
    return kernels.gw_tstar_batch(n, keys, cap)


def chain_child_counts(t: int, reps: int, rng: np.random.Generator) -> np.ndarray:
    """Marginal single-child counts given parent count t (the lineage chain)."""
    key = _keys_from_rng(rng, 1)[0]
    return kernels.gw_chain_children(t, reps, key[0], key[1])


# ---------------------------------------------------------------------------
# Normalized occupation and barrier events.
# ---------------------------------------------------------------------------


def eta_hat(tree: CountTree, v: VertexId, z: float) -> np.ndarray:
    """Excess sqrt(2 T_{v,j}) - rho_n (n - j) along the geodesic to v.

    The tree must have been sampled with s = floor((m_n + z)^2 / 2); this
    is validated, not silently recomputed.
    """
    s = excursion_budget_int(tree.depth, z)
    if tree.s != s:
        raise ValueError(f"tree was sampled with s={tree.s}, expected {s} for z={z}")
    counts = tree.geodesic_counts(v).astype(np.float64)
    levels = np.array([barrier(tree.depth, j) for j in range(v.level + 1)])
    return np.sqrt(2.0 * counts) - levels


@dataclass
class EventSpec:
    """Declarative barrier/cover event on a tree sampled at s excursions.

    Per-vertex scope evaluates one fixed vertex at level n-ell (they are
    exchangeable); union scope asks whether any vertex at that level dips
    to or below the bound at some level (the bounds then act as violation
    thresholds and window/subtree are ignored).
    """

    n: int
    ell: int
    bounds: np.ndarray  # lower bounds for the excess, length n - ell + 1
    window: tuple[float, float] = (-math.inf, math.inf)
    subtree: str = "none"  # none | not_covered | covered
    z: Optional[float] = None
    s: Optional[int] = None
    scope: str = "per_vertex"  # per_vertex | union
    delta: float = 0.1

    def __post_init__(self):
        if self.subtree not in ("none", "not_covered", "covered"):
            raise ValueError(f"unknown subtree condition {self.subtree!r}")
        if self.scope not in ("per_vertex", "union"):
            raise ValueError(f"unknown scope {self.scope!r}")
        nprime = self.n - self.ell
        if nprime < 0:
            raise ValueError("ell must not exceed n")
        self.bounds = np.asarray(self.bounds, dtype=np.float64)
        if self.bounds.shape != (nprime + 1,):
            raise ValueError(f"bounds must have length {nprime + 1}")
        if self.s is None:
            if self.z is None:
                raise ValueError("either s or z must be given")
            self.s = excursion_budget_int(self.n, self.z)

    @property
    def nprime(self) -> int:
        return self.n - self.ell


def event_lower_barrier(n: int, ell: int, z: float) -> EventSpec:
    """Stay strictly above the straight barrier, end in the window, leave
    the subtree uncovered (the strict count event)."""
    nprime = n - ell
    return EventSpec(
        n=n,
        ell=ell,
        bounds=np.zeros(nprime + 1),
        window=endpoint_window(ell),
        subtree="not_covered",
        z=z,
    )


def event_relaxed_barrier(n: int, ell: int, z: float, delta: float = 0.1) -> EventSpec:
    """Stay above the curved relaxation of the barrier with the subtree
    uncovered (the relaxed count event, a superset of the strict one)."""
    nprime = n - ell
    h = h_ell(ell)
    bounds = np.array([-psi(nprime, h, j, delta) for j in range(nprime + 1)])
    return EventSpec(n=n, ell=ell, bounds=bounds, subtree="not_covered", z=z, delta=delta)


def event_deep_dip(n: int, ell: int, z: float, h: Optional[float] = None, delta: float = 0.1) -> EventSpec:
    """Some vertex at level n-ell dips below the curved barrier at some
    level (the union event excluded by both count events)."""
    nprime = n - ell
    if h is None:
        h = h_ell(ell)
    bounds = np.array([-psi(nprime, h, j, delta) for j in range(nprime + 1)])
    return EventSpec(n=n, ell=ell, bounds=bounds, z=z, scope="union", delta=delta)


@dataclass
class EventEstimate:
    """Monte Carlo estimate with a Wilson 95% interval."""

    p: float
    lo: float
    hi: float
    hits: int
    replicas: int
    one_sided: bool
    spec: EventSpec = field(repr=False, default=None)


def _excess_levels(counts2d: np.ndarray, n: int, nprime: int):
    """Yield (j, excess matrix over vertices at level nprime) for j <= nprime."""
    idx = np.arange(1 << nprime)
    for j in range(nprime + 1):
        slots = (1 << j) + (idx >> (nprime - j))
        c = counts2d[:, slots].astype(np.float64)
        yield j, np.sqrt(2.0 * c) - barrier(n, j)


def _subtree_uncovered(counts2d: np.ndarray, n: int, nprime: int) -> np.ndarray:
    leaf = counts2d[:, (1 << n) : (2 << n)]
    return leaf.reshape(leaf.shape[0], 1 << nprime, -1).min(axis=2) == 0


def event_indicators(spec: EventSpec, counts2d: np.ndarray) -> np.ndarray:
    """Per-replica boolean indicators of the event on given count rows."""
    n, nprime = spec.n, spec.nprime
    B = counts2d.shape[0]
    if spec.scope == "union":
        hit = np.zeros(B, dtype=bool)
        for j in range(nprime + 1):
            cmin = counts2d[:, (1 << j) : (2 << j)].min(axis=1).astype(np.float64)
            low = np.sqrt(2.0 * cmin) - barrier(n, j)
            hit |= low <= spec.bounds[j]
        return hit

    # Per-vertex scope: the leftmost vertex, heap slots 2**j along its geodesic.
    ok = np.ones(B, dtype=bool)
    for j in range(nprime + 1):
        c = counts2d[:, 1 << j].astype(np.float64)
        eh = np.sqrt(2.0 * c) - barrier(n, j)
        ok &= eh > spec.bounds[j]
        if j == nprime:
            ok &= (eh >= spec.window[0]) & (eh <= spec.window[1])
    if spec.subtree != "none":
        block = counts2d[:, (1 << n) : (1 << n) + (1 << spec.ell)]
        uncovered = block.min(axis=1) == 0
        ok &= uncovered if spec.subtree == "not_covered" else ~uncovered
    return ok


def estimate_event(
    spec: EventSpec,
    replicas: int,
    rng: np.random.Generator,
    batch: int = 512,
) -> EventEstimate:
    """Monte Carlo probability of the event over fresh count trees."""
    if replicas < 1:
        raise ValueError("need at least one replica")
    hits = 0
    done = 0
    while done < replicas:
        b = min(batch, replicas - done)
        keys = _keys_from_rng(rng, b)
        counts2d = kernels.gw_counts_batch(spec.n, spec.s, keys)
        hits += int(event_indicators(spec, counts2d).sum())
        done += b
    lo, hi = wilson_interval(hits, replicas)
    return EventEstimate(
        p=hits / replicas,
        lo=lo,
        hi=hi,
        hits=hits,
        replicas=replicas,
        one_sided=hits in (0, replicas),
        spec=spec,
    )


def lambda_gamma_batch(
    counts2d: np.ndarray, n: int, ell: int, z: float, delta: float = 0.1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-replica strict and relaxed event counts over level n-ell, plus
    the uncovered-tree indicator.

    A positive strict count forces some zero leaf count, so lam >= 1
    implies the third output.
    """
    nprime = n - ell
    h = h_ell(ell)
    lo, hi = endpoint_window(ell)
    B = counts2d.shape[0]
    above = np.ones((B, 1 << nprime), dtype=bool)
    relaxed = np.ones((B, 1 << nprime), dtype=bool)
    endpoint = None
    for j, eh in _excess_levels(counts2d, n, nprime):
        above &= eh > 0.0
        relaxed &= eh > -psi(nprime, h, j, delta)
        if j == nprime:
            endpoint = (eh >= lo) & (eh <= hi)
    uncovered = _subtree_uncovered(counts2d, n, nprime)
    lam = (above & endpoint & uncovered).sum(axis=1)
    gam = (relaxed & uncovered).sum(axis=1)
    eta_sharp_zero = counts2d[:, (1 << n) : (2 << n)].min(axis=1) == 0
    return lam, gam, eta_sharp_zero


def count_lambda_gamma(tree: CountTree, n: int, ell: int, z: float, delta: float = 0.1) -> tuple[int, int]:
    """Strict and relaxed event counts for one realization."""
    if tree.depth != n:
        raise ValueError("tree depth mismatch")
    s = excursion_budget_int(n, z)
    if tree.s != s:
        raise ValueError(f"tree was sampled with s={tree.s}, expected {s} for z={z}")
    lam, gam, _ = lambda_gamma_batch(tree.counts[None, :], n, ell, z, delta)
    return int(lam[0]), int(gam[0])


# ---------------------------------------------------------------------------
# Step-accounting quantities.
# ---------------------------------------------------------------------------


@dataclass
class RTauResult:
    """Stopping data: tau is the first excursion whose level-k average
    count reaches the target; the averages are exact rationals."""

    tau: int
    r_value: Fraction
    s_k: Fraction


def r_from_tree(tree: CountTree) -> Fraction:
    """Exact step-normalizing average: total counts / 2**n; the walk makes
    2**(n+1) times this many steps over the same excursions."""
    return Fraction(tree.total(), 1 << tree.depth)


def r_and_tau(
    n: int,
    k: int,
    s_target: float,
    rng: np.random.Generator,
    cap: int = DEFAULT_EXCURSION_CAP,
) -> RTauResult:
    """Sample excursions until the level-k average count reaches s_target."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    key = _keys_from_rng(rng, 1)[0]
    tau, total, level_k, status = kernels.gw_r_tau(n, k, float(s_target), cap, key[0], key[1])
    if status != 0:
        raise CapExceededError(f"stopping rule not reached within {cap} excursions")
    return RTauResult(
        tau=int(tau),
        r_value=Fraction(int(total), 1 << n),
        s_k=Fraction(int(level_k), 1 << k),
    )


def r_tau_batch(n: int, k: int, s_target: float, seed: int, replicas: np.ndarray, cap: int = DEFAULT_EXCURSION_CAP) -> np.ndarray:
    keys = stream_keys(seed, "gw_r_tau", n, np.asarray(replicas))
    return kernels.gw_r_tau_batch(n, k, float(s_target), cap, keys)
