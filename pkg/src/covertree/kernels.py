"""Jitted inner loops: step-level walk simulation and excursion-count
branching sweeps.

All kernels draw from an explicit xorshift128+ state seeded by two 64-bit
words, so each replica is a pure function of its key and results never
depend on batching or thread scheduling.  Vertices are heap-indexed:
root -> 0, the level-0 vertex -> 1, children of h -> 2h and 2h+1; leaves
occupy [2**n, 2**(n+1)).  Edge counts live in the child's slot.

Counts within a single excursion stay tiny, so offspring pairs are drawn
exactly: total via summed geometric(1/3) inversions, split via popcount
Binomial(m, 1/2).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

_U1 = np.uint64(1)
_U2 = np.uint64(2)
_U3 = np.uint64(3)
_U4 = np.uint64(4)
_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U23 = np.uint64(23)
_U26 = np.uint64(26)
_U56 = np.uint64(56)
_U64 = np.uint64(64)
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_FULL = np.uint64(0xFFFFFFFFFFFFFFFF)

_TO_U01 = 1.0 / 9007199254740992.0  # 2**-53

# Inversion constants for the two geometric laws in the offspring draw.
_INV_LOG_2_3 = 1.0 / math.log(2.0 / 3.0)
_INV_LOG_1_2 = 1.0 / math.log(0.5)


@njit(inline="always")
def _next_u64(state):
    s1 = state[0]
    s0 = state[1]
    state[0] = s0
    s1 ^= s1 << _U23
    s1 = s1 ^ s0 ^ (s1 >> _U17) ^ (s0 >> _U26)
    state[1] = s1
    return s1 + s0


@njit(inline="always")
def _u01_open(state):
    # Uniform on (0, 1]; never 0 so log() is safe.
    return (np.float64(_next_u64(state) >> _U11) + 1.0) * _TO_U01


@njit(inline="always")
def _geom(state, inv_log_q):
    # Failures before first success: floor(log(U) / log(1 - p)).
    return np.int64(math.log(_u01_open(state)) * inv_log_q)


@njit(inline="always")
def _popcount(x):
    x = x - ((x >> _U1) & _M1)
    x = (x & _M2) + ((x >> _U2) & _M2)
    x = (x + (x >> _U4)) & _M4
    return np.int64((x * _H01) >> _U56)


@njit(inline="always")
def _binom_half(state, m):
    # Binomial(m, 1/2) as the popcount of m random bits: exact.
    s = np.int64(0)
    while m >= 64:
        s += _popcount(_next_u64(state))
        m -= 64
    if m > 0:
        mask = _FULL >> np.uint64(64 - m)
        s += _popcount(_next_u64(state) & mask)
    return s


@njit(inline="always")
def _offspring(state, t):
    # Counts into the two child edges spawned by t entries at one vertex:
    # total ~ NegBin(t, 1/3) via summed geometrics, split ~ Binomial(., 1/2).
    m = np.int64(0)
    for _ in range(t):
        m += _geom(state, _INV_LOG_2_3)
    a = _binom_half(state, m)
    return a, m - a


# ---------------------------------------------------------------------------
# Step-level walk.
# ---------------------------------------------------------------------------


@njit(cache=True)
def walk_excursions(n, s, key0, key1):
    """Run exactly s root excursions; return (edge counts, total steps)."""
    state = np.empty(2, np.uint64)
    state[0] = key0
    state[1] = key1
    size = np.int64(1) << (n + 1)
    leaf0 = np.int64(1) << n
    counts = np.zeros(size, np.int64)
    pos = np.int64(0)
    steps = np.int64(0)
    exc = np.int64(0)
    buf = np.uint64(0)
    nleft = 0
    while True:
        if pos == 0:
            if exc == s:
                break
            exc += 1
            pos = 1
            counts[1] += 1
            steps += 1
        elif pos >= leaf0:
            pos >>= 1
            steps += 1
        else:
            while True:
                if nleft == 0:
                    buf = _next_u64(state)
                    nleft = 32
                c = buf & _U3
                buf >>= _U2
                nleft -= 1
                if c != _U3:
                    break
            steps += 1
            if c == np.uint64(0):
                pos >>= 1
            elif c == _U1:
                pos = 2 * pos
                counts[pos] += 1
            else:
                pos = 2 * pos + 1
                counts[pos] += 1
    return counts, steps


@njit(cache=True, parallel=True)
def walk_excursions_batch(n, s, keys):
    """Per-replica edge counts and steps for s excursions each."""
    reps = keys.shape[0]
    size = np.int64(1) << (n + 1)
    counts = np.zeros((reps, size), np.int64)
    steps = np.zeros(reps, np.int64)
    for r in prange(reps):
        c, st = walk_excursions(n, s, keys[r, 0], keys[r, 1])
        counts[r] = c
        steps[r] = st
    return counts, steps


@njit(cache=True)
def walk_cover(n, key0, key1, step_cap):
    """Walk until every vertex is visited, then finish the excursion.

    Returns (cover_steps, t_star, steps_at_excursion_end, counts, status);
    status 1 means the step cap was hit before covering.
    """
    state = np.empty(2, np.uint64)
    state[0] = key0
    state[1] = key1
    size = np.int64(1) << (n + 1)
    leaf0 = np.int64(1) << n
    counts = np.zeros(size, np.int64)
    visited = np.zeros(size, np.bool_)
    visited[0] = True  # start vertex counts as seen at time zero
    unvisited = size - 1
    pos = np.int64(0)
    steps = np.int64(0)
    exc = np.int64(0)
    cover_steps = np.int64(-1)
    t_star = np.int64(0)
    buf = np.uint64(0)
    nleft = 0
    while True:
        if pos == 0:
            if cover_steps >= 0:
                break
            exc += 1
            pos = 1
            counts[1] += 1
            steps += 1
        elif pos >= leaf0:
            pos >>= 1
            steps += 1
        else:
            while True:
                if nleft == 0:
                    buf = _next_u64(state)
                    nleft = 32
                c = buf & _U3
                buf >>= _U2
                nleft -= 1
                if c != _U3:
                    break
            steps += 1
            if c == np.uint64(0):
                pos >>= 1
            elif c == _U1:
                pos = 2 * pos
                counts[pos] += 1
            else:
                pos = 2 * pos + 1
                counts[pos] += 1
        if pos != 0 and not visited[pos]:
            visited[pos] = True
            unvisited -= 1
            if unvisited == 0:
                cover_steps = steps
                t_star = exc
        if steps > step_cap and cover_steps < 0:
            return cover_steps, t_star, steps, counts, np.int64(1)
    return cover_steps, t_star, steps, counts, np.int64(0)


@njit(cache=True, parallel=True)
def walk_cover_batch(n, keys, step_cap):
    """Rows of (cover_steps, t_star, steps_at_excursion_end, status)."""
    reps = keys.shape[0]
    out = np.zeros((reps, 4), np.int64)
    for r in prange(reps):
        cs, ts, se, _, status = walk_cover(n, keys[r, 0], keys[r, 1], step_cap)
        out[r, 0] = cs
        out[r, 1] = ts
        out[r, 2] = se
        out[r, 3] = status
    return out


# ---------------------------------------------------------------------------
# Branching representation of the excursion counts.
# ---------------------------------------------------------------------------


@njit(cache=True)
def gw_counts(n, s, key0, key1):
    """Edge counts of s root excursions via the branching construction."""
    state = np.empty(2, np.uint64)
    state[0] = key0
    state[1] = key1
    size = np.int64(1) << (n + 1)
    leaf0 = np.int64(1) << n
    counts = np.zeros(size, np.int64)
    counts[1] = s
    if n == 0:
        return counts
    stack_h = np.empty(2 * n + 8, np.int64)
    stack_t = np.empty(2 * n + 8, np.int64)
    for _ in range(s):
        sp = 0
        stack_h[0] = 1
        stack_t[0] = 1
        sp = 1
        while sp > 0:
            sp -= 1
            h = stack_h[sp]
            t = stack_t[sp]
            a, b = _offspring(state, t)
            if a > 0:
                ch = 2 * h
                counts[ch] += a
                if ch < leaf0:
                    stack_h[sp] = ch
                    stack_t[sp] = a
                    sp += 1
            if b > 0:
                ch = 2 * h + 1
                counts[ch] += b
                if ch < leaf0:
                    stack_h[sp] = ch
                    stack_t[sp] = b
                    sp += 1
    return counts


@njit(cache=True, parallel=True)
def gw_counts_batch(n, s, keys):
    reps = keys.shape[0]
    size = np.int64(1) << (n + 1)
    counts = np.zeros((reps, size), np.int64)
    for r in prange(reps):
        counts[r] = gw_counts(n, s, keys[r, 0], keys[r, 1])
    return counts


@njit(cache=True)
def gw_tstar(n, key0, key1, cap):
    """Excursion index at which the last leaf is first reached, or -1 if
    still uncovered after `cap` excursions.

    Prunes every branch whose subtree holds no uncovered leaf; the law of
    the returned index is unchanged because pruned branches are
    independent of it.
    """
    state = np.empty(2, np.uint64)
    state[0] = key0
    state[1] = key1
    size = np.int64(1) << (n + 1)
    leaf0 = np.int64(1) << n
    uncov = np.zeros(size, np.int64)
    for h in range(leaf0, size):
        uncov[h] = 1
    for h in range(leaf0 - 1, 0, -1):
        uncov[h] = uncov[2 * h] + uncov[2 * h + 1]
    remaining = np.int64(1) << n
    stack_h = np.empty(2 * n + 8, np.int64)
    stack_t = np.empty(2 * n + 8, np.int64)
    for e in range(1, cap + 1):
        sp = 0
        stack_h[0] = 1
        stack_t[0] = 1
        sp = 1
        while sp > 0:
            sp -= 1
            h = stack_h[sp]
            t = stack_t[sp]
            if h >= leaf0:
                # Reached an uncovered leaf (covered ones are pruned).
                uncov[h] = 0
                remaining -= 1
                p = h >> 1
                while p >= 1:
                    uncov[p] -= 1
                    p >>= 1
                continue
            a, b = _offspring(state, t)
            if a > 0 and uncov[2 * h] > 0:
                stack_h[sp] = 2 * h
                stack_t[sp] = a
                sp += 1
            if b > 0 and uncov[2 * h + 1] > 0:
                stack_h[sp] = 2 * h + 1
                stack_t[sp] = b
                sp += 1
        if remaining == 0:
            return np.int64(e)
    return np.int64(-1)


@njit(cache=True, parallel=True)
def gw_tstar_batch(n, keys, cap):
    reps = keys.shape[0]
    out = np.empty(reps, np.int64)
    for r in prange(reps):
        out[r] = gw_tstar(n, keys[r, 0], keys[r, 1], cap)
    return out


@njit(cache=True, parallel=True)
def gw_uncovered_batch(n, s_draws, keys):
    """Indicator of some leaf still unreached after s_draws[r] excursions."""
    reps = keys.shape[0]
    out = np.empty(reps, np.int64)
    for r in prange(reps):
        s = s_draws[r]
        if s <= 0:
            out[r] = 1
        else:
            out[r] = 1 if gw_tstar(n, keys[r, 0], keys[r, 1], s) < 0 else 0
    return out


@njit(cache=True)
def gw_geodesic_hist(n, reps, key0, key1, hmax):
    """Histogram of single-excursion counts along one fixed leaf geodesic.

    Row j collects the count on the level-j edge over `reps` excursions
    (level 0 is always 1); values are clipped into the last bin.
    """
    state = np.empty(2, np.uint64)
    state[0] = key0
    state[1] = key1
    hist = np.zeros((n + 1, hmax), np.int64)
    for _ in range(reps):
        t = np.int64(1)
        hist[0, 1] += 1
        for j in range(1, n + 1):
            if t > 0:
                m = np.int64(0)
                for _ in range(t):
                    m += _geom(state, _INV_LOG_2_3)
                t = _binom_half(state, m)
            v = t if t < hmax else hmax - 1
            hist[j, v] += 1
            if t == 0:
                for j2 in range(j + 1, n + 1):
                    hist[j2, 0] += 1
                break
    return hist


@njit(cache=True)
def gw_chain_children(t, reps, key0, key1):
    """Marginal child-edge counts given parent count t (one lineage)."""
    state = np.empty(2, np.uint64)
    state[0] = key0
    state[1] = key1
    out = np.empty(reps, np.int64)
    for r in range(reps):
        m = np.int64(0)
        for _ in range(t):
            m += _geom(state, _INV_LOG_2_3)
        out[r] = _binom_half(state, m)
    return out


@njit(cache=True)
def gw_r_tau(n, k, s_target, cap, key0, key1):
    """Run excursions until the level-k average count first reaches s_target.

    Returns (tau, total_count_sum, level_k_sum, status); sums are exact
    integers, so the normalized averages are exact rationals upstream.
    Status 1 signals the excursion cap.
    """
    state = np.empty(2, np.uint64)
    state[0] = key0
    state[1] = key1
    leaf0 = np.int64(1) << n
    klo = np.int64(1) << k
    khi = np.int64(2) << k
    threshold = s_target * np.float64(np.int64(1) << k)
    total = np.int64(0)
    level_k = np.int64(0)
    stack_h = np.empty(2 * n + 8, np.int64)
    stack_t = np.empty(2 * n + 8, np.int64)
    for e in range(1, cap + 1):
        total += 1  # level-0 edge
        if k == 0:
            level_k += 1
        if n > 0:
            sp = 0
            stack_h[0] = 1
            stack_t[0] = 1
            sp = 1
            while sp > 0:
                sp -= 1
                h = stack_h[sp]
                t = stack_t[sp]
                a, b = _offspring(state, t)
                if a > 0:
                    ch = 2 * h
                    total += a
                    if klo <= ch < khi:
                        level_k += a
                    if ch < leaf0:
                        stack_h[sp] = ch
                        stack_t[sp] = a
                        sp += 1
                if b > 0:
                    ch = 2 * h + 1
                    total += b
                    if klo <= ch < khi:
                        level_k += b
                    if ch < leaf0:
                        stack_h[sp] = ch
                        stack_t[sp] = b
                        sp += 1
        if np.float64(level_k) >= threshold:
            return np.int64(e), total, level_k, np.int64(0)
    return np.int64(cap), total, level_k, np.int64(1)


@njit(cache=True, parallel=True)
def gw_r_tau_batch(n, k, s_target, cap, keys):
    reps = keys.shape[0]
    out = np.zeros((reps, 4), np.int64)
    for r in prange(reps):
        tau, total, lk, status = gw_r_tau(n, k, s_target, cap, keys[r, 0], keys[r, 1])
        out[r, 0] = tau
        out[r, 1] = total
        out[r, 2] = lk
        out[r, 3] = status
    return out
