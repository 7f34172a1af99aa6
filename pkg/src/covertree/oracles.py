"""Exact small-tree oracles, independent of every sampler in the package.

The walk oracles work on the absorbing chain of the walk killed at the
root: the fundamental matrix gives exact first and second moments of
per-edge excursion counts, hitting probabilities, and the variance of the
step-normalizing average.  The offspring oracle enumerates the walk's
choice sequences at a degree-3 vertex directly.  Cover-time means come
from a dense linear system over (position, visited-set) states.

These stay deliberately brute force; the fast samplers are tested against
them, never the other way around.
"""

from __future__ import annotations

import math

import numpy as np

from .tree import VertexId


def _parent(h: int) -> int:
    return h >> 1


def walk_transition_matrix(n: int) -> np.ndarray:
    """One-step kernel of the walk on heap states 0..2**(n+1)-1 (0 = root)."""
    size = 1 << (n + 1)
    leaf0 = 1 << n
    P = np.zeros((size, size))
    P[0, 1] = 1.0
    for h in range(1, size):
        if h >= leaf0:
            P[h, _parent(h)] = 1.0
        else:
            P[h, _parent(h)] = 1.0 / 3.0
            P[h, 2 * h] = 1.0 / 3.0
            P[h, 2 * h + 1] = 1.0 / 3.0
    return P


def excursion_green(n: int) -> np.ndarray:
    """Fundamental matrix G[x, y] = expected visits to y before hitting the
    root, for the walk started at x; states 1..2**(n+1)-1."""
    P = walk_transition_matrix(n)
    Q = P[1:, 1:]
    return np.linalg.inv(np.eye(Q.shape[0]) - Q)


def edge_count_moments(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact single-excursion mean vector and covariance matrix of the
    per-edge downward-crossing counts, indexed by child heap slot 1..2**(n+1)-1.

    Slot h holds the count of parent(h) -> h crossings during one excursion
    from the root; slot 1 is the deterministic root-edge crossing.
    """
    size = 1 << (n + 1)
    G = excursion_green(n)

    def g(x: int, y: int) -> float:
        return G[x - 1, y - 1]

    third = 1.0 / 3.0
    mean = np.zeros(size)
    mean[1] = 1.0
    for h in range(2, size):
        mean[h] = g(1, _parent(h)) * third

    # E[N_e N_f] = E[N_e] E_{y}[N_f] + E[N_f] E_{y'}[N_e] + 1{e=f} E[N_e],
    # where E_y[...] restarts the killed chain at the head of the other edge.
    second = np.zeros((size, size))
    second[1, 1] = 1.0
    for h in range(2, size):
        second[1, h] = second[h, 1] = mean[h]
    for h in range(2, size):
        for h2 in range(h, size):
            v = mean[h] * g(h, _parent(h2)) * third + mean[h2] * g(h2, _parent(h)) * third
            if h == h2:
                v += mean[h]
            second[h, h2] = second[h2, h] = v

    cov = second - np.outer(mean, mean)
    return mean[1:], cov[1:, 1:]


def edge_count_cov(n: int, u: VertexId, v: VertexId) -> float:
    """Exact Cov of single-excursion counts on the edges into u and v."""
    _, cov = edge_count_moments(n)
    return float(cov[u.heap_index() - 1, v.heap_index() - 1])


def normalized_count_cov(n: int) -> np.ndarray:
    """Exact covariance of (T^s - s)/sqrt(2s): half the single-excursion
    covariance, for every s (counts over s excursions are an i.i.d. sum)."""
    _, cov = edge_count_moments(n)
    return cov / 2.0


def hit_prob_before_root(n: int, h: int) -> float:
    """P(edge into heap slot h is crossed during one excursion)."""
    if h == 1:
        return 1.0
    G = excursion_green(n)
    return G[0, h - 1] / G[h - 1, h - 1]


def offspring_joint_pmf(mmax: int) -> np.ndarray:
    """Exact joint pmf of the two child-edge counts spawned by one visit
    sequence at a degree-3 vertex: P(a, b) = C(a+b, a) / 3**(a+b+1).

    Enumerates the uniform choice sequences (parent ends the excursion),
    truncated at a, b <= mmax; the omitted mass is the geometric tail.
    """
    pmf = np.zeros((mmax + 1, mmax + 1))
    for a in range(mmax + 1):
        for b in range(mmax + 1):
            pmf[a, b] = math.comb(a + b, a) * 3.0 ** (-(a + b + 1))
    return pmf


def offspring_moments(mmax: int = 200) -> dict[str, float]:
    """Moments of the offspring pair from the enumeration pmf."""
    pmf = offspring_joint_pmf(mmax)
    a = np.arange(mmax + 1)
    pa = pmf.sum(axis=1)
    mean = float(a @ pa)
    var = float((a - mean) ** 2 @ pa)
    eab = float(a @ pmf @ a)
    return {"mean": mean, "var": var, "e_ab": eab, "p00": float(pmf[0, 0])}


def both_children_hit_prob() -> float:
    """P(both child edges crossed in one excursion) = 1 - 2 P(a=0) + P(a=b=0)."""
    pmf = offspring_joint_pmf(200)
    return float(1.0 - 2.0 * pmf[0, :].sum() + pmf[0, 0])


def mean_cover_time(n: int) -> float:
    """Exact E[cover steps] on the depth-n tree via the (position, visited)
    absorbing chain.  Feasible for n <= 2 (state space 2**(n+1) * 2**2**(n+1))."""
    size = 1 << (n + 1)
    if size > 8:
        raise ValueError("exact cover-time solver is limited to n <= 2")
    full = (1 << size) - 1
    P = walk_transition_matrix(n)
    nstates = size * (full + 1)

    def sid(pos: int, mask: int) -> int:
        return pos * (full + 1) + mask

    A = np.eye(nstates)
    b = np.zeros(nstates)
    for pos in range(size):
        for mask in range(full + 1):
            if not (mask >> pos) & 1 or mask == full:
                continue  # unreachable or already covered: E = 0
            i = sid(pos, mask)
            b[i] = 1.0
            for nxt in np.nonzero(P[pos])[0]:
                nmask = mask | (1 << int(nxt))
                if nmask != full:
                    A[i, sid(int(nxt), nmask)] -= P[pos, nxt]
    sol = np.linalg.solve(A, b)
    return float(sol[sid(0, 1)])


def var_r_single(n: int) -> float:
    """Exact Var of the step-normalizing average 2**-n * sum of edge counts
    over one excursion, from the pairwise covariance structure:
    Cov = 2|u ^ v| for comparable pairs and 2|u ^ v| + 1 otherwise."""
    s1 = 2.0 * sum(2.0 ** (-i) * (2 ** (n + 1) - 2**i) ** 2 for i in range(1, n + 1))
    total = (2 ** (n + 1) - 1) ** 2
    comparable = sum((1 << j) * ((j + 1) + (1 << (n - j + 1)) - 2) for j in range(n + 1))
    s2 = total - comparable
    return (s1 + s2) / 4.0**n


def mixture_survival(y: float, alpha: float, c: float, xprime: np.ndarray) -> float:
    """Closed-form survival 1 - mean(exp(-alpha * X' * exp(-c y))) used when
    generating synthetic samples for the fitters."""
    return float(1.0 - np.mean(np.exp(-alpha * xprime * math.exp(-c * y))))
