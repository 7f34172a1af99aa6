"""Empirical-distribution machinery: ECDFs, two-sample tests, exponential
tail fits, and the Gumbel-mixture limit CDF.

Convergence rates are not available analytically, so every finite-size
tolerance used downstream is declared configuration, not a derived fact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, special
from scipy import stats as sstats

from .errors import AccuracyError, DataError
from .scaling import CSTAR, centering  # noqa: F401  (re-exported)


def wilson_interval(hits: int, n: int, conf: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need a positive sample size")
    z = sstats.norm.ppf(0.5 + conf / 2.0)
    phat = hits / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class EmpiricalDistribution:
    """Sorted sample with provenance metadata."""

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if v.size < 1:
            raise DataError("empirical distribution needs at least one value")
        self.values = np.sort(v)

    @property
    def size(self) -> int:
        return self.values.size

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.values, q))

    def cdf(self, x) -> np.ndarray:
        return np.searchsorted(self.values, np.asarray(x), side="right") / self.size

    def exceedances(self, z: float) -> int:
        return int(self.size - np.searchsorted(self.values, z, side="right"))

    def survival(self, z: float) -> float:
        return self.exceedances(z) / self.size


def ks_two_sample(a: EmpiricalDistribution, b: EmpiricalDistribution) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    res = sstats.ks_2samp(a.values, b.values, method="asymp")
    return float(res.statistic), float(res.pvalue)


def ks_distance_to_cdf(d: EmpiricalDistribution, cdf) -> float:
    """sup-distance between the ECDF and a given CDF callable."""
    f = np.asarray(cdf(d.values), dtype=np.float64)
    n = d.size
    hi = np.abs(np.arange(1, n + 1) / n - f).max()
    lo = np.abs(np.arange(0, n) / n - f).max()
    return float(max(hi, lo))


def chi2_two_sample(obs_a: np.ndarray, obs_b: np.ndarray, min_cell: int = 10) -> tuple[float, int, float]:
    """Two-sample chi-square over matched categories; sparse cells are
    pooled into one bucket.  Returns (statistic, dof, p)."""
    oa = np.asarray(obs_a, dtype=np.float64)
    ob = np.asarray(obs_b, dtype=np.float64)
    if oa.shape != ob.shape:
        raise ValueError("category counts must align")
    tot = oa + ob
    big = tot >= min_cell
    a = np.append(oa[big], oa[~big].sum())
    b = np.append(ob[big], ob[~big].sum())
    keep = (a + b) > 0
    a, b = a[keep], b[keep]
    if a.size < 2:
        raise DataError("not enough occupied categories for a chi-square test")
    k1 = math.sqrt(b.sum() / a.sum())
    stat = float((((k1 * a - b / k1) ** 2) / (a + b)).sum())
    dof = a.size - 1
    return stat, dof, float(sstats.chi2.sf(stat, dof))


def categorize_rows(rows_a: np.ndarray, rows_b: np.ndarray, clip: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Map integer-vector samples to shared categories by clipping entries
    at `clip` and base-(clip+1) coding; returns per-category counts."""
    base = clip + 1
    wa = np.clip(rows_a, 0, clip).astype(np.int64)
    wb = np.clip(rows_b, 0, clip).astype(np.int64)
    powers = base ** np.arange(wa.shape[1], dtype=np.int64)
    ca = wa @ powers
    cb = wb @ powers
    cats, inv = np.unique(np.concatenate([ca, cb]), return_inverse=True)
    na = np.bincount(inv[: ca.size], minlength=cats.size)
    nb = np.bincount(inv[ca.size :], minlength=cats.size)
    return na, nb


# ---------------------------------------------------------------------------
# Tail and mixture fits.
# ---------------------------------------------------------------------------


@dataclass
class TailFit:
    alpha: float
    c: float
    se_alpha: float
    se_c: float
    z_grid: np.ndarray
    survival: np.ndarray


def tail_fit(
    d: EmpiricalDistribution,
    z_window: tuple[float, float],
    grid_points: int = 8,
    min_exceedances: int = 50,
    min_points: int = 5,
) -> TailFit:
    """Weighted least squares of log P(>z) - log z against -z.

    The survival model alpha * z * exp(-c z) is linear in (log alpha, c)
    after the transform; weights are the large-sample variances of the
    log survival estimates.  Grid points with too few exceedances are
    dropped rather than extrapolated.
    """
    z_lo, z_hi = z_window
    if not z_hi > z_lo:
        raise ValueError("empty tail window")
    grid = np.linspace(z_lo, z_hi, grid_points)
    counts = np.array([d.exceedances(z) for z in grid])
    keep = counts >= min_exceedances
    grid, counts = grid[keep], counts[keep]
    if grid.size < min_points:
        need = int(min_exceedances / max(d.survival(z_hi), 1e-12))
        raise AccuracyError(
            f"only {grid.size} grid points have {min_exceedances}+ exceedances; "
            f"roughly {need} samples would be needed for the full window"
        )
    surv = counts / d.size
    y = np.log(surv) - np.log(grid)
    w = counts * surv / np.maximum(1.0 - surv, 1e-12)  # 1 / Var(log Phat)
    X = np.stack([np.ones_like(grid), -grid], axis=1)
    WX = X * w[:, None]
    cov = np.linalg.inv(X.T @ WX)
    beta = cov @ (WX.T @ y)
    log_alpha, c = beta
    se = np.sqrt(np.diag(cov))
    alpha = math.exp(log_alpha)
    return TailFit(
        alpha=alpha,
        c=float(c),
        se_alpha=alpha * float(se[0]),
        se_c=float(se[1]),
        z_grid=grid,
        survival=surv,
    )


def synthetic_tail_sample(alpha: float, c: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draws from the survival law min(1, alpha z e^{-cz}).

    Valid (decreasing) on z >= 1/c provided alpha >= c e; inversion uses
    the secondary real branch of the Lambert W function.
    """
    if alpha < c * math.e:
        raise ValueError("need alpha >= c*e for a valid survival function")
    u = rng.random(size)
    # alpha z e^{-cz} = u  =>  (cz) e^{-cz} = u c / alpha.
    arg = -u * c / alpha
    t = -special.lambertw(arg, k=-1).real
    return t / c


@dataclass
class MixtureCdf:
    """Gumbel mixture y -> mean_i exp(-alpha * X'_i * exp(-c y)).

    Nonpositive mixing samples are excluded up front (the limit variable
    is positive; finite-depth samples need not be) and the excluded
    fraction is kept on record.
    """

    alpha: float
    c: float
    xprime: np.ndarray
    dropped_fraction: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0 or self.c <= 0:
            raise ValueError("alpha and c must be positive")
        x = np.asarray(self.xprime, dtype=np.float64).ravel()
        pos = x[x > 0]
        if pos.size == 0:
            raise DataError("all mixing samples are nonpositive")
        self.dropped_fraction = 1.0 - pos.size / x.size
        self.xprime = pos

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        expo = np.exp(-self.c * y)
        return np.exp(-self.alpha * np.outer(expo, self.xprime)).mean(axis=1).reshape(y.shape)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Hierarchical draws: a mixing sample, then its shifted Gumbel."""
        x = rng.choice(self.xprime, size=size, replace=True)
        g = -np.log(-np.log(rng.random(size)))  # standard Gumbel
        return (np.log(self.alpha * x) + g) / self.c


def mixture_cdf_fit(
    d: EmpiricalDistribution,
    xprime: np.ndarray,
    c: float = CSTAR,
) -> tuple[MixtureCdf, float]:
    """Fit the mixture scale alpha at fixed decay c by minimizing the KS
    distance.  c stays fixed: finite-size tails cannot resolve both
    parameters, and the decay constant is known analytically."""
    probe = MixtureCdf(1.0, c, xprime)  # validates the mixing sample

    def ks_of(log_alpha: float) -> float:
        return ks_distance_to_cdf(d, MixtureCdf(math.exp(log_alpha), c, probe.xprime))

    res = optimize.minimize_scalar(ks_of, bounds=(-12.0, 12.0), method="bounded")
    fitted = MixtureCdf(math.exp(res.x), c, probe.xprime)
    fitted.dropped_fraction = probe.dropped_fraction
    return fitted, float(res.fun)


@dataclass
class ShiftTestReport:
    statistic: float
    p_value: float
    shift_sd: float
    n: int


def shift_test(
    cover: EmpiricalDistribution,
    tstar: EmpiricalDistribution,
    rng: np.random.Generator,
    shift_sd: float = 1.0,
) -> ShiftTestReport:
    """KS-compare (cover sample - independent Gaussian) with the t* sample.

    The two normalized statistics should differ in law by an independent
    standard Gaussian shift; a wrong shift variance serves as the
    negative control.
    """
    na = cover.meta.get("n")
    nb = tstar.meta.get("n")
    if na is not None and nb is not None and na != nb:
        raise ValueError(f"samples come from different depths: {na} vs {nb}")
    shifted = cover.values - rng.normal(0.0, shift_sd, size=cover.size)
    stat, p = ks_two_sample(EmpiricalDistribution(shifted), tstar)
    return ShiftTestReport(statistic=stat, p_value=p, shift_sd=shift_sd, n=cover.size)
