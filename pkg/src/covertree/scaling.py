"""Centering constants and barrier geometry shared by all samplers.

All logarithms are natural; the drift constant ``CSTAR = sqrt(2 ln 2)``
is natural-log based, and every derived quantity follows suit.
"""

from __future__ import annotations

import math

# Leading drift of the normalized cover time.
CSTAR = math.sqrt(2.0 * math.log(2.0))


def rho(n: int) -> float:
    """Per-level slope c* - log(n) / (c* n) of the centering line."""
    if n < 1:
        raise ValueError("centering slope needs n >= 1")
    return CSTAR - math.log(n) / (CSTAR * n)


def m(n: int) -> float:
    """Centering constant m_n = rho_n * n subtracted from sqrt-counts."""
    return rho(n) * n


def centering(n: int) -> tuple[float, float, float]:
    """Return (rho_n, m_n, c*)."""
    r = rho(n)
    return r, r * n, CSTAR


def excursion_budget(n: int, z: float) -> float:
    """Excursion count (m_n + z)^2 / 2 matching normalized level z."""
    return 0.5 * (m(n) + z) ** 2


def excursion_budget_int(n: int, z: float) -> int:
    """Integer excursion count: the budget is rounded down."""
    s = math.floor(excursion_budget(n, z))
    if s < 1:
        raise ValueError(f"excursion budget for n={n}, z={z} is below 1")
    return s


def barrier(n: int, j: int | float) -> float:
    """Straight barrier rho_n * (n - j) under the normalized counts."""
    return rho(n) * (n - j)


def psi(k: int, h: float, j: int | float, delta: float = 0.1) -> float:
    """Curved relaxation h + min(j, k - j)^delta of the straight barrier."""
    jk = min(j, k - j)
    return h + jk**delta


def h_ell(ell: int) -> float:
    """Endpoint relaxation 0.5 * log(ell) of the curved barrier."""
    return 0.5 * math.log(ell)


def r_ell(ell: int) -> float:
    """Half-width factor sqrt(log(ell)) of the endpoint window."""
    return math.sqrt(math.log(ell))


def endpoint_window(ell: int) -> tuple[float, float]:
    """Window sqrt(ell) * [1/r_ell, r_ell] for the end excess."""
    r = r_ell(ell)
    s = math.sqrt(ell)
    return s / r, s * r
