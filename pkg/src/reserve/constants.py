"""Analytic constants and closed-form bounds of the reservation algorithms."""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import pdtrc

__all__ = [
    "RlsConstants",
    "h",
    "max_h",
    "solve_rls_constants",
    "ls_ratio",
    "mls_ratios",
    "corollary1_bound",
    "compound_poisson_tail_bound",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_MAX_ITER = 200
_Z_LO, _Z_HI = 1e-12, 0.5 - 1e-12


@dataclass(frozen=True)
class RlsConstants:
    """Fixed point ``r_star`` with maximizer ``z_star`` and ``h(z_star, r_star)``."""

    r_star: float
    z_star: float
    h_at_opt: float


def h(z: float, r: float) -> float:
    """h(z, r) = z - [z - (1 - e^-2 / (1 - 2r)) / 2] (1 - 2r) ((1 - z) / (1 - z - r))^(2 (1 - z))."""
    if r >= 0.5:
        raise ValueError(f"h needs r < 0.5, got r={r}")
    if z + r >= 1.0:
        raise ValueError(f"h needs z + r < 1, got z={z}, r={r}")
    bracket = z - 0.5 * (1.0 - math.exp(-2.0) / (1.0 - 2.0 * r))
    base = (1.0 - z) / (1.0 - z - r)
    return z - bracket * (1.0 - 2.0 * r) * base ** (2.0 * (1.0 - z))


def max_h(r: float, tol: float = 1e-12) -> tuple[float, float]:
    """Golden-section search for ``max_z h(z, r)`` over z in (0, 0.5); returns ``(z, h)``."""
    a, b = _Z_LO, _Z_HI
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = h(x1, r), h(x2, r)
    for _ in range(_MAX_ITER):
        if b - a <= tol:
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = h(x2, r)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = h(x1, r)
    z = 0.5 * (a + b)
    hz = h(z, r)
    # the maximizer must be interior; an endpoint optimum means the search did not bracket
    if z - _Z_LO < 1e-6 or _Z_HI - z < 1e-6:
        raise ArithmeticError(f"maximizer of h(., {r}) not bracketed inside (0, 0.5)")
    return z, hz


def solve_rls_constants(tolerance: float = 1e-8) -> RlsConstants:
    """Largest r in (0, 0.5) with r <= max_z h(z, r), by bisection on r."""
    if not (1e-10 <= tolerance <= 1e-3):
        raise ValueError(f"tolerance must lie in [1e-10, 1e-3], got {tolerance}")
    lo, hi = 0.0, 0.5 - 1e-9
    for _ in range(_MAX_ITER):
        if hi - lo <= tolerance:
            break
        mid = 0.5 * (lo + hi)
        if max_h(mid)[1] >= mid:
            lo = mid
        else:
            hi = mid
    z, hz = max_h(lo)
    return RlsConstants(r_star=lo, z_star=z, h_at_opt=hz)


def ls_ratio() -> float:
    """(1 - 1/e) / 2."""
    return 0.5 * (1.0 - math.exp(-1.0))


def _reservation_ratio(d: int, mu: float) -> float:
    # (1/(d+1)) [sum_{k=1}^d e^-mu mu^k/(k-1)! + d P(N >= d+1)],  N ~ Poisson(mu)
    if mu <= 0.0:
        return 0.0
    head = math.fsum(math.exp(-mu + k * math.log(mu) - math.lgamma(k)) for k in range(1, d + 1))
    return (head + d * float(pdtrc(d, mu))) / (d + 1)


def _ratio_all_factor(d: int, series_tol: float) -> float:
    # 1 - e^-d sum_{i>=d} (i-d+1) d^(i-1)/i!; the tail from i=K on is at most P(N >= K-1), N ~ Poisson(d)
    terms = []
    i = d
    while True:
        terms.append((i - d + 1) * math.exp(-d + (i - 1) * math.log(d) - math.lgamma(i + 1)))
        i += 1
        if i > d + 1 and float(pdtrc(i - 2, d)) < series_tol:
            break
    return 1.0 - math.fsum(terms)


def mls_ratios(
    d: int,
    UjL: float,
    UjS: float,
    Uj: float,
    cj: float,
    series_tol: float = 1e-12,
) -> tuple[float, float, float]:
    """The three MLS reservation ratios ``(ratio_L, ratio_S, ratio_all)`` of one resource."""
    if int(d) != d or d < 2:
        raise ValueError(f"mls_ratios needs an integer d >= 2, got {d}")
    d = int(d)
    if UjL < 0 or UjS < 0:
        raise ValueError("UjL and UjS must be nonnegative")
    if cj <= 0:
        raise ValueError(f"cj must be positive, got {cj}")
    slack = 1e-9 * cj
    if UjL + UjS > Uj + slack or Uj > cj + slack:
        raise ValueError(f"need UjL + UjS <= Uj <= cj, got {UjL}, {UjS}, {Uj}, {cj}")
    ratio_L = _reservation_ratio(d, (d + 1) * UjL / cj)
    ratio_S = _reservation_ratio(d, (d + 1) * UjS / cj)
    ratio_all = Uj / cj * _ratio_all_factor(d, series_tol)
    return ratio_L, ratio_S, ratio_all


def corollary1_bound(d: int) -> float:
    """1 - e^-d d^d / d! - 1/d, evaluated in log space."""
    if int(d) != d or d < 2:
        raise ValueError(f"corollary1_bound needs an integer d >= 2, got {d}")
    return 1.0 - math.exp(-d + d * math.log(d) - math.lgamma(d + 1)) - 1.0 / d


def compound_poisson_tail_bound(alpha: float, beta: float, l: int) -> float:
    """((1 - beta)/(l - 1)) E[min(N', l - 1)] with N' ~ Poisson(alpha (l - 1)/(1 - beta))."""
    if int(l) != l or l < 2:
        raise ValueError(f"l must be an integer >= 2, got {l}")
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not (0.0 <= beta <= 1.0 / l):
        raise ValueError(f"beta must lie in [0, 1/l], got {beta}")
    l = int(l)
    mean = alpha * (l - 1) / (1.0 - beta)
    # E[min(N, l-1)] = sum_{k=1}^{l-1} P(N >= k)
    expect = math.fsum(float(pdtrc(k - 1, mean)) for k in range(1, l))
    return (1.0 - beta) / (l - 1) * expect
