"""Distribution of the supremum of the absolute standard Brownian bridge."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class SeriesPolicy:
    max_terms: int = 200
    term_tolerance: float = 1e-14

    def __post_init__(self):
        if self.max_terms < 10:
            raise ValueError("max_terms must be at least 10")
        if not self.term_tolerance > 0:
            raise ValueError("term_tolerance must be positive")


DEFAULT_POLICY = SeriesPolicy()
SATURATION = 1e-12


def cdf_sup_bridge(b: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """P(sup |B0| <= b) from the theta-function series in 1/b^2.

    sqrt(2 pi)/b * sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 b^2)); converges fastest
    for small and moderate b.
    """
    if b <= 0:
        return 0.0
    a = math.pi**2 / (8.0 * b * b)
    scale = math.sqrt(2.0 * math.pi) / b
    terms = []
    for k in range(1, policy.max_terms + 1):
        term = scale * math.exp(-((2 * k - 1) ** 2) * a)
        terms.append(term)
        if term < policy.term_tolerance:
            break
    total = math.fsum(reversed(terms))
    # rounding in the terms is ~1e-16 each; closer to 1 than this the
    # series cannot resolve the tail and would wobble
    if total > 1.0 - SATURATION:
        return 1.0
    return max(0.0, total)


def oracle_cdf_kolmogorov(b: float) -> float:
    """Kolmogorov's alternating series 1 - 2 sum (-1)^(k-1) exp(-2 k^2 b^2)."""
    if b <= 0:
        return 0.0
    total = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * b * b)
        total += term if k % 2 else -term
        if term < 1e-15:
            break
        k += 1
    return min(1.0, max(0.0, 1.0 - 2.0 * total))


def quantile_sup_bridge(alpha: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Upper ``alpha`` quantile: the b with P(sup |B0| <= b) = 1 - alpha."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    target = 1.0 - alpha
    lo, hi = 1e-4, 20.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if cdf_sup_bridge(mid, policy) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pvalue_sup_bridge(statistic: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    return min(1.0, max(0.0, 1.0 - cdf_sup_bridge(statistic, policy)))
