"""Exact Fisher tests and randomized permutation tests for trial outcomes.

Fisher probabilities are computed with exact rational arithmetic, so tail
membership for the two-sided sum needs no floating-point fudge factor.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations
from typing import NamedTuple, Sequence

import numpy as np


class FisherResult(NamedTuple):
    one_sided: float
    two_sided: float


def _table_margins(table: Sequence[Sequence[int]]) -> tuple[int, int, int, int]:
    if len(table) != 2 or any(len(row) != 2 for row in table):
        raise ValueError("fisher_exact needs a 2x2 table")
    (a, b), (c, d) = table
    cells = (a, b, c, d)
    if any(int(x) != x or x < 0 for x in cells):
        raise ValueError("table counts must be non-negative integers")
    a, b, c, d = (int(x) for x in cells)
    if a + b + c + d == 0:
        raise ValueError("fisher_exact is undefined for an all-zero table")
    return a, b, c, d


def _hypergeom_point(x: int, row1: int, col1: int, n: int) -> Fraction:
    return Fraction(math.comb(col1, x) * math.comb(n - col1, row1 - x),
                    math.comb(n, row1))


def fisher_exact(table: Sequence[Sequence[int]]) -> FisherResult:
    """One- and two-sided exact test on a 2x2 table of (success, failure)
    rows.

    The one-sided p is the upper tail: the probability that the first row
    shows at least the observed number of first-column outcomes under the
    fixed margins.  The two-sided p sums every table whose point
    probability is at most the observed table's.
    """
    a, b, c, d = _table_margins(table)
    row1 = a + b
    col1 = a + c
    n = a + b + c + d
    lo = max(0, row1 - (n - col1))
    hi = min(row1, col1)
    observed = _hypergeom_point(a, row1, col1, n)
    upper = Fraction(0)
    two = Fraction(0)
    for x in range(lo, hi + 1):
        p = _hypergeom_point(x, row1, col1, n)
        if x >= a:
            upper += p
        if p <= observed:
            two += p
    return FisherResult(float(upper), float(min(two, Fraction(1))))


def fisher_point_probability(table: Sequence[Sequence[int]]) -> float:
    """Probability of exactly the observed table under the fixed margins."""
    a, b, c, d = _table_margins(table)
    return float(_hypergeom_point(a, a + b, a + c, a + b + c + d))


def fisher_lower_tail(table: Sequence[Sequence[int]]) -> float:
    """Lower-tail counterpart of fisher_exact's one-sided value."""
    a, b, c, d = _table_margins(table)
    row1, col1, n = a + b, a + c, a + b + c + d
    lo = max(0, row1 - (n - col1))
    total = Fraction(0)
    for x in range(lo, a + 1):
        total += _hypergeom_point(x, row1, col1, n)
    return float(total)


EXHAUSTIVE_LIMIT = 10_000


def permutation_test(sample_a: Sequence[float], sample_b: Sequence[float],
                     resamples: int = 1000,
                     rng: np.random.Generator | None = None) -> float:
    """Two-sided permutation test on the difference of means.

    Enumerates every assignment of the pooled values to the two group
    sizes when there are at most 10^4 of them; otherwise draws
    ``resamples`` random permutations.  p is the fraction of assignments
    whose absolute mean difference reaches the observed one.
    """
    a = [float(v) for v in sample_a]
    b = [float(v) for v in sample_b]
    if not a or not b:
        raise ValueError("both samples must be non-empty")
    pool = a + b
    n, na, nb = len(pool), len(a), len(b)
    total_sum = math.fsum(pool)
    # one shared expression for observed and permuted statistics, so the
    # identity assignment always ties with itself
    sum_a_obs = math.fsum(a)
    observed = abs(sum_a_obs / na - (total_sum - sum_a_obs) / nb)
    n_assignments = math.comb(n, na)
    if n_assignments <= EXHAUSTIVE_LIMIT:
        hits = 0
        for idx in combinations(range(n), na):
            sum_a = math.fsum(pool[i] for i in idx)
            diff = sum_a / na - (total_sum - sum_a) / nb
            if abs(diff) >= observed:
                hits += 1
        return hits / n_assignments
    if rng is None:
        rng = np.random.default_rng()
    if resamples < 1:
        raise ValueError("resamples must be positive")
    pool_arr = np.array(pool)
    hits = 0
    for _ in range(resamples):
        shuffled = rng.permutation(pool_arr)
        sum_a = math.fsum(shuffled[:na].tolist())
        diff = sum_a / na - (total_sum - sum_a) / nb
        if abs(diff) >= observed:
            hits += 1
    return hits / resamples
