"""Closed-form and enumeration oracles for the rank-walk step count.

The pair search stops at the width of the smallest expanding square (anchored
at the best ranks) that contains an index present in both lists' prefixes.
For a uniformly random permutation that width M has a factorial closed form;
for K lists the exact expectation is only available by enumerating all
(N!)^(K-1) rank correspondences, which these helpers do at tiny sizes so the
fast search can be tested against ground truth.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import permutations, product

from .factors import EnumerationCapError

DEFAULT_ENUMERATION_CAP = 10**7


def prob_exceed(n: int, m: int) -> float:
    """P(M > m): no joint entry inside the m-by-m best-ranks square.

    Equals (N-m)!^2 / ((N-2m)! N!), evaluated in log-gamma space so it stays
    finite for N up to about 10**6; zero whenever m exceeds floor(N/2).
    """
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    if m == 0:
        return 1.0
    if 2 * m > n:
        return 0.0
    log_p = (
        2.0 * math.lgamma(n - m + 1)
        - math.lgamma(n - 2 * m + 1)
        - math.lgamma(n + 1)
    )
    return math.exp(log_p)


def prob_exceed_exact(n: int, m: int) -> Fraction:
    """Exact rational P(M > m), for small n."""
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    if m == 0:
        return Fraction(1)
    if 2 * m > n:
        return Fraction(0)
    f = math.factorial
    return Fraction(f(n - m) * f(n - m), f(n - 2 * m) * f(n))


def expected_steps(n: int) -> float:
    """E(M) for two lists: sum of P(M > m) over m = 0..floor(N/2).

    Accumulated via the term ratio P(m+1)/P(m) = (N-2m)(N-2m-1)/(N-m)^2,
    which is exact at small sizes and avoids the one-ulp wobble of repeated
    log-gamma evaluations.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    total = 0.0
    p = 1.0
    for m in range(n // 2 + 1):
        total += p
        p *= (n - 2 * m) * (n - 2 * m - 1) / ((n - m) * (n - m))
    return total


def expected_steps_exact(n: int) -> Fraction:
    """Exact rational E(M), for small n."""
    if n < 1:
        raise ValueError("need n >= 1")
    return sum((prob_exceed_exact(n, m) for m in range(n // 2 + 1)), Fraction(0))


def enclosing_width(perms: tuple[tuple[int, ...], ...], n: int) -> int:
    """Smallest 1-based hypercube width covering some index's full rank tuple.

    ``perms[k][i]`` is the 0-based rank of index i in list k+1; rank in list 0
    is i itself.  An entry lies inside the width-m cube iff every coordinate
    is < m (0-based), so the width is min over i of max coordinate, plus one.
    """
    best = n
    for i in range(n):
        worst = i
        for p in perms:
            if p[i] > worst:
                worst = p[i]
        if worst < best:
            best = worst
            if best == 0:
                break
    return best + 1


def expected_steps_enumerate(
    n: int, k: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> Fraction:
    """Exact E(M) for K lists by enumerating all (N!)^(K-1) rank tuples."""
    if n < 1 or k < 2:
        raise ValueError("need n >= 1 and k >= 2")
    total_cases = math.factorial(n) ** (k - 1)
    if total_cases > cap:
        raise EnumerationCapError(
            f"(N!)^(K-1) = {total_cases} exceeds enumeration cap {cap}"
        )
    total = 0
    for perms in product(permutations(range(n)), repeat=k - 1):
        total += enclosing_width(perms, n)
    return Fraction(total, total_cases)


def step_bound(n: int, k: int = 2) -> float:
    """Upper bound N^((K-1)/K) on the expected number of rank-walk steps."""
    if n < 1 or k < 2:
        raise ValueError("need n >= 1 and k >= 2")
    return float(n) ** ((k - 1) / k)
