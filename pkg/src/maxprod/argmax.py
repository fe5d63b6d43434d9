"""Expected-sublinear argmax of combined values across sorted lists.

Given K equal-length lists and the permutations that sort each of them
best-first, the index maximizing the elementwise combination can be found by
walking the sorted orders in lockstep and stopping as soon as no unseen index
can beat the incumbent.  For independent order statistics the expected number
of ranks visited is O(N^((K-1)/K)); read-marking keeps the K-list variant
from ever evaluating more than N distinct indices.

The search never branches on value magnitudes, only on their order, so the
returned value is exactly the one brute force would compute (the same
combines are performed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .semiring import MAX_PRODUCT, Semiring

MODES = ("analysis", "symmetric", "early-stop")


class SortedPermutation:
    """Indices of a list from best to worst, with the inverse ranking.

    ``order[r]`` is the index holding rank ``r`` (0 = best); ``inverse`` maps
    an index back to its rank.  Ties are ranked by ascending index so every
    downstream computation is deterministic.
    """

    __slots__ = ("order", "inverse")

    def __init__(self, order: Sequence[int]):
        order = list(order)
        n = len(order)
        inverse = [-1] * n
        for rank, idx in enumerate(order):
            if not 0 <= idx < n or inverse[idx] >= 0:
                raise ValueError("order is not a permutation of 0..N-1")
            inverse[idx] = rank
        self.order = order
        self.inverse = inverse

    def __len__(self) -> int:
        return len(self.order)

    def sorts(self, values: Sequence[float], semiring: Semiring = MAX_PRODUCT) -> bool:
        """Whether values are best-first along ``order`` under the semiring."""
        if len(values) != len(self.order):
            return False
        for prev, cur in zip(self.order, self.order[1:]):
            if semiring.better(values[cur], values[prev]):
                return False
        return True


def sort_desc(values: Sequence[float]) -> SortedPermutation:
    """Stable descending sort; equal values keep ascending index order."""
    return sort_best(values, MAX_PRODUCT)


def sort_best(values: Sequence[float], semiring: Semiring = MAX_PRODUCT) -> SortedPermutation:
    """Permutation listing indices best-first under the semiring's order."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("need a non-empty 1-d value list")
    perm = SortedPermutation.__new__(SortedPermutation)
    order = np.argsort(semiring.sort_key(arr), kind="stable")
    perm.order = order.tolist()
    inverse = np.empty_like(order)
    inverse[order] = np.arange(arr.size)
    perm.inverse = inverse.tolist()
    return perm


class ReadScratch:
    """Reusable visited-index marks for the K-list search.

    An index counts as read in the current call iff ``marks[i]`` equals the
    call's epoch token; bumping the 64-bit epoch invalidates all marks in
    O(1), so one scratch serves any number of calls without reinitialization.
    """

    __slots__ = ("marks", "epoch")

    def __init__(self, n: int):
        self.marks = [0] * n
        self.epoch = 0

    def next_epoch(self, n: int) -> int:
        if n > len(self.marks):
            raise ValueError(f"scratch sized {len(self.marks)} is too small for N={n}")
        self.epoch += 1
        return self.epoch


@dataclass(frozen=True)
class ArgmaxOutcome:
    """Result of one fast argmax call.

    ``probes`` counts distinct indices whose values were combined into a
    candidate; ``steps`` is the final value of the rank counter (1-based), the
    quantity whose expectation the order-statistics formulas describe.
    """

    best: int
    value: float
    probes: int
    steps: int


@dataclass
class ProbeStats:
    """Accumulator for search effort across many argmax calls."""

    calls: int = 0
    steps: int = 0
    probes: int = 0
    per_call: list = field(default_factory=list, repr=False)

    def record(self, outcome: ArgmaxOutcome, keep: bool = False) -> None:
        self.calls += 1
        self.steps += outcome.steps
        self.probes += outcome.probes
        if keep:
            self.per_call.append((outcome.steps, outcome.probes))

    def mean_probes(self) -> float:
        return self.probes / self.calls if self.calls else 0.0

    def mean_steps(self) -> float:
        return self.steps / self.calls if self.calls else 0.0


def _as_list(values) -> list:
    if isinstance(values, list):
        return values
    if isinstance(values, np.ndarray):
        return values.tolist()
    return list(values)


def fast_argmax_pair(
    va,
    vb,
    pa: SortedPermutation,
    pb: SortedPermutation,
    mode: str = "analysis",
    semiring: Semiring = MAX_PRODUCT,
    validate: bool = True,
) -> ArgmaxOutcome:
    """Index maximizing combine(va[i], vb[i]) via the two sorted orders.

    ``analysis`` stops on the a-side bound only (the variant whose step count
    the closed-form expectation describes); ``symmetric`` stops on either
    bound; ``early-stop`` additionally gives up as soon as the best still
    conceivable combination cannot beat the incumbent, at the cost of one
    extra combine per step.  All modes return the exact maximum; ties are
    resolved toward the smallest index among the candidates evaluated.
    """
    va = _as_list(va)
    vb = _as_list(vb)
    if len(va) != len(vb):
        raise ValueError(f"list lengths differ: {len(va)} vs {len(vb)}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if validate:
        if len(pa) != len(va) or len(pb) != len(vb):
            raise ValueError("permutation length does not match list length")
        if not pa.sorts(va, semiring) or not pb.sorts(vb, semiring):
            raise ValueError("permutation does not sort its list")

    combine = semiring.combine
    better = semiring.better
    order_a, inv_a = pa.order, pa.inverse
    order_b, inv_b = pb.order, pb.inverse

    top_a = order_a[0]
    top_b = order_b[0]
    start = 0
    end_a = inv_a[top_b]
    end_b = inv_b[top_a]
    best = top_a
    best_val = combine(va[top_a], vb[top_a])
    seen = {top_a}
    if top_b != top_a:
        seen.add(top_b)
        val = combine(va[top_b], vb[top_b])
        if better(val, best_val) or (val == best_val and top_b < best):
            best, best_val = top_b, val

    symmetric = mode != "analysis"
    early = mode == "early-stop"
    while start < end_a and (not symmetric or start < end_b):
        start += 1
        if early:
            bound = combine(va[order_a[start]], vb[order_b[start]])
            if better(best_val, bound):
                break
        i = order_a[start]
        seen.add(i)
        val = combine(va[i], vb[i])
        if better(val, best_val) or (val == best_val and i < best):
            best, best_val = i, val
        if inv_b[i] < end_b:
            end_b = inv_b[i]
        j = order_b[start]
        seen.add(j)
        val = combine(va[j], vb[j])
        if better(val, best_val) or (val == best_val and j < best):
            best, best_val = j, val
        if inv_a[j] < end_a:
            end_a = inv_a[j]

    return ArgmaxOutcome(best=best, value=best_val, probes=len(seen), steps=start + 1)


def fast_argmax_k(
    vs: Sequence,
    ps: Sequence[SortedPermutation],
    scratch: ReadScratch,
    mode: str = "analysis",
    semiring: Semiring = MAX_PRODUCT,
    validate: bool = True,
) -> ArgmaxOutcome:
    """K-list generalization of :func:`fast_argmax_pair` with read-marking.

    Visited indices are marked in ``scratch`` so no index is evaluated twice;
    together with the rank bounds this makes the search never worse than
    scanning all N indices, while matching brute force exactly.
    """
    k = len(vs)
    if k < 2:
        raise ValueError("need at least two lists")
    if len(ps) != k:
        raise ValueError("need one sorting permutation per list")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    lists = [_as_list(v) for v in vs]
    n = len(lists[0])
    for v in lists[1:]:
        if len(v) != n:
            raise ValueError("all lists must have equal length")
    if validate:
        for v, p in zip(lists, ps):
            if len(p) != n:
                raise ValueError("permutation length does not match list length")
            if not p.sorts(v, semiring):
                raise ValueError("permutation does not sort its list")

    combine = semiring.combine
    better = semiring.better
    orders = [p.order for p in ps]
    invs = [p.inverse for p in ps]
    marks = scratch.marks
    token = scratch.next_epoch(n)

    def candidate(idx: int) -> float:
        val = lists[0][idx]
        for t in range(1, k):
            val = combine(val, lists[t][idx])
        return val

    # Stop once some evaluated index has rank <= start in *every* list: any
    # index not yet visited then ranks strictly worse everywhere, so the
    # witness dominates it.  The first rank where that happens is exactly the
    # smallest enclosing-hypercube width of the rank correspondence, i.e. the
    # quantity whose expectation the order-statistics module computes.
    start = 0
    best = -1
    best_val = semiring.worst
    probes = 0
    witness = n - 1
    for order in orders:
        idx = order[0]
        if marks[idx] != token:
            marks[idx] = token
            probes += 1
            val = candidate(idx)
            if best < 0 or better(val, best_val) or (val == best_val and idx < best):
                best, best_val = idx, val
        worst_rank = max(inv[idx] for inv in invs)
        if worst_rank < witness:
            witness = worst_rank

    early = mode == "early-stop"
    while start < witness:
        start += 1
        if early:
            bound = lists[0][orders[0][start]]
            for t in range(1, k):
                bound = combine(bound, lists[t][orders[t][start]])
            if better(best_val, bound):
                break
        for order in orders:
            idx = order[start]
            if marks[idx] != token:
                marks[idx] = token
                probes += 1
                val = candidate(idx)
                if better(val, best_val) or (val == best_val and idx < best):
                    best, best_val = idx, val
            worst_rank = max(inv[idx] for inv in invs)
            if worst_rank < witness:
                witness = worst_rank

    return ArgmaxOutcome(best=best, value=best_val, probes=probes, steps=start + 1)
