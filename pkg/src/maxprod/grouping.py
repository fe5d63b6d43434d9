"""Group decompositions for max-marginalizing factorized cliques.

A clique's factors are split into groups X, Y, Z, ... with the query
variables inside X.  Each group is marginalized down to its interface, the
non-X interfaces are sorted once per conditioning assignment, and the
eliminated interface variables are resolved by the fast multi-list argmax.
A symbolic cost model (powers of the per-variable state count N) scores
candidate splits so the cheapest feasible one can be picked by search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .argmax import ProbeStats, ReadScratch, fast_argmax_k, fast_argmax_pair
from .clique import MIN_FAST_STATES, sort_rows
from .factors import (
    Factor,
    Variable,
    canonical_scope,
    combine_all,
    max_marginal_brute,
)
from .semiring import MAX_PRODUCT, Semiring

MAX_EXHAUSTIVE_ASSIGNMENTS = 2_000_000
MAX_RECURSION_DEPTH = 8


@dataclass(frozen=True)
class CostTerm:
    """One cost contribution of the form coeff * N^exponent * (log N)^log_power."""

    label: str
    exponent: float
    log_power: int = 0
    coeff: float = 1.0

    def evaluate(self, n: float) -> float:
        return self.coeff * n**self.exponent * (math.log(max(n, 2.0)) ** self.log_power)


@dataclass(frozen=True)
class CostEstimate:
    """Sum of cost terms; groupings are compared by dominant exponent first."""

    terms: tuple[CostTerm, ...]

    @property
    def dominant(self) -> CostTerm:
        return max(self.terms, key=lambda t: (t.exponent, t.log_power, t.coeff))

    @property
    def dominant_exponent(self) -> float:
        return self.dominant.exponent

    def sort_key(self):
        dom = self.dominant
        at_dom = sum(
            t.coeff
            for t in self.terms
            if t.exponent == dom.exponent and t.log_power == dom.log_power
        )
        return (dom.exponent, dom.log_power, at_dom, sum(t.coeff for t in self.terms))

    def evaluate(self, n: float) -> float:
        return sum(t.evaluate(n) for t in self.terms)


@dataclass(frozen=True)
class Grouping:
    """A partition of a clique's factors into groups (group 0 holds the query).

    ``interfaces[g]`` is the set of group-g variables shared with any other
    group (plus the query variables for group 0); ``eliminated`` is the union
    of non-X interface variables outside X', resolved by the fast argmax.
    """

    groups: tuple[tuple[int, ...], ...]
    group_vars: tuple[frozenset[Variable], ...]
    interfaces: tuple[frozenset[Variable], ...]
    eliminated: frozenset[Variable]
    target: frozenset[Variable]
    cost: CostEstimate
    requested_groups: int
    note: str = ""

    @property
    def active_groups(self) -> int:
        return sum(1 for g in self.groups if g)


def _group_interfaces(group_vars: Sequence[frozenset[Variable]], target: frozenset[Variable]):
    """X' and the other groups' interfaces for a concrete variable layout."""
    interfaces = []
    for g, vars_g in enumerate(group_vars):
        others: set[Variable] = set()
        for h, vars_h in enumerate(group_vars):
            if h != g:
                others |= vars_h
        shared = frozenset(vars_g & others)
        interfaces.append(frozenset(shared | target) if g == 0 else shared)
    x_prime = interfaces[0]
    eliminated = frozenset().union(*(i - x_prime for i in interfaces[1:])) if len(interfaces) > 1 else frozenset()
    return tuple(interfaces), eliminated


def estimate_cost(
    group_vars: Sequence[frozenset[Variable]],
    target: frozenset[Variable],
) -> CostEstimate:
    """Per-stage costs of the grouped marginalization for one split."""
    interfaces, eliminated = _group_interfaces(group_vars, target)
    x_prime = interfaces[0]
    n_elim = len(eliminated)
    k_lists = sum(1 for g, vars_g in enumerate(group_vars) if g and vars_g)
    terms = [CostTerm("marginalize-X", float(len(group_vars[0] | target)))]
    for g in range(1, len(group_vars)):
        if not group_vars[g]:
            continue
        terms.append(CostTerm(f"marginalize-G{g}", float(len(group_vars[g]))))
        width = len(interfaces[g] & x_prime) + n_elim
        if n_elim:
            terms.append(CostTerm(f"sort-G{g}", float(width), 1, float(max(n_elim, 1))))
    if n_elim and k_lists:
        search_exp = len(x_prime) + n_elim * (k_lists - 1) / max(k_lists, 1)
        terms.append(CostTerm("search", float(search_exp)))
    terms.append(CostTerm("marginalize-out", float(len(x_prime))))
    return CostEstimate(tuple(terms))


def _build_grouping(
    factors: Sequence[Factor],
    assignment: Sequence[int],
    n_groups: int,
    target: frozenset[Variable],
    requested: int,
    note: str = "",
) -> Grouping | None:
    group_idx: list[list[int]] = [[] for _ in range(n_groups)]
    group_vars: list[set[Variable]] = [set() for _ in range(n_groups)]
    for fi, g in enumerate(assignment):
        group_idx[g].append(fi)
        group_vars[g] |= set(factors[fi].scope)
    if not group_idx[0] or not target <= group_vars[0]:
        return None
    frozen_vars = tuple(frozenset(v) for v in group_vars)
    interfaces, eliminated = _group_interfaces(frozen_vars, target)
    cost = estimate_cost(frozen_vars, target)
    return Grouping(
        groups=tuple(tuple(g) for g in group_idx),
        group_vars=frozen_vars,
        interfaces=interfaces,
        eliminated=eliminated,
        target=target,
        cost=cost,
        requested_groups=requested,
        note=note,
    )


def _canonical_assignments(n_factors: int, n_groups: int):
    """Factor-to-group labels; non-X labels appear in first-use order."""
    assignment = [0] * n_factors

    def rec(t: int, used: int):
        if t == n_factors:
            yield tuple(assignment)
            return
        limit = min(used + 1, n_groups - 1)
        for g in range(limit + 1):
            assignment[t] = g
            yield from rec(t + 1, max(used, g))

    yield from rec(0, 0)


def _partition_assignments(factors, variables, target, n_groups):
    """Splits induced by balanced variable partitions; factor g avoids part g.

    Any factor of arity < n_groups misses at least one part, so a complete
    assignment always exists.  Query variables are kept out of part 0 so the
    X group can host the target.
    """
    others = sorted((v for v in variables if v not in target), key=lambda v: v.id)
    seeds = []
    for rot in range(n_groups):
        parts: list[set[Variable]] = [set() for _ in range(n_groups)]
        for pos, v in enumerate(others):
            parts[(pos + rot) % n_groups].add(v)
        for pos, v in enumerate(sorted(target, key=lambda v: v.id)):
            parts[1 + pos % (n_groups - 1)].add(v)
        seeds.append(parts)
    for parts in seeds:
        assignment = []
        ok = True
        for f in factors:
            scope = set(f.scope)
            for g in range(n_groups):
                if not scope & parts[g]:
                    assignment.append(g)
                    break
            else:
                ok = False
                break
        if ok:
            yield tuple(assignment)


def split_groups(
    factors: Sequence[Factor],
    M: Iterable[Variable],
    K: int = 2,
) -> Grouping:
    """Cheapest split of ``factors`` into K+1 groups with the query in group 0.

    Searches all canonical assignments when that is tractable, otherwise falls
    back to balanced variable partitions; the trivial everything-in-X split is
    always a candidate, so the estimate never exceeds brute force.  A grouping
    that leaves only one active group is returned with a diagnostic note.
    """
    factors = list(factors)
    if not factors:
        raise ValueError("need at least one factor")
    if K < 2:
        raise ValueError("need K >= 2 (at least three groups)")
    target = frozenset(canonical_scope(M))
    variables = canonical_scope({v for f in factors for v in f.scope} | set(target))
    covered = {v for f in factors for v in f.scope}
    if not target <= covered:
        raise ValueError("query variables must appear in some factor")
    n_groups = K + 1
    requested = n_groups

    best: Grouping | None = None
    n_assignments = n_groups ** len(factors)
    if n_assignments <= MAX_EXHAUSTIVE_ASSIGNMENTS:
        candidates = _canonical_assignments(len(factors), n_groups)
    else:
        candidates = list(_partition_assignments(factors, variables, target, n_groups))
        candidates.append(tuple([0] * len(factors)))
    for assignment in candidates:
        grouping = _build_grouping(factors, assignment, n_groups, target, requested)
        if grouping is None:
            continue
        if best is None or grouping.cost.sort_key() < best.cost.sort_key():
            best = grouping
    if best is None:
        raise ValueError("no feasible grouping: no group can host the query variables")
    if best.active_groups < n_groups:
        note = (
            f"only {best.active_groups} of the requested {n_groups} groups are useful"
            if best.active_groups > 1
            else "no beneficial decomposition: best split keeps every factor in one group"
        )
        best = Grouping(
            best.groups, best.group_vars, best.interfaces, best.eliminated,
            best.target, best.cost, requested, note,
        )
    return best


def _restriction_index(x_scope, x_shape, cond_scope):
    """Flat row index into dom(cond) for every flat assignment of dom(x_scope)."""
    cells = int(np.prod(x_shape, dtype=np.int64)) if x_shape else 1
    if not cond_scope:
        return np.zeros(cells, dtype=np.int64)
    digits = np.unravel_index(np.arange(cells), x_shape) if x_shape else ()
    pos = {v.id: i for i, v in enumerate(x_scope)}
    idx = np.zeros(cells, dtype=np.int64)
    for v in cond_scope:
        idx = idx * v.cardinality + digits[pos[v.id]]
    return idx


def max_marginal_grouped(
    factors: Sequence[Factor],
    M: Iterable[Variable],
    grouping: Grouping | None = None,
    s: Semiring = MAX_PRODUCT,
    recurse: bool = True,
    mode: str = "early-stop",
    min_fast_n: int = MIN_FAST_STATES,
    stats: ProbeStats | None = None,
    _depth: int = MAX_RECURSION_DEPTH,
) -> Factor:
    """Max-marginal of the combined factors onto M via a group decomposition.

    Produces exactly the brute-force answer.  Group-internal marginalizations
    recurse into sub-groupings when the estimated exponent strictly drops and
    the depth budget allows; otherwise they run brute force.
    """
    factors = list(factors)
    M = canonical_scope(M)
    all_vars = canonical_scope({v for f in factors for v in f.scope} | set(M))
    if grouping is None:
        grouping = split_groups(factors, M, K=2)
    n_factors = sum(len(g) for g in grouping.groups)
    if n_factors != len(factors) or sorted(i for g in grouping.groups for i in g) != list(range(len(factors))):
        raise ValueError("grouping does not partition the factor list")

    max_card = max((v.cardinality for v in all_vars), default=1)
    if max_card < min_fast_n or grouping.active_groups == 1:
        return max_marginal_brute(factors, all_vars, M, s)

    x_prime = canonical_scope(grouping.interfaces[0])
    eliminated = canonical_scope(grouping.eliminated)

    def marginalize_group(g: int, onto) -> Factor:
        sub = [factors[i] for i in grouping.groups[g]]
        onto = canonical_scope(onto)
        sub_vars = canonical_scope({v for f in sub for v in f.scope} | set(onto))
        inner = set(sub_vars) - set(onto)
        if recurse and _depth > 0 and inner and len(sub) >= 2:
            try:
                sub_grouping = split_groups(sub, onto, K=2)
            except ValueError:
                sub_grouping = None
            if (
                sub_grouping is not None
                and sub_grouping.active_groups > 1
                and sub_grouping.cost.dominant_exponent < len(sub_vars)
            ):
                return max_marginal_grouped(
                    sub, onto, sub_grouping, s, recurse, mode, min_fast_n, stats,
                    _depth=_depth - 1,
                )
        return max_marginal_brute(sub, sub_vars, onto, s)

    psi_x = marginalize_group(0, x_prime)
    psi_x_flat = psi_x.values.ravel()

    active = [g for g in range(1, len(grouping.groups)) if grouping.groups[g]]
    x_shape = tuple(v.cardinality for v in x_prime)
    cells = int(np.prod(x_shape, dtype=np.int64)) if x_shape else 1

    if not eliminated:
        parts = [psi_x] + [marginalize_group(g, grouping.interfaces[g]) for g in active]
        joint = combine_all(parts, s, scope=x_prime)
        return max_marginal_brute([joint], x_prime, M, s)

    views = []
    row_maps = []
    for g in active:
        psi = marginalize_group(g, grouping.interfaces[g])
        cond = canonical_scope(set(psi.scope) & set(x_prime))
        # broadcast over the full eliminated set so every list shares one index space
        wide = combine_all([psi], s, scope=set(psi.scope) | set(eliminated))
        views.append(sort_rows(wide, cond, s))
        row_maps.append(_restriction_index(x_prime, x_shape, cond))

    k_lists = len(views)
    scratch = ReadScratch(int(np.prod([v.cardinality for v in eliminated], dtype=np.int64)))
    out = np.empty(cells)
    combine = s.combine
    for n in range(cells):
        rows = [views[t].rows[row_maps[t][n]] for t in range(k_lists)]
        vals = [views[t].row_values[row_maps[t][n]] for t in range(k_lists)]
        if k_lists == 1:
            top = rows[0].order[0]
            value = vals[0][top]
        elif k_lists == 2:
            res = fast_argmax_pair(vals[0], vals[1], rows[0], rows[1], mode, s, validate=False)
            value = res.value
            if stats is not None:
                stats.record(res)
        else:
            res = fast_argmax_k(vals, rows, scratch, mode, s, validate=False)
            value = res.value
            if stats is not None:
                stats.record(res)
        out[n] = combine(psi_x_flat[n], value)

    table = Factor(x_prime, out.reshape(x_shape) if x_shape else out.reshape(()))
    return max_marginal_brute([table], x_prime, M, s)
