"""Discrete variables, dense factors, and brute-force max-marginalization.

Factors are dense tables over an id-sorted scope, stored row-major with the
last scope variable varying fastest.  State indices are 0-based.  Everything
here is pure and immutable, and the brute-force routines are the oracles the
fast paths are tested against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .semiring import MAX_PRODUCT, Semiring

DEFAULT_ENUMERATION_CAP = 10**7
# Chunk size (cells) for blockwise joint enumeration, keeps memory bounded.
_BLOCK_CELLS = 1_000_000


class EnumerationCapError(RuntimeError):
    """Raised when an exact enumeration would exceed its configured cap."""


@dataclass(frozen=True)
class Variable:
    """A discrete variable with ``cardinality`` states, identified by id."""

    id: int
    cardinality: int

    def __post_init__(self):
        if self.cardinality < 1:
            raise ValueError(f"variable {self.id}: cardinality must be >= 1")

    def __repr__(self) -> str:
        return f"x{self.id}[{self.cardinality}]"


@dataclass(frozen=True)
class Assignment:
    """One state index per scope variable (0-based)."""

    scope: tuple[Variable, ...]
    states: tuple[int, ...]

    def __post_init__(self):
        if len(self.scope) != len(self.states):
            raise ValueError("assignment states must cover exactly the scope")
        for var, state in zip(self.scope, self.states):
            if not 0 <= state < var.cardinality:
                raise ValueError(f"state {state} out of range for {var}")

    def restrict_to(self, variables: Iterable[Variable]) -> "Assignment":
        wanted = sorted(variables, key=lambda v: v.id)
        index = {v.id: s for v, s in zip(self.scope, self.states)}
        return Assignment(tuple(wanted), tuple(index[v.id] for v in wanted))


def canonical_scope(variables: Iterable[Variable]) -> tuple[Variable, ...]:
    scope = tuple(sorted(variables, key=lambda v: v.id))
    ids = [v.id for v in scope]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate variable ids in scope: {ids}")
    return scope


def flatten(assignment: Assignment, scope: Sequence[Variable]) -> int:
    """Row-major flat index of ``assignment`` within ``scope`` (last fastest)."""
    scope = tuple(scope)
    if canonical_scope(assignment.scope) != canonical_scope(scope):
        raise ValueError("assignment must cover exactly the scope")
    by_id = {v.id: s for v, s in zip(assignment.scope, assignment.states)}
    idx = 0
    for var in scope:
        state = by_id[var.id]
        if not 0 <= state < var.cardinality:
            raise ValueError(f"state {state} out of range for {var}")
        idx = idx * var.cardinality + state
    return idx


def unflatten(index: int, scope: Sequence[Variable]) -> Assignment:
    """Inverse of :func:`flatten`."""
    scope = tuple(scope)
    states = [0] * len(scope)
    rem = index
    for pos in range(len(scope) - 1, -1, -1):
        rem, states[pos] = divmod(rem, scope[pos].cardinality)
    if rem:
        raise ValueError(f"flat index {index} out of range for scope {scope}")
    return Assignment(scope, tuple(states))


class Factor:
    """Dense potential table over an id-sorted scope."""

    __slots__ = ("scope", "values")

    def __init__(self, scope: Iterable[Variable], values, *, semiring: Semiring | None = None):
        scope = canonical_scope(scope)
        values = np.array(values, dtype=np.float64)  # private copy; factors are immutable
        shape = tuple(v.cardinality for v in scope)
        if values.size != int(np.prod(shape, dtype=np.int64)):
            raise ValueError(f"value count {values.size} != scope cells {shape}")
        self.scope = scope
        self.values = values.reshape(shape)
        self.values.setflags(write=False)
        if semiring is not None:
            semiring.validate_values(self.values)

    @property
    def variables(self) -> frozenset[Variable]:
        return frozenset(self.scope)

    def cards(self) -> tuple[int, ...]:
        return tuple(v.cardinality for v in self.scope)

    def value_at(self, assignment: Assignment) -> float:
        sub = assignment.restrict_to(self.scope)
        return float(self.values[sub.states])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Factor)
            and self.scope == other.scope
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):  # pragma: no cover - factors are not meant to be hashed
        raise TypeError("Factor is unhashable")

    def __repr__(self) -> str:
        return f"Factor({list(self.scope)}, shape={self.values.shape})"


def uniform_factor(scope: Iterable[Variable], semiring: Semiring) -> Factor:
    scope = canonical_scope(scope)
    shape = tuple(v.cardinality for v in scope)
    return Factor(scope, np.full(shape, semiring.identity))


def factor_restrict(f: Factor, partial: Assignment) -> Factor:
    """Slice ``f`` at the states of ``partial``; scope drops those variables."""
    have = {v.id for v in f.scope}
    for v in partial.scope:
        if v.id not in have:
            raise ValueError(f"{v} not in factor scope {f.scope}")
    states = {v.id: s for v, s in zip(partial.scope, partial.states)}
    key = tuple(states.get(v.id, slice(None)) for v in f.scope)
    rest = tuple(v for v in f.scope if v.id not in states)
    return Factor(rest, f.values[key])


def _aligned(f: Factor, scope: tuple[Variable, ...]) -> np.ndarray:
    """View of f.values broadcastable against a table over ``scope``."""
    pos = {v.id: i for i, v in enumerate(scope)}
    shape = [1] * len(scope)
    for v in f.scope:
        shape[pos[v.id]] = v.cardinality
    # f.scope and scope are both id-sorted, so axis order is already right.
    return f.values.reshape(shape)


def _union_scope(factors: Sequence[Factor], extra: Iterable[Variable] = ()) -> tuple[Variable, ...]:
    by_id: dict[int, Variable] = {}
    for f in factors:
        for v in f.scope:
            if v.id in by_id and by_id[v.id].cardinality != v.cardinality:
                raise ValueError(f"cardinality mismatch for shared variable {v.id}")
            by_id[v.id] = v
    for v in extra:
        if v.id in by_id and by_id[v.id].cardinality != v.cardinality:
            raise ValueError(f"cardinality mismatch for shared variable {v.id}")
        by_id[v.id] = v
    return canonical_scope(by_id.values())


def factor_combine(f: Factor, g: Factor, s: Semiring = MAX_PRODUCT) -> Factor:
    """Combine two factors over the union of their scopes."""
    scope = _union_scope([f, g])
    return Factor(scope, s.combine_arrays(_aligned(f, scope), _aligned(g, scope)))


def combine_all(factors: Sequence[Factor], s: Semiring, scope: Iterable[Variable] = ()) -> Factor:
    """Left-to-right combine of ``factors``, broadcast over a common scope."""
    if not factors and not tuple(scope):
        raise ValueError("need at least one factor")
    full = _union_scope(factors, scope)
    shape = tuple(v.cardinality for v in full)
    table = np.broadcast_to(_aligned(factors[0], full), shape).copy() if factors else None
    if table is None:
        table = np.full(shape, s.identity)
    for f in factors[1:]:
        table = s.combine_arrays(table, _aligned(f, full))
    return Factor(full, np.broadcast_to(table, shape))


def max_marginal_brute(
    factors: Sequence[Factor],
    X: Iterable[Variable],
    M: Iterable[Variable],
    s: Semiring = MAX_PRODUCT,
) -> Factor:
    """Best joint value per assignment of M, by full enumeration over X.

    Runs in time (and memory, blockwise) proportional to the full domain of
    ``X``; this is the exactness oracle for every fast marginalization path.
    """
    if not factors:
        raise ValueError("need at least one factor")
    X = canonical_scope(X)
    M = canonical_scope(M)
    x_ids = {v.id for v in X}
    if not {v.id for v in M} <= x_ids:
        raise ValueError("M must be a subset of X")
    for f in factors:
        if not {v.id for v in f.scope} <= x_ids:
            raise ValueError(f"factor scope {f.scope} not within X")
    joint = combine_all(list(factors), s, scope=X)
    drop = tuple(i for i, v in enumerate(joint.scope) if v.id not in {m.id for m in M})
    values = joint.values if not drop else s.reduce_best(joint.values, axis=drop)
    return Factor(M, values)


def map_assignment_brute(
    factors: Sequence[Factor],
    s: Semiring = MAX_PRODUCT,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> tuple[Assignment, float]:
    """Globally best assignment by enumeration; ties go to the smallest flat index."""
    if not factors:
        raise ValueError("need at least one factor")
    scope = _union_scope(factors)
    cells = 1
    for v in scope:
        cells *= v.cardinality
    if cells > cap:
        raise EnumerationCapError(f"joint state space {cells} exceeds enumeration cap {cap}")
    if cells <= _BLOCK_CELLS or len(scope) <= 1:
        joint = combine_all(list(factors), s, scope=scope)
        flat = s.argbest_flat(joint.values)
        return unflatten(flat, scope), float(np.ravel(joint.values)[flat])

    # Blockwise: enumerate leading variables, combine the remaining slice.
    lead = []
    block = cells
    for v in scope:
        if block <= _BLOCK_CELLS:
            break
        lead.append(v)
        block //= v.cardinality
    best_val = s.worst
    best_assign = None
    lead_scope = tuple(lead)
    lead_cells = 1
    for v in lead_scope:
        lead_cells *= v.cardinality
    for lead_flat in range(lead_cells):
        partial = unflatten(lead_flat, lead_scope)
        sliced = []
        for f in factors:
            overlap = [v for v in partial.scope if v in f.scope]
            sliced.append(factor_restrict(f, partial.restrict_to(overlap)) if overlap else f)
        joint = combine_all(sliced, s, scope=[v for v in scope if v not in lead_scope])
        flat = s.argbest_flat(joint.values)
        val = float(np.ravel(joint.values)[flat])
        if s.better(val, best_val):
            best_val = val
            tail = unflatten(flat, joint.scope)
            best_assign = Assignment(scope, partial.states + tail.states)
    return best_assign, best_val
