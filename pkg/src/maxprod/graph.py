"""Factor graphs and the built-in chain/ring/grid model constructors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .factors import Factor, Variable, canonical_scope
from .semiring import Semiring


@dataclass
class FactorNode:
    """A factor attached to a graph, with its data-dependence bookkeeping.

    ``data_independent`` marks tables that do not depend on the observation
    (priors), which may therefore be sorted ahead of time; factors in the
    same ``homogeneity`` class share one table up to a positive rescaling and
    can share that sorting work.
    """

    index: int
    factor: Factor
    data_independent: bool = False
    homogeneity: str | None = None

    @property
    def scope(self):
        return self.factor.scope


class FactorGraph:
    """Variables with cardinalities, factors, and their adjacency."""

    def __init__(self):
        self.variables: dict[int, Variable] = {}
        self.factors: list[FactorNode] = []
        self.var_factors: dict[int, list[int]] = {}

    def add_variable(self, var: Variable) -> Variable:
        existing = self.variables.get(var.id)
        if existing is not None:
            if existing.cardinality != var.cardinality:
                raise ValueError(f"variable {var.id} redeclared with different cardinality")
            return existing
        self.variables[var.id] = var
        self.var_factors[var.id] = []
        return var

    def add_factor(
        self,
        factor: Factor,
        data_independent: bool = False,
        homogeneity: str | None = None,
    ) -> int:
        for v in factor.scope:
            if v.id not in self.variables:
                raise ValueError(f"factor scope uses undeclared variable {v.id}")
            if self.variables[v.id].cardinality != v.cardinality:
                raise ValueError(f"variable {v.id} cardinality mismatch")
        index = len(self.factors)
        self.factors.append(FactorNode(index, factor, data_independent, homogeneity))
        for v in factor.scope:
            self.var_factors[v.id].append(index)
        return index

    def neighbors(self, factor_index: int) -> tuple[Variable, ...]:
        return self.factors[factor_index].scope

    def factor_list(self) -> list[Factor]:
        return [fn.factor for fn in self.factors]

    @property
    def num_edges(self) -> int:
        return sum(len(fn.scope) for fn in self.factors)

    def is_connected(self) -> bool:
        if not self.variables:
            return True
        seen_v: set[int] = set()
        seen_f: set[int] = set()
        stack = [("v", next(iter(self.variables)))]
        while stack:
            kind, key = stack.pop()
            if kind == "v":
                if key in seen_v:
                    continue
                seen_v.add(key)
                stack.extend(("f", fi) for fi in self.var_factors[key])
            else:
                if key in seen_f:
                    continue
                seen_f.add(key)
                stack.extend(("v", v.id) for v in self.factors[key].scope)
        return len(seen_v) == len(self.variables)

    def is_tree(self) -> bool:
        nodes = len(self.variables) + len(self.factors)
        return self.is_connected() and self.num_edges == nodes - 1

    def validate(self) -> None:
        for fn in self.factors:
            canonical_scope(fn.scope)


TableGen = Callable[[int], np.ndarray]


def _as_unary_gen(unary, n: int) -> TableGen | None:
    if unary is None:
        return None
    if callable(unary):
        return unary
    arr = np.asarray(unary, dtype=np.float64)
    if arr.shape != (n,):
        raise ValueError(f"unary table must have shape ({n},)")
    return lambda _node: arr


def _pairwise_tables(pairwise, n: int, edges: Sequence[tuple[int, int]]):
    """One (table, shared) pair per edge; a single array means one shared prior."""
    if callable(pairwise):
        return [(np.asarray(pairwise(e), dtype=np.float64), False) for e in range(len(edges))]
    arr = np.asarray(pairwise, dtype=np.float64)
    if arr.shape != (n, n):
        raise ValueError(f"pairwise table must have shape ({n}, {n})")
    return [(arr, True) for _ in edges]


def _assemble(
    edges: Sequence[tuple[int, int]],
    num_nodes: int,
    n: int,
    unary,
    pairwise,
    semiring: Semiring | None = None,
) -> FactorGraph:
    g = FactorGraph()
    variables = [g.add_variable(Variable(i, n)) for i in range(num_nodes)]
    unary_gen = _as_unary_gen(unary, n)
    if unary_gen is not None:
        for i in range(num_nodes):
            g.add_factor(Factor((variables[i],), unary_gen(i), semiring=semiring))
    tables = _pairwise_tables(pairwise, n, edges)
    class_reps: list[np.ndarray] = []
    for (u, v), (table, shared) in zip(edges, tables):
        if u > v:  # canonical scope is id-sorted; flip the table to match
            u, v = v, u
            table = table.T
        key = None
        if shared:
            for ci, rep in enumerate(class_reps):
                if rep is table or np.array_equal(rep, table):
                    key = f"edge-class-{ci}"
                    break
            if key is None:
                class_reps.append(table)
                key = f"edge-class-{len(class_reps) - 1}"
        g.add_factor(
            Factor((variables[u], variables[v]), table, semiring=semiring),
            data_independent=True,
            homogeneity=key,
        )
    return g


def build_chain(q: int, n: int, unary, pairwise, semiring: Semiring | None = None) -> FactorGraph:
    """Chain of q nodes with q-1 pairwise edges."""
    if q < 2:
        raise ValueError("chain needs at least 2 nodes")
    edges = [(t, t + 1) for t in range(q - 1)]
    return _assemble(edges, q, n, unary, pairwise, semiring)


def build_ring(q: int, n: int, unary, pairwise, semiring: Semiring | None = None) -> FactorGraph:
    """Cycle of q nodes with q pairwise edges."""
    if q < 3:
        raise ValueError("ring needs at least 3 nodes")
    edges = [(t, t + 1) for t in range(q - 1)] + [(q - 1, 0)]
    return _assemble(edges, q, n, unary, pairwise, semiring)


def build_grid(rows: int, cols: int, n: int, unary, pairwise, semiring: Semiring | None = None) -> FactorGraph:
    """rows-by-cols 4-neighbor grid; node (r, c) has index r*cols + c."""
    if rows < 2 or cols < 2:
        raise ValueError("grid needs at least 2 rows and 2 columns")
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((r * cols + c, r * cols + c + 1))
            if r + 1 < rows:
                edges.append((r * cols + c, (r + 1) * cols + c))
    return _assemble(edges, rows * cols, n, unary, pairwise, semiring)


def build_topology(kind: str, dims: Sequence[int], n: int, unary, pairwise,
                   semiring: Semiring | None = None) -> FactorGraph:
    if kind == "chain":
        return build_chain(dims[0], n, unary, pairwise, semiring)
    if kind == "ring":
        return build_ring(dims[0], n, unary, pairwise, semiring)
    if kind == "grid":
        return build_grid(dims[0], dims[1], n, unary, pairwise, semiring)
    raise ValueError(f"unknown topology {kind!r}")
