"""Fast max-marginalization of cliques that factor into pairwise terms.

Eliminating a shared variable from a product of two pairwise factors is an
argmax over two lists per output cell.  Sorting each factor's rows once makes
every such cell solvable in expected O(sqrt(N)) instead of Theta(N), turning
the Theta(N^3) three-clique marginalization into O(N^2 log N + N^2 sqrt(N)).
The same machinery gives max-product ("funny") matrix multiplication.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .argmax import ProbeStats, SortedPermutation, fast_argmax_pair, sort_best
from .factors import Factor, Variable, canonical_scope, factor_combine, max_marginal_brute
from .semiring import MAX_PRODUCT, Semiring

# Below this many states the sorting overhead dominates and brute force wins.
MIN_FAST_STATES = 8


class SortedFactorView:
    """Per-conditioning-assignment best-first permutations of a factor.

    For every assignment of the conditioning variables, the slice over the
    remaining (free) variables is flattened row-major and sorted best-first
    under the semiring's order.  ``rows[r]`` and ``row_values[r]`` are the
    permutation and the raw slice for the r-th conditioning assignment.
    """

    __slots__ = ("base", "conditioning", "free", "rows", "row_values", "semiring")

    def __init__(self, base, conditioning, free, rows, row_values, semiring):
        self.base = base
        self.conditioning = conditioning
        self.free = free
        self.rows = rows
        self.row_values = row_values
        self.semiring = semiring

    def __len__(self) -> int:
        return len(self.rows)


def sort_rows(
    f: Factor,
    conditioning: Iterable[Variable],
    semiring: Semiring = MAX_PRODUCT,
) -> SortedFactorView:
    """Sort every conditioned slice of ``f`` over its free variables."""
    conditioning = canonical_scope(conditioning)
    cond_ids = {v.id for v in conditioning}
    scope_ids = {v.id for v in f.scope}
    if not cond_ids <= scope_ids:
        raise ValueError("conditioning variables must lie in the factor scope")
    free = tuple(v for v in f.scope if v.id not in cond_ids)
    if not free:
        raise ValueError("conditioning on the full scope leaves nothing to sort")

    axes = [f.scope.index(v) for v in conditioning] + [f.scope.index(v) for v in free]
    n_rows = int(np.prod([v.cardinality for v in conditioning], dtype=np.int64)) if conditioning else 1
    width = int(np.prod([v.cardinality for v in free], dtype=np.int64))
    table = np.transpose(f.values, axes).reshape(n_rows, width)

    orders = np.argsort(semiring.sort_key(table), axis=1, kind="stable")
    inverses = np.empty_like(orders)
    np.put_along_axis(inverses, orders, np.arange(width)[None, :], axis=1)

    rows = []
    for r in range(n_rows):
        perm = SortedPermutation.__new__(SortedPermutation)
        perm.order = orders[r].tolist()
        perm.inverse = inverses[r].tolist()
        rows.append(perm)
    row_values = [table[r].tolist() for r in range(n_rows)]
    return SortedFactorView(f, conditioning, free, rows, row_values, semiring)


def _triangle_roles(f_ij: Factor, f_ik: Factor, f_jk: Factor):
    """Recover (i, j, k) from the three pairwise scopes; k is eliminated."""
    for f in (f_ij, f_ik, f_jk):
        if len(f.scope) != 2:
            raise ValueError(f"expected pairwise factors, got scope {f.scope}")
    kept = set(f_ij.scope)
    shared = set(f_ik.scope) & set(f_jk.scope)
    elim = shared - kept
    if len(elim) != 1:
        raise ValueError("second and third factors must share exactly one eliminated variable")
    k = elim.pop()
    i = (set(f_ik.scope) - {k}).pop()
    j = (set(f_jk.scope) - {k}).pop()
    if {i, j} != kept or i == j:
        raise ValueError("factor scopes do not form a triangle over (i, j, k)")
    return i, j, k


def max_marginal_3clique(
    f_ij: Factor | None,
    f_ik: Factor,
    f_jk: Factor,
    s: Semiring = MAX_PRODUCT,
    mode: str = "early-stop",
    min_fast_n: int = MIN_FAST_STATES,
    stats: ProbeStats | None = None,
) -> Factor:
    """Eliminate the shared variable from a pairwise triangle.

    Returns the table over (i, j) whose cells are the best achievable value
    of the combined factors over the eliminated variable.  Agrees with
    :func:`max_marginal_brute` on the same inputs; ``f_ij`` may be None when
    the kept pair carries no factor of its own.
    """
    if f_ij is None:
        kept = (set(f_ik.scope) ^ set(f_jk.scope))
        if len(kept) != 2:
            raise ValueError("cannot infer kept pair from the factor scopes")
        from .factors import uniform_factor

        f_ij = uniform_factor(kept, s)
    i, j, k = _triangle_roles(f_ij, f_ik, f_jk)

    if k.cardinality < min_fast_n:
        return max_marginal_brute([f_ij, f_ik, f_jk], (i, j, k), (i, j), s)

    view_a = sort_rows(f_ik, (i,), s)
    view_b = sort_rows(f_jk, (j,), s)
    out = np.empty((i.cardinality, j.cardinality))
    # f_ij's scope is id-sorted; index it as [i-state, j-state]
    ij_table = f_ij.values if f_ij.scope[0].id == i.id else f_ij.values.T
    combine = s.combine
    for a in range(i.cardinality):
        va = view_a.row_values[a]
        pa = view_a.rows[a]
        row_out = out[a]
        for b in range(j.cardinality):
            res = fast_argmax_pair(
                va, view_b.row_values[b], pa, view_b.rows[b], mode, s, validate=False
            )
            row_out[b] = combine(ij_table[a, b], res.value)
            if stats is not None:
                stats.record(res)
    scope = canonical_scope((i, j))
    return Factor(scope, out if scope == (i, j) else out.T)


def funny_matmul(
    a: np.ndarray,
    b: np.ndarray,
    s: Semiring = MAX_PRODUCT,
    mode: str = "early-stop",
    stats: ProbeStats | None = None,
) -> np.ndarray:
    """Matrix product with summation replaced by best-selection.

    C[i][j] = best over k of combine(A[i][k], B[k][j]), computed by sorting
    the rows of A and the columns of B once and running the fast pair argmax
    for each of the N^2 output cells.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError(f"need equal square matrices, got {a.shape} and {b.shape}")
    n = a.shape[0]
    rows = [a[r].tolist() for r in range(n)]
    cols = [b[:, c].tolist() for c in range(n)]
    row_perms = [sort_best(r, s) for r in rows]
    col_perms = [sort_best(c, s) for c in cols]
    out = np.empty_like(a)
    for r in range(n):
        va, pa = rows[r], row_perms[r]
        for c in range(n):
            res = fast_argmax_pair(va, cols[c], pa, col_perms[c], mode, s, validate=False)
            out[r, c] = res.value
            if stats is not None:
                stats.record(res)
    return out


def funny_matmul_naive(a: np.ndarray, b: np.ndarray, s: Semiring = MAX_PRODUCT) -> np.ndarray:
    """Reference triple-loop product (vectorized); the oracle for funny_matmul."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError(f"need equal square matrices, got {a.shape} and {b.shape}")
    prods = s.combine_arrays(a[:, :, None], b[None, :, :])
    return s.reduce_best(prods, axis=1)
