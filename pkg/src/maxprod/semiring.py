"""Semirings for MAP-style message passing.

Only semirings whose "addition" is a total order with a monotone
"multiplication" are supported: max-product, max-sum and min-sum.  The
order makes every combine/argbest computation depend on the input's order
statistics alone, which is what the fast argmax machinery exploits.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Semiring:
    """A (select-best, combine) pair with a strict total order on values.

    ``combine`` must be strictly monotone w.r.t. ``better``: if a is better
    than b and c is better than d, then combine(a, c) is better than
    combine(b, d).  For max-product this restricts factor values to be
    non-negative.
    """

    kind: str
    combine: Callable[[float, float], float]
    better: Callable[[float, float], bool]  # better(a, b): a strictly beats b
    identity: float
    worst: float
    _maximizing: bool = field(repr=False, default=True)

    def combine_arrays(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.kind == "max-product":
            return a * b
        return a + b

    def reduce_best(self, values: np.ndarray, axis=None) -> np.ndarray:
        return np.max(values, axis=axis) if self._maximizing else np.min(values, axis=axis)

    def argbest_flat(self, values: np.ndarray) -> int:
        # np.argmax/argmin return the first (smallest flat index) maximizer,
        # which is the tie rule used throughout.
        flat = np.ravel(values)
        return int(np.argmax(flat) if self._maximizing else np.argmin(flat))

    def sort_key(self, values: np.ndarray) -> np.ndarray:
        """Array whose ascending stable argsort lists values best-first."""
        return -np.asarray(values) if self._maximizing else np.asarray(values)

    def normalize(self, values: np.ndarray) -> np.ndarray:
        """Rescale so the best entry equals the semiring identity."""
        best = self.reduce_best(values)
        if self.kind == "max-product":
            if best <= 0 or not np.isfinite(best):
                return values
            return values / best
        if not np.isfinite(best):
            return values
        return values - best

    def validate_values(self, values: np.ndarray) -> None:
        if self.kind == "max-product" and np.any(np.asarray(values) < 0):
            raise ValueError("max-product factors must be non-negative")

    def __str__(self) -> str:
        return self.kind


MAX_PRODUCT = Semiring("max-product", operator.mul, operator.gt, 1.0, -np.inf, True)
MAX_SUM = Semiring("max-sum", operator.add, operator.gt, 0.0, -np.inf, True)
MIN_SUM = Semiring("min-sum", operator.add, operator.lt, 0.0, np.inf, False)

_BY_NAME = {s.kind: s for s in (MAX_PRODUCT, MAX_SUM, MIN_SUM)}


def get_semiring(name: str) -> Semiring:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown semiring {name!r}; choose from {sorted(_BY_NAME)}") from None
