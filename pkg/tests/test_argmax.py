import math

import numpy as np
import pytest

from maxprod.argmax import (
    ReadScratch,
    SortedPermutation,
    fast_argmax_k,
    fast_argmax_pair,
    sort_best,
    sort_desc,
)
from maxprod.order_stats import expected_steps
from maxprod.semiring import MAX_PRODUCT, MAX_SUM, MIN_SUM

MODES = ("analysis", "symmetric", "early-stop")


def brute_value(lists, s=MAX_PRODUCT):
    best = None
    for i in range(len(lists[0])):
        v = lists[0][i]
        for other in lists[1:]:
            v = s.combine(v, other[i])
        if best is None or s.better(v, best):
            best = v
    return best


class TestSortDesc:
    def test_hand_sort(self):
        assert sort_desc([0.2, 0.9, 0.5]).order == [1, 2, 0]

    def test_tie_rule(self):
        assert sort_desc([7, 7, 7]).order == [0, 1, 2]

    def test_already_descending(self):
        assert sort_desc([9, 5, 3, 1]).order == [0, 1, 2, 3]

    def test_empty_is_error(self):
        with pytest.raises(ValueError):
            sort_desc([])

    def test_inverse_invariant(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            v = rng.random(int(rng.integers(1, 40)))
            p = sort_desc(v)
            for rank, idx in enumerate(p.order):
                assert p.inverse[idx] == rank
            assert p.sorts(v.tolist())

    def test_min_sum_sorts_ascending(self):
        p = sort_best([3.0, 1.0, 2.0], MIN_SUM)
        assert p.order == [1, 2, 0]

    def test_invalid_permutation_rejected(self):
        with pytest.raises(ValueError):
            SortedPermutation([0, 0, 1])


class TestPair:
    def test_aligned_orderings_terminate_immediately(self):
        va, vb = [3.0, 1.0, 2.0], [6.0, 2.0, 4.0]
        out = fast_argmax_pair(va, vb, sort_desc(va), sort_desc(vb))
        assert (out.best, out.value, out.steps) == (0, 18.0, 1)

    def test_reversed_with_tie_broken_low(self):
        va, vb = [1.0, 2.0, 3.0, 4.0], [4.0, 3.0, 2.0, 1.0]
        for mode in MODES:
            out = fast_argmax_pair(va, vb, sort_desc(va), sort_desc(vb), mode)
            assert out.value == 6.0
            assert out.best == 1

    def test_elementwise_scan_oracle(self):
        va, vb = [0.9, 0.1, 0.5], [0.2, 0.8, 0.6]
        out = fast_argmax_pair(va, vb, sort_desc(va), sort_desc(vb))
        assert out.best == 2
        assert out.value == 0.5 * 0.6

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            fast_argmax_pair([1.0], [1.0, 2.0], sort_desc([1.0]), sort_desc([1.0, 2.0]))

    def test_invalid_permutation(self):
        va = [1.0, 2.0]
        with pytest.raises(ValueError):
            fast_argmax_pair(va, va, sort_desc([2.0, 1.0]), sort_desc(va))

    def test_exact_on_random_all_modes_and_semirings(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            n = int(rng.integers(1, 65))
            va, vb = rng.random(n), rng.random(n)
            for s in (MAX_PRODUCT, MAX_SUM, MIN_SUM):
                pa, pb = sort_best(va, s), sort_best(vb, s)
                want = brute_value([va.tolist(), vb.tolist()], s)
                for mode in MODES:
                    out = fast_argmax_pair(va, vb, pa, pb, mode, s, validate=False)
                    assert out.value == want

    def test_analysis_steps_bounds(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            n = int(rng.integers(1, 50))
            va, vb = rng.random(n), rng.random(n)
            out = fast_argmax_pair(va, vb, sort_desc(va), sort_desc(vb), "analysis", validate=False)
            assert 1 <= out.steps <= n // 2 + 1
            assert out.probes <= min(2 * out.steps, n)

    def test_reversal_hits_worst_case(self):
        for n in (4, 10, 64):
            va = np.arange(1.0, n + 1)
            vb = va[::-1].copy()
            out = fast_argmax_pair(va, vb, sort_desc(va), sort_desc(vb), "analysis")
            assert out.steps == n // 2 + 1

    def test_scale_invariance_of_best_index(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(2, 40))
            va, vb = rng.random(n) + 0.1, rng.random(n) + 0.1
            out1 = fast_argmax_pair(va, vb, sort_desc(va), sort_desc(vb))
            va2 = 7.5 * va
            out2 = fast_argmax_pair(va2, vb, sort_desc(va2), sort_desc(vb))
            assert out1.best == out2.best

    def test_empirical_mean_matches_expectation(self):
        rng = np.random.default_rng(4)
        n, trials = 8, 4000
        steps = np.empty(trials)
        for t in range(trials):
            va, vb = rng.random(n), rng.random(n)
            steps[t] = fast_argmax_pair(va, vb, sort_desc(va), sort_desc(vb), "analysis").steps
        se = steps.std(ddof=1) / math.sqrt(trials)
        assert abs(steps.mean() - expected_steps(n)) < 3 * se


class TestKLists:
    def test_k2_consistency_with_pair(self):
        vs = [[3.0, 1.0, 2.0], [6.0, 2.0, 4.0]]
        ps = [sort_desc(v) for v in vs]
        out = fast_argmax_k(vs, ps, ReadScratch(3))
        pair = fast_argmax_pair(vs[0], vs[1], ps[0], ps[1])
        assert out.value == pair.value == 18.0

    def test_k3_tie_rule(self):
        vs = [[2.0, 1.0], [1.0, 2.0], [1.0, 1.0]]
        ps = [sort_desc(v) for v in vs]
        out = fast_argmax_k(vs, ps, ReadScratch(2))
        assert out.value == 2.0
        assert out.best == 0

    def test_reversal_probes_at_most_n(self):
        n = 6
        base = np.arange(1.0, n + 1)
        vs = [base.tolist(), base[::-1].tolist(), np.roll(base, 3).tolist()]
        ps = [sort_desc(v) for v in vs]
        out = fast_argmax_k(vs, ps, ReadScratch(n))
        assert out.probes <= n
        assert out.value == brute_value(vs)

    def test_exact_on_random(self):
        rng = np.random.default_rng(5)
        scratch = ReadScratch(200)
        for _ in range(400):
            n = int(rng.integers(1, 200))
            k = int(rng.integers(2, 5))
            vs = [rng.random(n) for _ in range(k)]
            ps = [sort_desc(v) for v in vs]
            want = brute_value([v.tolist() for v in vs])
            for mode in MODES:
                out = fast_argmax_k(vs, ps, scratch, mode, validate=False)
                assert out.value == want
                assert out.probes <= n
                assert out.probes <= k * out.steps + k

    def test_scratch_too_small(self):
        vs = [[1.0, 2.0], [2.0, 1.0]]
        with pytest.raises(ValueError):
            fast_argmax_k(vs, [sort_desc(v) for v in vs], ReadScratch(1))

    def test_scratch_reuse_across_calls(self):
        scratch = ReadScratch(16)
        rng = np.random.default_rng(6)
        for _ in range(50):
            vs = [rng.random(16) for _ in range(3)]
            ps = [sort_desc(v) for v in vs]
            assert fast_argmax_k(vs, ps, scratch).value == brute_value([v.tolist() for v in vs])

    def test_needs_two_lists(self):
        with pytest.raises(ValueError):
            fast_argmax_k([[1.0]], [sort_desc([1.0])], ReadScratch(1))
