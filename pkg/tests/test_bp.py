import numpy as np
import pytest

from maxprod.bp import (
    Message,
    Schedule,
    compute_message,
    decode_map,
    presort_shared_prior,
    run_bp,
)
from maxprod.factors import Factor, Variable, map_assignment_brute
from maxprod.graph import FactorGraph, build_chain, build_grid, build_ring, build_topology
from maxprod.semiring import MAX_PRODUCT, MAX_SUM, MIN_SUM


def V(i, card):
    return Variable(i, card)


def two_node_chain():
    g = FactorGraph()
    a, b = g.add_variable(V(0, 2)), g.add_variable(V(1, 2))
    g.add_factor(Factor((a,), [1, 3]))
    g.add_factor(Factor((b,), [2, 1]))
    g.add_factor(Factor((a, b), [[1, 1], [1, 4]]))
    return g


def random_chain(rng, q, n, semiring=MAX_PRODUCT):
    unary = lambda _i: rng.random(n)
    pairwise = lambda _e: rng.random((n, n))
    return build_chain(q, n, unary, pairwise, semiring)


def model_value(graph, assignment, s):
    val = s.identity
    for fn in graph.factors:
        val = s.combine(val, fn.factor.value_at(assignment))
    return val


class TestComputeMessage:
    def test_pairwise_example(self):
        g = FactorGraph()
        i, j = g.add_variable(V(0, 2)), g.add_variable(V(1, 2))
        g.add_factor(Factor((i,), [1, 1]))
        g.add_factor(Factor((j,), [1, 2]))
        fij = g.add_factor(Factor((i, j), [[1, 3], [2, 1]]))
        incoming = [Message(source=1, target=1, table=Factor((j,), [1, 2]))]
        for mode in ("naive", "fast"):
            msg = compute_message(g, (fij, 0), incoming, mode=mode)
            assert msg.table.values.tolist() == [6, 2]

    def test_uninformative_pair_factor_returns_scaled_unary(self):
        g = FactorGraph()
        i, j = g.add_variable(V(0, 3)), g.add_variable(V(1, 3))
        g.add_factor(Factor((i,), [0.2, 0.5, 0.3]))
        fij = g.add_factor(Factor((i, j), np.ones((3, 3))))
        phi_j = np.array([0.4, 0.9, 0.1])
        incoming = [Message(source=-1, target=1, table=Factor((j,), phi_j))]
        msg = compute_message(g, (fij, 0), incoming, mode="naive")
        assert np.allclose(msg.table.values, np.array([0.2, 0.5, 0.3]) * 0.9)

    def test_fast_equals_naive_bit_exact(self):
        rng = np.random.default_rng(0)
        g = FactorGraph()
        i, j = g.add_variable(V(0, 16)), g.add_variable(V(1, 16))
        fij = g.add_factor(Factor((i, j), rng.random((16, 16))))
        incoming = [Message(source=-1, target=1, table=Factor((j,), rng.random(16)))]
        naive = compute_message(g, (fij, 0), incoming, mode="naive")
        fast = compute_message(g, (fij, 0), incoming, mode="fast")
        assert np.array_equal(naive.table.values, fast.table.values)

    def test_missing_incoming_is_error(self):
        g = two_node_chain()
        with pytest.raises(ValueError):
            compute_message(g, (2, 0), [], mode="naive")

    def test_presorted_prior_gives_same_answer(self):
        rng = np.random.default_rng(1)
        g = FactorGraph()
        i, j = g.add_variable(V(0, 12)), g.add_variable(V(1, 12))
        table = rng.random((12, 12))
        fij = g.add_factor(Factor((i, j), table), data_independent=True)
        prior = presort_shared_prior(Factor((i, j), table), [(i,), (j,)])
        incoming = [Message(source=-1, target=1, table=Factor((j,), rng.random(12)))]
        with_prior = compute_message(g, (fij, 0), incoming, mode="fast", prior=prior)
        without = compute_message(g, (fij, 0), incoming, mode="fast")
        assert np.array_equal(with_prior.table.values, without.table.values)


class TestRunBP:
    def test_two_node_chain_map(self):
        g = two_node_chain()
        res = run_bp(g, Schedule(iterations=2), mode="fast")
        decoded = decode_map(res)
        assert decoded.states == (1, 1)
        assert model_value(g, decoded, MAX_PRODUCT) == 12

    def test_single_variable_graph(self):
        g = FactorGraph()
        a = g.add_variable(V(0, 3))
        g.add_factor(Factor((a,), [0.2, 0.7, 0.1]))
        res = run_bp(g, Schedule(iterations=1), mode="naive")
        assert np.allclose(res.beliefs[0].values, [0.2, 0.7, 0.1])

    def test_chain_matches_brute_enumeration(self):
        rng = np.random.default_rng(2)
        for trial in range(25):
            q = int(rng.integers(2, 9))
            n = int(rng.integers(2, 5))
            g = random_chain(rng, q, n)
            res = run_bp(g, Schedule(iterations=1), mode="fast")
            decoded = decode_map(res)
            _, want = map_assignment_brute(g.factor_list(), MAX_PRODUCT, cap=10**7)
            assert model_value(g, decoded, MAX_PRODUCT) == pytest.approx(want, rel=1e-12)

    def test_ten_node_chain_blockwise_oracle(self):
        rng = np.random.default_rng(3)
        g = random_chain(rng, 10, 4)
        res = run_bp(g, Schedule(iterations=1), mode="fast")
        decoded = decode_map(res)
        _, want = map_assignment_brute(g.factor_list(), MAX_PRODUCT, cap=10**7)
        assert model_value(g, decoded, MAX_PRODUCT) == pytest.approx(want, rel=1e-12)

    def test_fast_naive_identical_message_sequences(self):
        rng = np.random.default_rng(4)
        for trial in range(10):
            q = int(rng.integers(3, 8))
            n = int(rng.integers(2, 9))
            seed_state = rng.bit_generator.state
            g = random_chain(rng, q, n)
            sched = Schedule("random-sequential", iterations=3, seed=trial)
            fast = run_bp(g, sched, mode="fast", record_log=True)
            naive = run_bp(g, sched, mode="naive", record_log=True)
            assert len(fast.message_log) == len(naive.message_log)
            for (it1, f1, v1, t1), (it2, f2, v2, t2) in zip(fast.message_log, naive.message_log):
                assert (it1, f1, v1) == (it2, f2, v2)
                assert np.array_equal(t1, t2)

    def test_grid_fast_naive_identical(self):
        rng = np.random.default_rng(5)
        g = build_grid(4, 4, 5, lambda _i: rng.random(5), lambda _e: rng.random((5, 5)))
        sched = Schedule("random-sequential", iterations=3, seed=0)
        fast = run_bp(g, sched, mode="fast", record_log=True)
        naive = run_bp(g, sched, mode="naive", record_log=True)
        assert len(fast.message_log) == len(naive.message_log) > 0
        for a, b in zip(fast.message_log, naive.message_log):
            assert np.array_equal(a[3], b[3])

    def test_min_sum_chain(self):
        rng = np.random.default_rng(6)
        g = build_chain(5, 4, lambda _i: rng.random(4), lambda _e: rng.random((4, 4)), MIN_SUM)
        res = run_bp(g, Schedule(iterations=1), mode="fast", semiring=MIN_SUM)
        decoded = decode_map(res)
        _, want = map_assignment_brute(g.factor_list(), MIN_SUM)
        assert model_value(g, decoded, MIN_SUM) == pytest.approx(want, rel=1e-12)

    def test_budget_zero_rejected(self):
        with pytest.raises(ValueError):
            Schedule(iterations=0)

    def test_disconnected_graph_rejected(self):
        g = FactorGraph()
        a, b = g.add_variable(V(0, 2)), g.add_variable(V(1, 2))
        g.add_factor(Factor((a,), [1, 2]))
        g.add_factor(Factor((b,), [1, 2]))
        with pytest.raises(ValueError):
            run_bp(g, Schedule(iterations=1))

    def test_random_schedule_reproducible(self):
        rng = np.random.default_rng(7)
        g = random_chain(rng, 6, 4)
        sched = Schedule("random-sequential", iterations=4, seed=42)
        r1 = run_bp(g, sched, mode="fast", record_log=True)
        r2 = run_bp(g, sched, mode="fast", record_log=True)
        assert [(e[0], e[1], e[2]) for e in r1.message_log] == [
            (e[0], e[1], e[2]) for e in r2.message_log
        ]
        for a, b in zip(r1.message_log, r2.message_log):
            assert np.array_equal(a[3], b[3])

    def test_synchronous_schedule_converges_on_tree(self):
        rng = np.random.default_rng(8)
        g = random_chain(rng, 5, 3)
        res = run_bp(g, Schedule("synchronous", iterations=50), mode="naive")
        assert res.converged

    def test_tree_converges_after_one_sweep(self):
        rng = np.random.default_rng(9)
        g = random_chain(rng, 7, 4)
        res = run_bp(g, Schedule(iterations=5), mode="fast")
        assert res.converged
        assert res.iterations_run == 2  # second sweep only confirms the fixpoint


class TestSortSharing:
    def test_homogeneous_grid_sorts_once_per_direction(self):
        rng = np.random.default_rng(10)
        shared = rng.random((6, 6))
        g = build_grid(5, 5, 6, lambda _i: rng.random(6), shared)
        res = run_bp(g, Schedule(iterations=2), mode="fast")
        n_edges = sum(1 for fn in g.factors if len(fn.scope) == 2)
        assert n_edges == 2 * 5 * 4
        assert res.stats.prior_builds == 1  # one homogeneity class
        assert res.stats.row_sorts == 2  # one per message direction

    def test_scaled_prior_has_same_permutations(self):
        rng = np.random.default_rng(11)
        i, j = V(0, 8), V(1, 8)
        table = rng.random((8, 8))
        p1 = presort_shared_prior(Factor((i, j), table), [(i,), (j,)])
        p2 = presort_shared_prior(Factor((i, j), 2.0 * table), [(i,), (j,)])
        for key in (0, 1):
            for r1, r2 in zip(p1.views[key].rows, p2.views[key].rows):
                assert r1.order == r2.order

    def test_heterogeneous_chain_sorts_once_per_edge(self):
        rng = np.random.default_rng(12)
        q, n = 6, 5
        g = random_chain(rng, q, n)  # data-dependent style: distinct tables
        res = run_bp(g, Schedule("random-sequential", iterations=7, seed=1), mode="fast")
        n_edges = q - 1
        assert res.stats.prior_builds <= n_edges
        assert res.stats.row_sorts <= 2 * n_edges  # both directions, built once
        assert res.stats.insertion_resorts > 0  # later iterations reuse orders

    def test_fast_equals_naive_even_with_resorts(self):
        rng = np.random.default_rng(13)
        g = build_ring(6, 5, lambda _i: rng.random(5), lambda _e: rng.random((5, 5)))
        sched = Schedule("random-sequential", iterations=5, seed=3)
        fast = run_bp(g, sched, mode="fast", record_log=True)
        naive = run_bp(g, sched, mode="naive", record_log=True)
        assert fast.stats.insertion_resorts > 0
        for a, b in zip(fast.message_log, naive.message_log):
            assert np.array_equal(a[3], b[3])


class TestDecode:
    def test_uniform_beliefs_decode_to_zero(self):
        g = FactorGraph()
        a, b = g.add_variable(V(0, 3)), g.add_variable(V(1, 3))
        g.add_factor(Factor((a, b), np.ones((3, 3))))
        res = run_bp(g, Schedule(iterations=1), mode="naive")
        assert decode_map(res).states == (0, 0)

    def test_empty_beliefs_is_error(self):
        g = two_node_chain()
        res = run_bp(g, Schedule(iterations=1))
        res.beliefs.clear()
        with pytest.raises(ValueError):
            decode_map(res)

    def test_unique_map_decodes_exactly(self):
        rng = np.random.default_rng(14)
        for trial in range(10):
            g = random_chain(rng, 6, 3)
            res = run_bp(g, Schedule(iterations=1), mode="fast")
            decoded = decode_map(res)
            want_assign, want = map_assignment_brute(g.factor_list(), MAX_PRODUCT)
            assert decoded == want_assign


class TestTopologies:
    def test_chain_edge_count(self):
        g = build_chain(5, 3, None, np.ones((3, 3)))
        assert sum(1 for fn in g.factors if len(fn.scope) == 2) == 4

    def test_grid_edge_count(self):
        g = build_grid(3, 3, 2, None, np.ones((2, 2)))
        assert sum(1 for fn in g.factors if len(fn.scope) == 2) == 12

    def test_ring_edge_count_and_cycle(self):
        g = build_ring(4, 2, None, np.ones((2, 2)))
        assert sum(1 for fn in g.factors if len(fn.scope) == 2) == 4
        assert not g.is_tree() and g.is_connected()

    def test_invalid_dims(self):
        with pytest.raises(ValueError):
            build_chain(1, 3, None, np.ones((3, 3)))
        with pytest.raises(ValueError):
            build_grid(1, 5, 3, None, np.ones((3, 3)))
        with pytest.raises(ValueError):
            build_topology("torus", (3, 3), 2, None, np.ones((2, 2)))

    def test_pairwise_tagged_data_independent(self):
        g = build_chain(4, 3, lambda i: np.ones(3), np.ones((3, 3)))
        tags = [fn.data_independent for fn in g.factors if len(fn.scope) == 2]
        assert all(tags)

    def test_asymmetric_ring_table_orientation(self):
        # closing edge (q-1, 0) stores the transposed table; model value of the
        # decoded assignment must match brute enumeration
        rng = np.random.default_rng(15)
        table = rng.random((3, 3))  # asymmetric
        g = build_ring(4, 3, lambda _i: rng.random(3), table)
        res = run_bp(g, Schedule("random-sequential", iterations=8, seed=5), mode="naive")
        _, want = map_assignment_brute(g.factor_list(), MAX_PRODUCT)
        decoded = decode_map(res)
        assert model_value(g, decoded, MAX_PRODUCT) <= want + 1e-12
