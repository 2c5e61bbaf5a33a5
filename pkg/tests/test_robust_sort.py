import math

import numpy as np
import pytest
from sklearn.base import clone

from robust_order.exceptions import ConfigurationError, InvalidInputError, ResourceLimitError
from robust_order.reference import dp_lcs_length
from robust_order.robust_sort import (
    OrderingResult,
    RobustSortConfig,
    RobustSorter,
    evaluate,
    robust_sort,
    triangle_removal_sort,
)
from robust_order.tournament import (
    LedgerSnapshot,
    MatrixOracle,
    generate_instance,
    make_planted_oracle,
)


def _three_cycle():
    adj = np.zeros((3, 3), dtype=bool)
    adj[0, 1] = adj[1, 2] = adj[2, 0] = True
    return MatrixOracle(adj)


def _result(order, discarded=()):
    return OrderingResult(np.asarray(order, dtype=np.int64), np.asarray(discarded, dtype=np.int64),
                          LedgerSnapshot(0, 0))


class TestConfig:
    def test_practical_defaults(self):
        cfg = RobustSortConfig()
        assert (cfg.c_k, cfg.c_tri, cfg.c_pivot, cfg.c_kprime) == (2.0, 8.0, 36.0, 64.0)

    def test_paper_defaults_are_fixed(self):
        cfg = RobustSortConfig.paper()
        assert (cfg.c_k, cfg.c_tri, cfg.c_pivot, cfg.c_kprime) == (10000.0, 72.0, 36.0, 1e5)
        with pytest.raises(ConfigurationError):
            RobustSortConfig.paper(c_k=3.0)

    @pytest.mark.parametrize("kw", [{"epsilon": 0}, {"epsilon": -1}, {"mode": "fast"}, {"c_tri": 0},
                                    {"small_cutoff": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            RobustSortConfig(**kw)

    def test_budgets_use_ceilings(self):
        b = RobustSortConfig(epsilon=0.5).budgets(1024)
        assert b.log_n == 10
        assert b.k == pytest.approx(1600)
        assert (b.pair_tests, b.triple_tests, b.pivot_attempts, b.sample_size) == (1600, 128000, 360, 640)
        assert b.cutoff == 8
        b = RobustSortConfig(epsilon=0.3).budgets(1000)
        L = math.log2(1000)
        assert b.pair_tests == math.ceil((2 * L / 0.3) ** 2)
        assert b.sample_size == math.ceil(64 * L)

    def test_small_epsilon_raises_cutoff(self):
        assert RobustSortConfig(epsilon=0.001).budgets(100).cutoff == math.ceil(0.001 ** (-2 / 3))

    def test_balance_threshold_exact(self):
        b = RobustSortConfig().budgets(1024)  # k' = 640, threshold 640/5 + 640/40 = 144
        assert not b.is_balanced(144, 496)
        assert b.is_balanced(145, 495)


class TestRobustSort:
    @pytest.mark.parametrize("n", [1, 2, 7, 16, 100, 600])
    @pytest.mark.parametrize("seed", range(3))
    def test_zero_bad_is_exact(self, n, seed):
        inst = generate_instance(n, 0, seed=seed)
        res = robust_sort(make_planted_oracle(inst), seed=seed)
        assert res.order.tolist() == inst.pi.tolist()
        assert res.discarded.size == 0
        assert evaluate(res, inst).loss == 0

    def test_three_cycle_is_discarded_in_paper_mode(self):
        res = robust_sort(_three_cycle(), config=RobustSortConfig.paper(), seed=0)
        assert res.order.size == 0
        assert res.discarded.tolist() == [0, 1, 2]
        assert res.triangles_removed == 1

    def test_empty_elements(self):
        res = robust_sort(MatrixOracle.from_order([1, 0]), elements=[], seed=0)
        assert res.order.size == 0 and res.discarded.size == 0
        assert res.queries.total_queries == 0

    def test_subset_of_universe(self):
        oracle = MatrixOracle.from_order(list(range(50))[::-1])
        res = robust_sort(oracle, elements=[3, 10, 20, 40, 41, 7, 8, 9, 30, 31], seed=1)
        assert res.order.tolist() == [41, 40, 31, 30, 20, 10, 9, 8, 7, 3]

    def test_rejects_foreign_or_repeated_elements(self):
        oracle = MatrixOracle.from_order([0, 1, 2])
        with pytest.raises(InvalidInputError):
            robust_sort(oracle, elements=[0, 5])
        with pytest.raises(InvalidInputError):
            robust_sort(oracle, elements=[1, 1])

    def test_paper_mode_guard(self):
        inst = generate_instance(64, 2, seed=0)
        with pytest.raises(ResourceLimitError):
            robust_sort(make_planted_oracle(inst), config=RobustSortConfig.paper())

    @pytest.mark.parametrize("adversary", ["random-flip", "split-half", "max-pretender", "shifted-rank"])
    @pytest.mark.parametrize("seed", range(3))
    def test_partition_and_progress_invariants(self, adversary, seed):
        n = 150
        inst = generate_instance(n, 12, adversary, seed=seed)
        res = robust_sort(make_planted_oracle(inst), seed=seed)
        everything = np.concatenate([res.order, res.discarded])
        assert np.array_equal(np.sort(everything), np.arange(n))
        assert np.unique(res.order).size == res.order.size
        assert res.while_iterations <= n
        if res.wholesale_discards == 0:
            assert res.triangles_removed <= res.discarded.size / 3
            assert res.discarded.size == 3 * res.triangles_removed
        assert res.queries.distinct_pairs <= res.queries.total_queries

    def test_deterministic_given_seed(self):
        inst = generate_instance(200, 10, "random-flip", seed=4)
        a = robust_sort(make_planted_oracle(inst), seed=123)
        b = robust_sort(make_planted_oracle(inst), seed=123)
        assert a.to_dict() == b.to_dict()

    def test_ledger_delta_matches_oracle(self):
        inst = generate_instance(120, 6, seed=2)
        oracle = make_planted_oracle(inst)
        oracle.edge(0, 1)
        res = robust_sort(oracle, seed=0)
        assert res.queries.total_queries == oracle.ledger.total_queries - 1

    def test_loss_within_expected_bound(self):
        losses = []
        for seed in range(20):
            inst = generate_instance(200, 10, "random-flip", seed=seed)
            res = robust_sort(make_planted_oracle(inst), seed=seed)
            losses.append(evaluate(res, inst).loss)
        assert np.mean(losses) <= 3.5 * 10


class TestTriangleRemoval:
    @pytest.mark.parametrize("n", [0, 1, 2, 30, 200])
    def test_zero_bad_exact(self, n):
        inst = generate_instance(n, 0, seed=n)
        res = triangle_removal_sort(make_planted_oracle(inst))
        assert res.order.tolist() == inst.pi.tolist()
        assert res.triangles_removed == 0

    @pytest.mark.parametrize("seed", range(5))
    def test_shifted_rank_needs_no_removals(self, seed):
        inst = generate_instance(60, 6, "shifted-rank", seed=seed)
        oracle = make_planted_oracle(inst)
        res = triangle_removal_sort(oracle)
        assert res.triangles_removed == 0 and res.discarded.size == 0
        adj = oracle.adjacency(charge=False)
        pos = np.empty(60, dtype=int)
        pos[res.order] = np.arange(60)
        u, v = np.nonzero(adj)
        assert np.all(pos[u] < pos[v])

    def test_queries_all_pairs_once(self):
        inst = generate_instance(40, 4, seed=1)
        res = triangle_removal_sort(make_planted_oracle(inst))
        assert res.queries.total_queries == res.queries.distinct_pairs == 40 * 39 // 2

    def test_three_cycle(self):
        res = triangle_removal_sort(_three_cycle())
        assert res.order.size == 0 and res.discarded.tolist() == [0, 1, 2]

    @pytest.mark.parametrize("adversary", ["random-flip", "split-half", "max-pretender", "shifted-rank"])
    def test_loss_at_most_three_b(self, adversary):
        for seed in range(25):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(3, 31))
            b = int(rng.integers(0, n // 3 + 1))
            inst = generate_instance(n, b, adversary, seed=seed)
            rep = evaluate(triangle_removal_sort(make_planted_oracle(inst)), inst)
            assert rep.loss <= 3 * b
            assert rep.order_loss <= 3 * b

    def test_guard(self):
        with pytest.raises(ResourceLimitError):
            triangle_removal_sort(make_planted_oracle(generate_instance(5001, 0, seed=0)))


class TestEvaluate:
    def test_exact_order(self):
        inst = generate_instance(30, 3, seed=0)
        rep = evaluate(_result(inst.pi), inst)
        assert rep.loss == 0 and rep.lcs_with_pi == 30
        # bad elements are never part of the support
        assert rep.good_loss == 3

    def test_one_good_moved_to_front(self):
        inst = generate_instance(30, 3, seed=0)
        pi = inst.pi.tolist()
        g = next(e for e in pi[5:] if e not in set(inst.bad.tolist()))
        moved = [g] + [e for e in pi if e != g]
        rep = evaluate(_result(moved), inst)
        assert rep.loss == 1
        assert rep.good_loss == 3 + 1

    def test_discarded_appended_ascending(self):
        inst = generate_instance(6, 0, seed=0)
        res = _result(inst.pi[:3], inst.pi[3:][::-1])
        assert res.full_order.tolist() == inst.pi[:3].tolist() + sorted(inst.pi[3:].tolist())

    def test_matches_dp(self, rng):
        for seed in range(30):
            inst = generate_instance(25, 4, seed=seed)
            perm = rng.permutation(25)
            cut = int(rng.integers(0, 26))
            res = _result(perm[:cut], perm[cut:])
            rep = evaluate(res, inst)
            # relabel element ids to 1-based ranks so the DP sees two permutations
            rank = inst.rank
            assert rep.lcs_with_pi == dp_lcs_length(rank[res.full_order] + 1, np.arange(1, 26))
            assert 0 <= rep.loss <= 25
            assert rep.bound_3eps == 3 * 4  # an OrderingResult built by hand carries epsilon 0

    def test_bound_uses_epsilon(self):
        inst = generate_instance(10, 2, seed=0)
        assert evaluate(_result(inst.pi), inst, epsilon=0.5).bound_3eps == 7.0

    def test_mismatch(self):
        inst = generate_instance(5, 0, seed=0)
        with pytest.raises(InvalidInputError):
            evaluate(_result([0, 1, 2]), inst)
        with pytest.raises(InvalidInputError):
            evaluate(_result([0, 1, 2, 3, 3]), inst)


class TestEstimator:
    def test_params_round_trip(self):
        est = RobustSorter(epsilon=0.25, random_state=3)
        assert est.get_params()["epsilon"] == 0.25
        assert clone(est).get_params() == est.get_params()

    def test_fit_and_score(self):
        inst = generate_instance(80, 4, seed=1)
        est = RobustSorter(random_state=0).fit(make_planted_oracle(inst))
        assert est.order_.size + est.discarded_.size == 80
        assert est.full_order_.size == 80
        assert est.n_queries_ > 0
        assert -est.score(inst) <= 80

    def test_fit_rejects_arrays(self):
        with pytest.raises(InvalidInputError):
            RobustSorter().fit(np.zeros((3, 3)))
