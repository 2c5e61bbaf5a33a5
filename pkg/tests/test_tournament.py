import json

import numpy as np
import pytest

from robust_order.exceptions import ConfigurationError, InvalidInputError
from robust_order.reference import count_triangles, count_triangles_by_degree
from robust_order.tournament import (
    Adversary,
    MatrixOracle,
    PlantedOrderInstance,
    QueryLedger,
    first_triangle,
    generate_instance,
    make_planted_oracle,
)

ADVERSARIES = [a.value for a in Adversary]


def _disagreements(inst, oracle):
    adj = oracle.adjacency(charge=False)
    rank = inst.rank
    truth = rank[:, None] < rank[None, :]
    off = ~np.eye(inst.n, dtype=bool)
    return adj != truth, off


@pytest.mark.parametrize("adversary", ADVERSARIES)
def test_zero_bad_matches_pi(adversary):
    inst = generate_instance(60, 0, adversary, seed=3)
    wrong, off = _disagreements(inst, make_planted_oracle(inst))
    assert not wrong[off].any()


@pytest.mark.parametrize("adversary", ADVERSARIES)
@pytest.mark.parametrize("seed", range(4))
def test_good_pairs_always_truthful(adversary, seed):
    inst = generate_instance(200, 15, adversary, seed=seed)
    wrong, off = _disagreements(inst, make_planted_oracle(inst))
    good = ~inst.bad_mask
    assert not wrong[np.ix_(good, good)][off[np.ix_(good, good)]].any()


def test_random_flip_single_bad_only_touches_b():
    inst = generate_instance(50, 1, "random-flip", seed=11)
    wrong, off = _disagreements(inst, make_planted_oracle(inst))
    rows, cols = np.nonzero(wrong & off)
    (b,) = inst.bad.tolist()
    assert rows.size > 0
    assert np.all((rows == b) | (cols == b))


def test_random_flip_disagreement_fraction():
    inst = generate_instance(100, 10, "random-flip", seed=5)
    wrong, off = _disagreements(inst, make_planted_oracle(inst))
    bad = inst.bad_mask
    touched = (bad[:, None] | bad[None, :]) & np.triu(off)
    m = int(touched.sum())
    frac = wrong[touched].mean()
    assert abs(frac - 0.5) <= 3 * np.sqrt(0.25 / m)


@pytest.mark.parametrize("seed", range(5))
def test_shifted_rank_has_no_triangles(seed):
    inst = generate_instance(50, 5, "shifted-rank", seed=seed)
    total, _ = count_triangles(make_planted_oracle(inst))
    assert total == 0


def test_shifted_rank_offset_parameter_round_trips():
    inst = generate_instance(40, 4, "shifted-rank", seed=2, offset=7)
    assert count_triangles(make_planted_oracle(inst))[0] == 0
    again = PlantedOrderInstance.from_json(inst.to_json())
    assert again.params == {"offset": 7}


def test_max_pretender_claims_to_be_largest():
    inst = generate_instance(30, 3, "max-pretender", seed=1)
    oracle = make_planted_oracle(inst)
    for b in inst.bad.tolist():
        for g in np.flatnonzero(~inst.bad_mask).tolist():
            assert oracle.edge(g, b)


def test_split_half_answers_ignore_rank():
    inst = generate_instance(101, 1, "split-half", seed=4)
    oracle = make_planted_oracle(inst)
    (b,) = inst.bad.tolist()
    others = np.array([e for e in range(101) if e != b])
    greater = oracle.less(others, np.full(others.size, b))
    assert greater.sum() == 50


@pytest.mark.parametrize("adversary", ADVERSARIES)
def test_antisymmetry_and_persistence(adversary, rng):
    inst = generate_instance(80, 12, adversary, seed=9)
    oracle = make_planted_oracle(inst)
    u = rng.integers(0, 80, size=2000)
    v = rng.integers(0, 80, size=2000)
    keep = u != v
    u, v = u[keep], v[keep]
    fwd = oracle.less(u, v)
    assert np.array_equal(fwd, ~oracle.less(v, u))
    assert np.array_equal(fwd, oracle.less(u, v))
    # a fresh oracle from the same instance answers identically
    assert np.array_equal(fwd, make_planted_oracle(inst).less(u, v))


def test_random_flip_triangles_cross_checked():
    inst = generate_instance(60, 8, "random-flip", seed=21)
    oracle = make_planted_oracle(inst)
    total, per = count_triangles(oracle)
    assert total > 0
    assert total == count_triangles_by_degree(oracle)
    assert sum(per.values()) == 3 * total
    good = np.flatnonzero(~inst.bad_mask)
    # every triangle needs a bad vertex
    assert total <= sum(per[b] for b in inst.bad.tolist())
    assert all(per[g] <= sum(per[b] for b in inst.bad.tolist()) for g in good.tolist())


def test_unknown_adversary():
    with pytest.raises(ConfigurationError):
        generate_instance(10, 1, "sneaky", seed=0)


def test_invalid_b():
    with pytest.raises(InvalidInputError):
        generate_instance(5, 6)


def test_instance_json_round_trip(tmp_path):
    inst = generate_instance(25, 4, "split-half", seed=17)
    doc = json.loads(inst.to_json())
    assert set(doc) == {"n", "pi", "bad", "adversary", "seed"}
    assert doc["adversary"]["name"] == "split-half"
    path = tmp_path / "inst.json"
    inst.save(path)
    again = PlantedOrderInstance.load(path)
    assert again.n == 25 and again.seed == 17
    assert np.array_equal(again.pi, inst.pi) and np.array_equal(again.bad, inst.bad)
    a = make_planted_oracle(inst).adjacency(charge=False)
    assert np.array_equal(a, make_planted_oracle(again).adjacency(charge=False))


def test_instance_rejects_bad_outside_universe():
    with pytest.raises(InvalidInputError):
        PlantedOrderInstance(3, np.array([0, 1, 2]), np.array([5]), Adversary.RANDOM_FLIP, 0)
    with pytest.raises(InvalidInputError):
        PlantedOrderInstance(3, np.array([0, 1, 1]), np.array([], dtype=np.int64), Adversary.RANDOM_FLIP, 0)


class TestLedger:
    def test_counts_every_query(self):
        oracle = MatrixOracle.from_order([2, 0, 1])
        oracle.edge(0, 1)
        oracle.edge(1, 0)
        oracle.less([0, 2], [2, 1])
        assert oracle.ledger.total_queries == 4
        assert oracle.ledger.distinct_pairs == 3

    def test_snapshot_difference(self):
        ledger = QueryLedger(5)
        ledger.record(np.array([0]), np.array([1]))
        before = ledger.snapshot()
        ledger.record(np.array([1, 2]), np.array([0, 3]))
        delta = ledger.snapshot() - before
        assert delta.total_queries == 2 and delta.distinct_pairs == 1

    def test_distinct_bounded_by_total(self, rng):
        inst = generate_instance(40, 5, seed=1)
        oracle = make_planted_oracle(inst)
        for _ in range(20):
            u = rng.integers(0, 40, 30)
            v = (u + rng.integers(1, 40, 30)) % 40
            oracle.less(u, v)
            assert oracle.ledger.distinct_pairs <= oracle.ledger.total_queries

    def test_self_loop_rejected(self):
        with pytest.raises(InvalidInputError):
            MatrixOracle.from_order([0, 1]).edge(1, 1)


class TestFirstTriangle:
    def setup_method(self):
        # 0 -> 1 -> 2 -> 0, and 3 below everything
        adj = np.zeros((4, 4), dtype=bool)
        adj[0, 1] = adj[1, 2] = adj[2, 0] = True
        adj[:3, 3] = True
        self.oracle = MatrixOracle(adj)

    def test_hit_costs_three(self):
        assert first_triangle(self.oracle, [0], [1], [2]) == 0
        assert self.oracle.ledger.total_queries == 3

    def test_short_circuit_costs_two(self):
        # 0 -> 3 but 1 -> 3, so no cycle can close after two reads
        assert first_triangle(self.oracle, [0], [3], [1]) == -1
        assert self.oracle.ledger.total_queries == 2

    def test_degenerate_is_free(self):
        assert first_triangle(self.oracle, [0, 1], [0, 1], [2, 1]) == -1
        assert self.oracle.ledger.total_queries == 0

    def test_charges_only_up_to_hit(self):
        x, y, z = [0, 0, 1, 0], [3, 1, 2, 1], [1, 2, 0, 2]
        assert first_triangle(self.oracle, x, y, z) == 1
        assert self.oracle.ledger.total_queries == 2 + 3


def _kernel_oracles():
    from robust_order.ulam import MajorityOracle
    from robust_order.permutation import Permutation

    out = []
    for adversary in ADVERSARIES:
        for b in (0, 7):
            inst = generate_instance(40, b, adversary, seed=11)
            out.append((f"{adversary}-b{b}", lambda inst=inst: make_planted_oracle(inst)))
    up = np.triu(np.random.default_rng(5).random((30, 30)) < 0.5, 1)
    adj = up | np.tril(~up.T, -1)
    out.append(("matrix", lambda: MatrixOracle(adj)))
    rng = np.random.default_rng(9)
    five = [Permutation(rng.permutation(25) + 1) for _ in range(5)]
    out.append(("majority", lambda: MajorityOracle(five)))
    return out


KERNEL_ORACLES = _kernel_oracles()


@pytest.mark.parametrize("name,factory", KERNEL_ORACLES, ids=[k for k, _ in KERNEL_ORACLES])
class TestKernelsAgreeWithNumpy:
    def test_arcs(self, name, factory):
        from robust_order import _kernels

        oracle = factory()
        spec = oracle.arc_spec()
        assert spec is not None
        e = oracle.elements
        u, v = np.meshgrid(e, e, indexing="ij")
        u, v = u.ravel(), v.ravel()
        keep = u != v
        np.testing.assert_array_equal(_kernels.arcs(spec, u[keep], v[keep]), oracle._less(u[keep], v[keep]))

    def test_first_triangle_index_and_charges(self, name, factory):
        from robust_order.tournament import _first_triangle_numpy

        rng = np.random.default_rng(17)
        for _ in range(20):
            fast, slow = factory(), factory()
            x, y, z = (fast.elements[rng.integers(0, fast.n, size=60)] for _ in range(3))
            assert first_triangle(fast, x, y, z) == _first_triangle_numpy(slow, x, y, z)
            assert fast.ledger.total_queries == slow.ledger.total_queries
            assert fast.ledger.distinct_pairs == slow.ledger.distinct_pairs


class TestRandomSearch:
    def _run(self, oracle, S, tests, apex=-1, state=1):
        from robust_order import _kernels

        ledger = oracle.ledger
        x, y, z, q = _kernels.random_search(oracle.arc_spec(), np.asarray(S, dtype=np.int64), tests, apex,
                                            state, ledger.seen_buffer(), ledger.track_distinct)
        ledger.charge(q)
        return (x, y, z), q

    def test_hit_is_a_distinct_triangle(self):
        inst = generate_instance(50, 8, "random-flip", seed=2)
        oracle = make_planted_oracle(inst)
        for state in range(20):
            (x, y, z), _ = self._run(oracle, oracle.elements, 10_000, state=state)
            assert x >= 0 and len({x, y, z}) == 3
            assert first_triangle(make_planted_oracle(inst), [x], [y], [z]) == 0

    def test_transitive_third_arc_rate(self):
        # uniform ordered triples put the middle element second one time in three
        oracle = make_planted_oracle(generate_instance(30, 0, seed=4))
        tests = 300_000
        (x, _, _), q = self._run(oracle, oracle.elements, tests)
        assert x == -1
        assert abs((q - 2 * tests) / tests - 1 / 3) < 0.005
        assert oracle.ledger.distinct_pairs == 30 * 29 // 2

    def test_apex_pairs_skip_apex(self):
        oracle = make_planted_oracle(generate_instance(10, 0, seed=4))
        S = np.arange(1, 10)
        (x, _, _), q = self._run(oracle, S, 5_000, apex=0)
        assert x == -1
        # pairs never repeat an element and every pair touches the apex twice
        assert oracle.ledger.distinct_pairs == 9 * 8 // 2 + 9
        assert 2 * 5_000 <= q <= 3 * 5_000

    def test_stream_is_reproducible(self):
        inst = generate_instance(40, 6, "split-half", seed=8)
        a = self._run(make_planted_oracle(inst), np.arange(40), 50_000, state=99)
        b = self._run(make_planted_oracle(inst), np.arange(40), 50_000, state=99)
        assert a == b
