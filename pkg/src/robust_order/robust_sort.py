"""Quicksort-style sorting that stays close to the true order despite lying elements.

:func:`robust_sort` repeatedly (1) samples random triples and throws away any
directed triangle it finds, (2) looks for a pivot whose sampled split is
balanced, (3) checks that pivot against random pairs for triangles, and only
then (4) partitions and recurses. A triangle always contains at least one bad
element, so each removal pays for itself; a pivot that survives step (3) is
involved in few triangles and cannot misplace much. :func:`triangle_removal_sort`
is the all-pairs baseline and also handles tiny subproblems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigurationError, InvalidInputError, ResourceLimitError
from .permutation import lis_length
from . import _kernels
from .tournament import LedgerSnapshot, PlantedOrderInstance, TournamentOracle, first_triangle

__all__ = [
    "PAPER_CONSTANTS",
    "PRACTICAL_CONSTANTS",
    "RobustSortConfig",
    "Budgets",
    "OrderingResult",
    "LossReport",
    "robust_sort",
    "triangle_removal_sort",
    "evaluate",
    "RobustSorter",
]

PAPER_CONSTANTS = {"c_k": 10000.0, "c_tri": 72.0, "c_pivot": 36.0, "c_kprime": 1e5}
PRACTICAL_CONSTANTS = {"c_k": 2.0, "c_tri": 8.0, "c_pivot": 36.0, "c_kprime": 64.0}

TRIANGLE_REMOVAL_MAX_N = 5000
_CHUNK_MIN = 4096
_CHUNK_MAX = 1 << 16


@dataclass(frozen=True)
class Budgets:
    """Loop bounds for one run, all derived from the universe size ``N``."""

    log_n: float
    k: float
    pair_tests: int
    triple_tests: int
    pivot_attempts: int
    sample_size: int
    cutoff: int

    def is_balanced(self, n_left: int, n_right: int) -> bool:
        # min > k'/5 + k'/40  <=>  40 * min > 9 * k'
        return 40 * min(n_left, n_right) > 9 * self.sample_size


@dataclass(frozen=True)
class RobustSortConfig:
    """Coefficients of the sorter's sampling budgets.

    With ``L = log2 N``: ``k = (c_k L / epsilon)^2`` pivot pair tests,
    ``c_tri k L`` pre-pivot triple tests, ``c_pivot L`` pivot attempts, and
    ``c_kprime L`` samples per balance check. Unset coefficients take the
    published values in ``paper`` mode and desk-scale values in
    ``practical`` mode. Paper mode refuses any other coefficients.
    """

    epsilon: float = 0.5
    mode: str = "practical"
    c_k: float | None = None
    c_tri: float | None = None
    c_pivot: float | None = None
    c_kprime: float | None = None
    small_cutoff: int | None = None
    max_loop_budget: int = 10**9

    def __post_init__(self):
        if self.mode not in ("paper", "practical"):
            raise ConfigurationError(f"mode must be 'paper' or 'practical', got {self.mode!r}")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        base = PAPER_CONSTANTS if self.mode == "paper" else PRACTICAL_CONSTANTS
        for name, value in base.items():
            current = getattr(self, name)
            if current is None:
                object.__setattr__(self, name, value)
            elif not current > 0:
                raise ConfigurationError(f"{name} must be positive")
            elif self.mode == "paper" and float(current) != value:
                raise ConfigurationError(f"paper mode fixes {name} = {value:g}")
        if self.small_cutoff is not None and self.small_cutoff < 1:
            raise ConfigurationError("small_cutoff must be at least 1")

    @classmethod
    def paper(cls, epsilon: float = 0.5, **kw) -> RobustSortConfig:
        return cls(epsilon=epsilon, mode="paper", **kw)

    @classmethod
    def practical(cls, epsilon: float = 0.5, **kw) -> RobustSortConfig:
        return cls(epsilon=epsilon, mode="practical", **kw)

    def budgets(self, N: int) -> Budgets:
        log_n = math.log2(max(N, 2))
        k = (self.c_k * log_n / self.epsilon) ** 2
        cutoff = self.small_cutoff
        if cutoff is None:
            cutoff = max(8, math.ceil(self.epsilon ** (-2.0 / 3.0)))
        return Budgets(
            log_n=log_n,
            k=k,
            pair_tests=math.ceil(k),
            triple_tests=math.ceil(self.c_tri * k * log_n),
            pivot_attempts=math.ceil(self.c_pivot * log_n),
            sample_size=math.ceil(self.c_kprime * log_n),
            cutoff=cutoff,
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class OrderingResult:
    """What a sort returns: an ordering of the kept elements and the rest.

    ``full_order`` appends the discarded elements in ascending id order, which
    gives an ordering of every input element.
    """

    order: np.ndarray
    discarded: np.ndarray
    queries: LedgerSnapshot
    recursion_depth: int = 0
    triangles_removed: int = 0
    wholesale_discards: int = 0
    while_iterations: int = 0
    epsilon: float = 0.0

    @property
    def full_order(self) -> np.ndarray:
        return np.concatenate([self.order, np.sort(self.discarded)])

    @property
    def elements(self) -> np.ndarray:
        return np.sort(self.full_order)

    def to_dict(self) -> dict:
        return {
            "order": self.order.tolist(),
            "discarded": np.sort(self.discarded).tolist(),
            "queries": self.queries.to_dict(),
            "recursion_depth": self.recursion_depth,
            "triangles_removed": self.triangles_removed,
            "wholesale_discards": self.wholesale_discards,
            "while_iterations": self.while_iterations,
        }


@dataclass(frozen=True)
class LossReport:
    """Distance of a result from the planted order.

    ``loss`` is ``n - lcs(pi, full_order)``; ``order_loss`` scores the kept
    ordering alone, counting every discarded element as lost; ``good_loss``
    counts kept elements outside the longest run of good elements that is
    sorted as in ``pi``.
    """

    n: int
    b: int
    lcs_with_pi: int
    loss: int
    order_loss: int
    good_loss: int
    bound_3eps: float

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _as_elements(oracle: TournamentOracle, elements) -> np.ndarray:
    if elements is None:
        return oracle.elements.copy()
    arr = np.asarray(elements, dtype=np.int64).ravel()
    if np.unique(arr).size != arr.size:
        raise InvalidInputError("elements must be distinct")
    if arr.size and not oracle.contains(arr):
        raise InvalidInputError("elements must belong to the oracle's universe")
    return np.sort(arr)


def _triangle_removal(oracle: TournamentOracle, S: np.ndarray):
    """All-pairs scan on sorted ``S``; returns (order, removed, n_triangles)."""
    m = S.size
    if m < 3:
        adj = oracle.adjacency(S)
        return S[np.argsort(-adj.sum(axis=1), kind="stable")].tolist(), [], 0
    adj = oracle.adjacency(S)
    alive = np.ones(m, dtype=bool)
    idx = np.arange(m)
    removed: list[int] = []
    triangles = 0
    for i in range(m - 2):
        if not alive[i]:
            continue
        later = alive & (idx > i)
        js = idx[later & adj[i]]
        ks = idx[later & adj[:, i]]
        if js.size == 0 or ks.size == 0:
            continue
        # i -> j -> k -> i
        jj, kk = np.nonzero(adj[np.ix_(js, ks)])
        if jj.size == 0:
            continue
        lo = np.minimum(js[jj], ks[kk])
        hi = np.maximum(js[jj], ks[kk])
        best = np.lexsort((hi, lo))[0]
        for t in (i, int(lo[best]), int(hi[best])):
            alive[t] = False
            removed.append(int(S[t]))
        triangles += 1
    keep = idx[alive]
    wins = adj[np.ix_(keep, keep)].sum(axis=1)
    order = S[keep[np.argsort(-wins, kind="stable")]].tolist()
    return order, removed, triangles


class _Sorter:
    def __init__(self, oracle: TournamentOracle, budgets: Budgets):
        self.oracle = oracle
        self.spec = oracle.arc_spec()
        self.b = budgets
        self.discarded: list[int] = []
        self.triangles = 0
        self.wholesale = 0
        self.iterations = 0
        self.max_depth = 0

    def _triangle_search(self, S, rng, tests: int, apex=None):
        """Run up to ``tests`` random triangle tests; return the hit triple or None."""
        if self.spec is not None:
            # Tests that repeat an element cost nothing and never hit, so only
            # the Binomial number of distinct-element tests is actually run.
            m = S.size
            distinct = (m - 1) / m if apex is not None else (m - 1) * (m - 2) / (m * m)
            tests = int(rng.binomial(tests, distinct)) if distinct > 0 else 0
            if tests == 0:
                return None
            ledger = self.oracle.ledger
            state = int(rng.integers(0, 2**63))
            x, y, z, q = _kernels.random_search(
                self.spec, S, tests, -1 if apex is None else apex, state,
                ledger.seen_buffer(), ledger.track_distinct)
            ledger.charge(q)
            return None if x < 0 else (int(x), int(y), int(z))
        m = S.size
        left = tests
        chunk = _CHUNK_MIN
        while left > 0:
            c = min(chunk, left)
            x = S[rng.integers(0, m, size=c)]
            y = S[rng.integers(0, m, size=c)]
            z = S[rng.integers(0, m, size=c)] if apex is None else np.full(c, apex, dtype=np.int64)
            hit = first_triangle(self.oracle, x, y, z)
            if hit >= 0:
                return int(x[hit]), int(y[hit]), int(z[hit])
            left -= c
            chunk = min(chunk * 2, _CHUNK_MAX)
        return None

    def _drop(self, S, triple):
        self.discarded.extend(triple)
        self.triangles += 1
        return S[~np.isin(S, triple)]

    def sort(self, S: np.ndarray, rng: np.random.Generator, depth: int) -> list[int]:
        self.max_depth = max(self.max_depth, depth)
        b = self.b
        oracle = self.oracle
        while S.size:
            self.iterations += 1
            if S.size <= b.cutoff:
                order, removed, t = _triangle_removal(oracle, S)
                self.discarded.extend(removed)
                self.triangles += t
                return order

            tri = self._triangle_search(S, rng, b.triple_tests)
            if tri is not None:
                S = self._drop(S, tri)
                continue

            restart = False
            for _ in range(b.pivot_attempts):
                at = int(rng.integers(0, S.size))
                p = int(S[at])
                rest = np.delete(S, at)
                sample = rest[rng.integers(0, rest.size, size=b.sample_size)]
                n_left = int(oracle.less(sample, np.full(sample.size, p)).sum())
                if not b.is_balanced(n_left, sample.size - n_left):
                    continue
                tri = self._triangle_search(rest, rng, b.pair_tests, apex=p)
                if tri is not None:
                    S = self._drop(S, tri)
                    restart = True
                    break
                lt = oracle.less(rest, np.full(rest.size, p))
                left_rng, right_rng = rng.spawn(2)
                return (self.sort(rest[lt], left_rng, depth + 1) + [p]
                        + self.sort(rest[~lt], right_rng, depth + 1))
            if restart:
                continue
            self.discarded.extend(S.tolist())
            self.wholesale += 1
            return []
        return []


def robust_sort(oracle: TournamentOracle, elements=None, config: RobustSortConfig | None = None,
                seed=None) -> OrderingResult:
    """Sort ``elements`` (default: the oracle's whole universe) against ``oracle``.

    The budgets use ``N = oracle.n``. One generator is seeded from ``seed``;
    each recursive call gets two children spawned from its parent, so the
    whole recursion tree is reproducible.
    """
    cfg = config or RobustSortConfig()
    S = _as_elements(oracle, elements)
    budgets = cfg.budgets(oracle.n)
    if S.size > budgets.cutoff and budgets.triple_tests > cfg.max_loop_budget:
        raise ResourceLimitError(
            f"{budgets.triple_tests} triple tests per round exceeds max_loop_budget={cfg.max_loop_budget}; "
            "paper-mode constants are only practical for tiny inputs")
    start = oracle.ledger.snapshot()
    sorter = _Sorter(oracle, budgets)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    order = sorter.sort(S, rng, 0)
    return OrderingResult(
        order=np.asarray(order, dtype=np.int64),
        discarded=np.sort(np.asarray(sorter.discarded, dtype=np.int64)),
        queries=oracle.ledger.snapshot() - start,
        recursion_depth=sorter.max_depth,
        triangles_removed=sorter.triangles,
        wholesale_discards=sorter.wholesale,
        while_iterations=sorter.iterations,
        epsilon=cfg.epsilon,
    )


def triangle_removal_sort(oracle: TournamentOracle, elements=None) -> OrderingResult:
    """Query every pair, strip directed triangles, and order what is left.

    Triangles are removed in lexicographic order of their sorted element ids;
    the remaining tournament is acyclic and is ordered by number of wins.
    """
    S = _as_elements(oracle, elements)
    if S.size > TRIANGLE_REMOVAL_MAX_N:
        raise ResourceLimitError(f"triangle removal is quadratic; n={S.size} > {TRIANGLE_REMOVAL_MAX_N}")
    start = oracle.ledger.snapshot()
    if S.size == 0:
        order, removed, t = [], [], 0
    else:
        order, removed, t = _triangle_removal(oracle, S)
    return OrderingResult(
        order=np.asarray(order, dtype=np.int64),
        discarded=np.sort(np.asarray(removed, dtype=np.int64)),
        queries=oracle.ledger.snapshot() - start,
        triangles_removed=t,
        while_iterations=1 if S.size else 0,
    )


def evaluate(result: OrderingResult, instance: PlantedOrderInstance, epsilon: float | None = None) -> LossReport:
    """Score ``result`` against the planted order of ``instance``."""
    full = result.full_order
    if full.size != instance.n or not np.array_equal(np.sort(full), np.arange(instance.n)):
        raise InvalidInputError("result does not cover the instance's elements exactly once")
    rank = instance.rank
    lcs = lis_length(rank[full].tolist())
    order = result.order
    kept_good = order[~instance.bad_mask[order]]
    eps = result.epsilon if epsilon is None else epsilon
    return LossReport(
        n=instance.n,
        b=instance.b,
        lcs_with_pi=lcs,
        loss=instance.n - lcs,
        order_loss=instance.n - lis_length(rank[order].tolist()),
        good_loss=int(order.size) - lis_length(rank[kept_good].tolist()),
        bound_3eps=(3 + eps) * instance.b,
    )


class RobustSorter(BaseEstimator):
    """Estimator wrapper around :func:`robust_sort`.

    ``fit`` takes a :class:`~robust_order.tournament.TournamentOracle` in place
    of a feature matrix and stores the ordering in ``order_``, the dropped
    elements in ``discarded_``, and the full result in ``result_``.

    >>> from robust_order.tournament import MatrixOracle
    >>> RobustSorter(random_state=0).fit(MatrixOracle.from_order([2, 0, 1])).order_.tolist()
    [2, 0, 1]
    """

    def __init__(self, epsilon=0.5, mode="practical", c_k=None, c_tri=None, c_pivot=None,
                 c_kprime=None, small_cutoff=None, random_state=None):
        self.epsilon = epsilon
        self.mode = mode
        self.c_k = c_k
        self.c_tri = c_tri
        self.c_pivot = c_pivot
        self.c_kprime = c_kprime
        self.small_cutoff = small_cutoff
        self.random_state = random_state

    def _config(self) -> RobustSortConfig:
        return RobustSortConfig(epsilon=self.epsilon, mode=self.mode, c_k=self.c_k, c_tri=self.c_tri,
                                c_pivot=self.c_pivot, c_kprime=self.c_kprime,
                                small_cutoff=self.small_cutoff)

    def fit(self, oracle, elements=None):
        if not isinstance(oracle, TournamentOracle):
            raise InvalidInputError("RobustSorter.fit expects a TournamentOracle")
        self.result_ = robust_sort(oracle, elements, self._config(), self.random_state)
        self.order_ = self.result_.order
        self.discarded_ = self.result_.discarded
        self.full_order_ = self.result_.full_order
        self.n_queries_ = self.result_.queries.total_queries
        return self

    def score(self, instance: PlantedOrderInstance) -> float:
        """Negative loss against a planted instance (higher is better)."""
        check_is_fitted(self, "result_")
        return -float(evaluate(self.result_, instance).loss)
