"""Ulam-metric median clustering built on robust sorting.

``ulam1`` turns a small random sample into a short list of candidate
centers: three sampled points as they are, plus one permutation obtained by
robustly sorting the symbols under a 3-of-5 majority vote of five more
sampled points. ``ulamk`` grows center sets one candidate at a time, drawing
each new sample with D-sampling (probability proportional to the distance to
the nearest center chosen so far), and keeps the cheapest complete set.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from ._kernels import ARC_TABLE
from .exceptions import ConfigurationError, InvalidInputError, ResourceLimitError
from .permutation import Permutation, as_permutation_array, ulam_distances
from .robust_sort import RobustSortConfig, robust_sort
from .tournament import TournamentOracle

__all__ = [
    "EPS_SYM",
    "C3",
    "ALPHA",
    "C1",
    "C2",
    "C4",
    "ETA_THEORY",
    "constant_constraints",
    "Ulam1Config",
    "UlamKConfig",
    "ClusteringSolution",
    "MajorityOracle",
    "majority_comparator",
    "objective",
    "assign",
    "ulam1",
    "d_sample_distribution",
    "sample_centers",
    "ulamk",
    "UlamKMedian",
]

EPS_SYM = Fraction(1, 41)
C3 = Fraction(1, 11)
ALPHA = C3 * EPS_SYM / 6
C1 = C2 = C4 = C3 * EPS_SYM / 10
ETA_THEORY = 16 * 10**12

POINTS_PER_TRIAL = 8
MAX_K = 10
MAX_LEAVES = 10**6
_MAJORITY_TABLE_MAX_D = 2048


def constant_constraints() -> dict[str, tuple[Fraction, Fraction, bool]]:
    """Evaluate the constraints the published constants are meant to satisfy.

    Each entry maps a short name to ``(lhs, rhs, holds)`` in exact arithmetic.
    """
    a, c1, c2, c3, c4, eps = ALPHA, C1, C2, C3, C4, EPS_SYM
    checks = {
        "alpha_lower": (a, Fraction(1, 10000), a >= Fraction(1, 10000)),
        "alpha_upper": (a, Fraction(1, 3), a <= Fraction(1, 3)),
        "c2_range": (c2, Fraction(1, 3), 0 < c2 <= Fraction(1, 3)),
    }
    lhs = 2 - (3 * a * c2 / 8) ** 2
    rhs = 2 - Fraction(1, 10**10)
    checks["gap_square"] = (lhs, rhs, lhs <= rhs)
    lhs = a / (2 + a) * (1 - 1 / (1 + 3 * a * c2 / 16))
    checks["gap_ratio"] = (lhs, Fraction(1, 10**12), lhs >= Fraction(1, 10**12))
    lhs = (c3 * eps * (1 + 3 * a) - 3 * a) * (1 - c2 - c1 * (1 - a)) - c1 * (1 + a)
    checks["case_margin"] = (lhs, Fraction(1, 10000), lhs >= Fraction(1, 10000))
    lhs = (1 - c2 - c1 * (1 - a)) / (1 + a) - c4
    checks["half_bound"] = (lhs, Fraction(1, 2), lhs >= Fraction(1, 2))
    lhs = c3 / (1 - a)
    checks["c3_bound"] = (lhs, Fraction(1, 10), lhs <= Fraction(1, 10))
    lhs = 40 * eps * (1 + a)
    checks["sort_bound"] = (lhs, Fraction(999, 1000), lhs <= Fraction(999, 1000))
    return checks


@dataclass(frozen=True)
class Ulam1Config:
    """``trials`` rounds of eight points each; the published constants ride along read-only."""

    trials: int = 4
    seed: int | None = None
    eps_sym: Fraction = field(default=EPS_SYM, init=False)
    c3: Fraction = field(default=C3, init=False)
    alpha: Fraction = field(default=ALPHA, init=False)
    c1: Fraction = field(default=C1, init=False)
    c2: Fraction = field(default=C2, init=False)
    c4: Fraction = field(default=C4, init=False)

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError("trials must be at least 1")


@dataclass(frozen=True)
class UlamKConfig:
    """Budgets for :func:`ulamk`.

    Each recursion level D-samples ``n_sample`` points (default
    ``eta * trials * k``), looks at ``subset_budget`` random subsets of
    ``eta * trials`` of them, and branches on every candidate ULAM1 returns.
    ``eps`` only feeds :attr:`theory_sample_size`.
    """

    k: int
    eta: int = POINTS_PER_TRIAL
    trials: int = 1
    eps: Fraction = Fraction(1, 2)
    n_sample: int | None = None
    subset_budget: int = 2
    outer_repeats: int | None = None
    seed: int = 0
    dedupe: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ConfigurationError("k must be at least 1")
        if self.k > MAX_K:
            raise ResourceLimitError(f"k={self.k} exceeds the desk-scale guard k <= {MAX_K}")
        if self.eta < POINTS_PER_TRIAL:
            raise ConfigurationError(f"eta must be at least {POINTS_PER_TRIAL}")
        if self.trials < 1 or self.subset_budget < 1:
            raise ConfigurationError("trials and subset_budget must be at least 1")
        if self.n_sample is not None and self.n_sample < self.subset_size:
            raise ConfigurationError(f"n_sample must be at least eta * trials = {self.subset_size}")
        if self.outer_repeats is not None and self.outer_repeats < 1:
            raise ConfigurationError("outer_repeats must be at least 1")

    @property
    def subset_size(self) -> int:
        return self.eta * self.trials

    @property
    def sample_size(self) -> int:
        return self.n_sample if self.n_sample is not None else self.subset_size * self.k

    @property
    def repeats(self) -> int:
        return self.outer_repeats if self.outer_repeats is not None else min(2**self.k, 64)

    @property
    def theory_sample_size(self) -> Fraction:
        return 16 * self.eta * self.k / Fraction(self.eps) ** 2

    def to_dict(self) -> dict:
        return {
            "k": self.k, "eta": self.eta, "trials": self.trials, "eps": str(Fraction(self.eps)),
            "n_sample": self.sample_size, "subset_budget": self.subset_budget,
            "outer_repeats": self.repeats, "seed": self.seed, "dedupe": self.dedupe,
        }


@dataclass
class ClusteringSolution:
    centers: list[Permutation]
    objective: int
    assignment: np.ndarray
    n_solutions: int = 0

    def to_dict(self) -> dict:
        return {
            "centers": [c.tolist() for c in self.centers],
            "objective": int(self.objective),
            "per_point_assignment": self.assignment.tolist(),
        }


class MajorityOracle(TournamentOracle):
    """Tournament on symbols ``1..d``: ``a`` beats ``b`` when ``a`` is first in at least 3 of 5 votes."""

    def __init__(self, five, *, track_distinct: bool = True):
        perms = [p if isinstance(p, Permutation) else Permutation(p) for p in five]
        if len(perms) != 5:
            raise InvalidInputError(f"majority comparator needs exactly 5 permutations, got {len(perms)}")
        d = perms[0].d
        if any(p.d != d for p in perms):
            raise InvalidInputError("majority comparator permutations must share d")
        super().__init__(np.arange(1, d + 1), track_distinct=track_distinct)
        self.voters = perms
        self._pos = np.stack([p.inverse for p in perms])
        self._table = None
        if d <= _MAJORITY_TABLE_MAX_D:
            # all arcs at once; charging still happens per query in less()
            votes = sum((p[:, None] < p[None, :]).astype(np.int8) for p in self._pos)
            self._table = votes >= 3

    def _less(self, u, v):
        if self._table is not None:
            return self._table[u, v]
        return (self._pos[:, u] < self._pos[:, v]).sum(axis=0) >= 3

    def _arc_spec(self):
        if self._table is None:
            return None
        return (ARC_TABLE, None, None, self._table, None, None, 0)


def majority_comparator(five) -> MajorityOracle:
    return MajorityOracle(five)


def _points(S, d=None) -> np.ndarray:
    return as_permutation_array(S, d=d)


def _centers(C) -> list[Permutation]:
    if isinstance(C, Permutation):
        return [C]
    return [c if isinstance(c, Permutation) else Permutation(c) for c in C]


def assign(S, C) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-center index (lowest index on ties) and distance for every point."""
    centers = _centers(C)
    if not centers:
        raise InvalidInputError("at least one center is required")
    X = _points(S)
    if X.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    D = np.stack([ulam_distances(X, c) for c in centers], axis=1)
    labels = np.argmin(D, axis=1)
    return labels, D[np.arange(X.shape[0]), labels]


def objective(S, C) -> int:
    """Sum over points of the Ulam distance to the nearest center.

    >>> objective([[1, 2, 3], [2, 1, 3]], [[1, 2, 3]])
    1
    """
    return int(assign(S, C)[1].sum())


def _complete(result) -> Permutation:
    return Permutation(result.full_order)


def _ulam1_candidates(points: list[Permutation], trials: int, rs_cfg, seeds) -> list[Permutation]:
    out: list[Permutation] = []
    for t in range(trials):
        y = points[POINTS_PER_TRIAL * t: POINTS_PER_TRIAL * (t + 1)]
        out.extend(y[:3])
        oracle = MajorityOracle(y[3:8], track_distinct=False)
        out.append(_complete(robust_sort(oracle, config=rs_cfg, seed=seeds(t))))
    return out


def ulam1(X, cfg: Ulam1Config | None = None, rs_cfg: RobustSortConfig | None = None) -> list[Permutation]:
    """Candidate 1-median centers from a random sample ``X``.

    Every trial consumes the next eight points ``y1..y8`` and emits ``y1``,
    ``y2``, ``y3`` and the robust sort of the symbols under the majority of
    ``y4..y8``. Returns ``4 * trials`` candidates, unevaluated.
    """
    cfg = cfg or Ulam1Config()
    rs_cfg = rs_cfg or RobustSortConfig()
    arr = _points(X)
    need = POINTS_PER_TRIAL * cfg.trials
    if arr.shape[0] < need:
        raise InvalidInputError(f"ulam1 needs at least {need} points for {cfg.trials} trials, got {arr.shape[0]}")
    points = [Permutation(row) for row in arr[:need]]
    base = np.random.SeedSequence(cfg.seed)
    children = base.spawn(cfg.trials)
    return _ulam1_candidates(points, cfg.trials, rs_cfg, lambda t: np.random.default_rng(children[t]))


def d_sample_distribution(S, C) -> list[Fraction]:
    """Exact D-sampling probabilities of the points of ``S`` given centers ``C``.

    Uniform when ``C`` is empty or every point already sits on a center.
    """
    X = _points(S)
    n = X.shape[0]
    if n == 0:
        raise InvalidInputError("cannot D-sample from an empty set")
    centers = _centers(C)
    if not centers:
        return [Fraction(1, n)] * n
    dist = assign(X, centers)[1]
    total = int(dist.sum())
    if total == 0:
        return [Fraction(1, n)] * n
    return [Fraction(int(x), total) for x in dist]


def _d_sample(weights: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn with probability proportional to integer ``weights``."""
    total = int(weights.sum())
    if total == 0:
        return rng.integers(0, weights.size, size=size)
    cum = np.cumsum(weights)
    return np.searchsorted(cum, rng.integers(0, total, size=size), side="right")


class _Search:
    """State shared by one :func:`ulamk` call: the data, distance cache and budgets."""

    def __init__(self, X: np.ndarray, cfg: UlamKConfig, rs_cfg: RobustSortConfig):
        self.X = X
        self.cfg = cfg
        self.rs_cfg = rs_cfg
        self.rows = [Permutation(r) for r in X]
        self._dist: dict[Permutation, np.ndarray] = {}

    def dist(self, c: Permutation) -> np.ndarray:
        vec = self._dist.get(c)
        if vec is None:
            vec = ulam_distances(self.X, c)
            self._dist[c] = vec
        return vec

    def rng(self, tag: int, path: tuple[int, ...]) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.cfg.seed, spawn_key=(tag, *path)))

    def recurse(self, depth, centers, nearest, path, sink):
        cfg = self.cfg
        if depth == cfg.k:
            sink.append(tuple(centers))
            return
        n = self.X.shape[0]
        weights = nearest if centers else np.ones(n, dtype=np.int64)
        T = _d_sample(weights, cfg.sample_size, self.rng(0, path))
        seen: set[Permutation] = set()
        for j in range(cfg.subset_budget):
            pick = self.rng(1, (*path, j)).choice(T.size, size=cfg.subset_size, replace=False)
            points = [self.rows[i] for i in T[pick]]
            cands = _ulam1_candidates(points, cfg.trials, self.rs_cfg,
                                      lambda t, j=j: self.rng(2, (*path, j, t)))
            for ci, c in enumerate(cands):
                if cfg.dedupe:
                    if c in seen:
                        continue
                    seen.add(c)
                vec = self.dist(c)
                closer = vec if not centers else np.minimum(nearest, vec)
                self.recurse(depth + 1, [*centers, c], closer, (*path, j, ci), sink)


def sample_centers(S, k: int, cfg: UlamKConfig, depth: int = 0, C=(), sink: list | None = None,
                   rs_cfg: RobustSortConfig | None = None, path: tuple[int, ...] = (0,)) -> list:
    """Grow ``C`` to ``k`` centers along every sampled branch; append each set to ``sink``."""
    if k != cfg.k:
        cfg = replace(cfg, k=k)
    if depth > k:
        raise InvalidInputError(f"depth {depth} exceeds k={k}")
    X = _points(S)
    search = _Search(X, cfg, rs_cfg or RobustSortConfig())
    centers = _centers(C)
    if centers:
        nearest = np.min(np.stack([search.dist(c) for c in centers]), axis=0)
    else:
        nearest = np.zeros(X.shape[0], dtype=np.int64)
    sink = [] if sink is None else sink
    search.recurse(depth, centers, nearest, tuple(path), sink)
    return sink


def _check_branching(cfg: UlamKConfig) -> None:
    branching = cfg.subset_budget * 4 * cfg.trials
    if branching**cfg.k > MAX_LEAVES:
        raise ResourceLimitError(
            f"search tree would have up to {branching}^{cfg.k} leaves; "
            f"lower subset_budget/trials or k (limit {MAX_LEAVES})")


def ulamk(S, cfg: UlamKConfig, rs_cfg: RobustSortConfig | None = None) -> ClusteringSolution:
    """Best center set over ``cfg.repeats`` independent runs of :func:`sample_centers`."""
    X = _points(S)
    if X.shape[0] == 0:
        raise InvalidInputError("ulamk needs at least one point")
    _check_branching(cfg)
    search = _Search(X, cfg, rs_cfg or RobustSortConfig())
    sink: list[tuple[Permutation, ...]] = []
    zero = np.zeros(X.shape[0], dtype=np.int64)
    for r in range(cfg.repeats):
        search.recurse(0, [], zero, (r,), sink)
    best, best_cost = None, None
    for centers in sink:
        cost = int(np.min(np.stack([search.dist(c) for c in centers]), axis=0).sum())
        if best_cost is None or cost < best_cost:
            best, best_cost = centers, cost
    labels, _ = assign(X, best)
    return ClusteringSolution(list(best), best_cost, labels, n_solutions=len(sink))


class UlamKMedian(ClusterMixin, BaseEstimator):
    """k-median clustering of permutations under the Ulam distance.

    ``X`` is an ``(n, d)`` integer array whose rows are permutations of
    ``1..d``. After ``fit``: ``cluster_centers_`` (``(k, d)`` array),
    ``labels_``, ``objective_`` and the full ``solution_``.
    """

    def __init__(self, n_clusters=2, *, eta=POINTS_PER_TRIAL, trials=1, subset_budget=2,
                 n_sample=None, n_repeats=None, epsilon=0.5, mode="practical", random_state=0):
        self.n_clusters = n_clusters
        self.eta = eta
        self.trials = trials
        self.subset_budget = subset_budget
        self.n_sample = n_sample
        self.n_repeats = n_repeats
        self.epsilon = epsilon
        self.mode = mode
        self.random_state = random_state

    def _configs(self):
        seed = self.random_state
        if isinstance(seed, np.random.Generator) or seed is None:
            seed = int(np.random.default_rng(seed).integers(0, 2**32))
        cfg = UlamKConfig(k=self.n_clusters, eta=self.eta, trials=self.trials,
                          subset_budget=self.subset_budget, n_sample=self.n_sample,
                          outer_repeats=self.n_repeats, seed=int(seed))
        return cfg, RobustSortConfig(epsilon=self.epsilon, mode=self.mode)

    def fit(self, X, y=None):
        X = _points(X)
        cfg, rs_cfg = self._configs()
        self.solution_ = ulamk(X, cfg, rs_cfg)
        self.cluster_centers_ = np.stack([c.symbols for c in self.solution_.centers])
        self.labels_ = self.solution_.assignment
        self.objective_ = self.solution_.objective
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        """Ulam distance from each row to each center, shape ``(n, k)``."""
        check_is_fitted(self, "cluster_centers_")
        X = _points(X, d=self.n_features_in_)
        return np.stack([ulam_distances(X, Permutation(c)) for c in self.cluster_centers_], axis=1)

    def predict(self, X):
        return np.argmin(self.transform(X), axis=1)

    def score(self, X, y=None):
        return -float(self.transform(X).min(axis=1).sum())
