"""Tournament oracles, query accounting, and planted adversarial instances.

A tournament oracle answers "is ``u`` before ``v``?" for any two distinct
elements, always the same way for the same pair, and never both ways. The
sorting code only sees the order through an oracle, so every answer it
consumes goes through the oracle's :class:`QueryLedger`.

Arcs are read in bulk with numpy arrays: ``oracle.less(u, v)`` answers
``u[i] < v[i]`` for every ``i`` and charges one query per pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import _kernels
from .exceptions import ConfigurationError, InvalidInputError

__all__ = [
    "Adversary",
    "QueryLedger",
    "LedgerSnapshot",
    "TournamentOracle",
    "MatrixOracle",
    "PlantedOrderInstance",
    "PlantedOracle",
    "generate_instance",
    "make_planted_oracle",
    "first_triangle",
]


class Adversary(str, Enum):
    RANDOM_FLIP = "random-flip"
    SHIFTED_RANK = "shifted-rank"
    SPLIT_HALF = "split-half"
    MAX_PRETENDER = "max-pretender"

    @classmethod
    def parse(cls, value) -> Adversary:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value))
        except ValueError:
            names = ", ".join(a.value for a in cls)
            raise ConfigurationError(f"unknown adversary {value!r}; expected one of {names}") from None


@dataclass(frozen=True)
class LedgerSnapshot:
    total_queries: int = 0
    distinct_pairs: int = 0

    def __sub__(self, other: LedgerSnapshot) -> LedgerSnapshot:
        return LedgerSnapshot(
            self.total_queries - other.total_queries,
            self.distinct_pairs - other.distinct_pairs,
        )

    def to_dict(self) -> dict:
        return {"total_queries": self.total_queries, "distinct_pairs": self.distinct_pairs}


_NO_SEEN = np.zeros(1, dtype=bool)
_NO_TABLE = np.zeros((1, 1), dtype=bool)
_NO_INT = np.zeros(1, dtype=np.int64)
_NO_BOOL = np.zeros(1, dtype=bool)


class QueryLedger:
    """Counts every query, and separately the number of distinct unordered pairs.

    Distinct pairs are tracked in a bitmap over ``size * size`` keys plus one
    scratch slot that kernels may write to, allocated on first use. A ledger belongs to one oracle and is not synchronized: an
    oracle must be used by one sorting run at a time.
    """

    def __init__(self, size: int, track_distinct: bool = True):
        self.size = int(size)
        self.track_distinct = track_distinct
        self.total_queries = 0
        self._seen: np.ndarray | None = None
        self._distinct = 0
        self._dirty = False

    def record(self, u, v) -> None:
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        self.total_queries += int(u.size)
        if self.track_distinct and u.size:
            if self._seen is None:
                self._seen = np.zeros(self.size * self.size + 1, dtype=bool)
            lo = np.minimum(u, v)
            hi = np.maximum(u, v)
            self._seen[lo * self.size + hi] = True
            self._dirty = True

    def charge(self, count: int, seen_touched: bool = True) -> None:
        """Add ``count`` queries already marked in :meth:`seen_buffer` by a kernel."""
        self.total_queries += int(count)
        if count and self.track_distinct and seen_touched:
            self._dirty = True

    def seen_buffer(self) -> np.ndarray:
        """The distinct-pair bitmap for kernels to write into (a dummy when not tracking)."""
        if not self.track_distinct:
            return _NO_SEEN
        if self._seen is None:
            self._seen = np.zeros(self.size * self.size + 1, dtype=bool)
        return self._seen

    @property
    def distinct_pairs(self) -> int:
        if self._dirty:
            self._distinct = int(np.count_nonzero(self._seen[:-1]))
            self._dirty = False
        return self._distinct

    def snapshot(self) -> LedgerSnapshot:
        return LedgerSnapshot(self.total_queries, self.distinct_pairs if self.track_distinct else 0)

    def reset(self) -> None:
        self.total_queries = 0
        self._seen = None
        self._distinct = 0
        self._dirty = False


class TournamentOracle:
    """Base class: a persistent, antisymmetric comparison source.

    Subclasses implement :meth:`_less`, the uncharged bulk arc lookup. Callers
    outside this module use :meth:`less` or :meth:`edge`, which charge the
    ledger.
    """

    def __init__(self, elements, *, track_distinct: bool = True):
        elements = np.unique(np.asarray(elements, dtype=np.int64))
        if elements.size and elements[0] < 0:
            raise InvalidInputError("element ids must be non-negative")
        self.elements = elements
        self.size = int(elements[-1]) + 1 if elements.size else 0
        self.ledger = QueryLedger(self.size, track_distinct=track_distinct)

    @property
    def n(self) -> int:
        return int(self.elements.size)

    def _less(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _arc_spec(self):
        """Arrays describing the arcs for the compiled kernels, or ``None``.

        Subclasses that return ``None`` are always queried through :meth:`_less`.
        """
        return None

    def arc_spec(self):
        spec = self._arc_spec()
        if spec is None:
            return None
        kind, key, bad, table, half, bad_index, hash_key = spec
        return (kind,
                _NO_INT if key is None else key,
                _NO_BOOL if bad is None else bad,
                _NO_TABLE if table is None else table,
                _NO_TABLE if half is None else half,
                _NO_INT if bad_index is None else bad_index,
                np.uint64(hash_key),
                self.size)

    def less(self, u, v) -> np.ndarray:
        """Bulk query: ``True`` where the arc points ``u[i] -> v[i]``."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        self.ledger.record(u, v)
        return self._less(u, v)

    def edge(self, u: int, v: int) -> bool:
        """Single query: ``True`` when the arc points ``u -> v``."""
        if u == v:
            raise InvalidInputError("a tournament has no self-loops")
        return bool(self.less(np.array([u]), np.array([v]))[0])

    def contains(self, elements) -> bool:
        return bool(np.isin(np.asarray(elements), self.elements).all())

    def adjacency(self, elements=None, *, charge: bool = True) -> np.ndarray:
        """Full boolean arc matrix over ``elements`` (row ``i`` beats column ``j``).

        Queries each unordered pair once.
        """
        elements = self.elements if elements is None else np.asarray(elements, dtype=np.int64)
        m = elements.size
        iu, ju = np.triu_indices(m, k=1)
        u, v = elements[iu], elements[ju]
        arcs = self.less(u, v) if charge else self._less(u, v)
        adj = np.zeros((m, m), dtype=bool)
        adj[iu, ju] = arcs
        adj[ju, iu] = ~arcs
        return adj


class MatrixOracle(TournamentOracle):
    """Oracle backed by an explicit ``n x n`` boolean arc matrix over ``0..n-1``."""

    def __init__(self, adjacency, *, track_distinct: bool = True):
        adj = np.asarray(adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise InvalidInputError("adjacency must be square")
        off = ~np.eye(adj.shape[0], dtype=bool)
        if not np.array_equal(adj[off], ~adj.T[off]):
            raise InvalidInputError("adjacency is not a tournament (needs exactly one arc per pair)")
        super().__init__(np.arange(adj.shape[0]), track_distinct=track_distinct)
        self._adj = adj

    @classmethod
    def from_order(cls, order) -> MatrixOracle:
        order = np.asarray(order, dtype=np.int64)
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        return cls(rank[:, None] < rank[None, :])

    def _less(self, u, v):
        return self._adj[u, v]

    def _arc_spec(self):
        return (_kernels.ARC_TABLE, None, None, self._adj, None, None, 0)


_M1 = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xBF58476D1CE4E5B9)
_M3 = np.uint64(0x94D049BB133111EB)


def _splitmix(x: np.ndarray) -> np.ndarray:
    z = x + _M1
    z = (z ^ (z >> np.uint64(30))) * _M2
    z = (z ^ (z >> np.uint64(27))) * _M3
    return z ^ (z >> np.uint64(31))


@dataclass
class PlantedOrderInstance:
    """Ground truth for a B-imperfect tournament.

    ``pi`` lists element ids from smallest to largest; ``bad`` holds the ids
    whose arcs may lie. Adversary arcs are a pure function of ``seed``, so
    they are never stored.
    """

    n: int
    pi: np.ndarray
    bad: np.ndarray
    adversary: Adversary
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=np.int64)
        self.bad = np.unique(np.asarray(self.bad, dtype=np.int64))
        self.adversary = Adversary.parse(self.adversary)
        if self.pi.shape != (self.n,) or not np.array_equal(np.sort(self.pi), np.arange(self.n)):
            raise InvalidInputError("pi must be a permutation of 0..n-1")
        if self.bad.size and (self.bad[0] < 0 or self.bad[-1] >= self.n):
            raise InvalidInputError("bad elements must be ids in 0..n-1")

    @property
    def b(self) -> int:
        return int(self.bad.size)

    @property
    def rank(self) -> np.ndarray:
        rank = np.empty(self.n, dtype=np.int64)
        rank[self.pi] = np.arange(self.n)
        return rank

    @property
    def bad_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.bad] = True
        return mask

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "pi": self.pi.tolist(),
            "bad": self.bad.tolist(),
            "adversary": {"name": self.adversary.value, **self.params},
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> PlantedOrderInstance:
        adv = doc["adversary"]
        if isinstance(adv, str):
            name, params = adv, {}
        else:
            params = dict(adv)
            name = params.pop("name")
        return cls(int(doc["n"]), doc["pi"], doc["bad"], name, int(doc["seed"]), params)

    @classmethod
    def from_json(cls, text: str) -> PlantedOrderInstance:
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> PlantedOrderInstance:
        return cls.from_json(Path(path).read_text())


class PlantedOracle(TournamentOracle):
    """The tournament of a :class:`PlantedOrderInstance`.

    Arcs between good elements follow ``pi``. Arcs touching a bad element are
    decided by the adversary; every random choice is drawn from the instance
    seed when the oracle is built, or hashed from ``(seed, pair)``, so repeat
    queries always agree.
    """

    def __init__(self, instance: PlantedOrderInstance, *, track_distinct: bool = True):
        super().__init__(np.arange(instance.n), track_distinct=track_distinct)
        self.instance = instance
        n = instance.n
        rank = instance.rank
        bad = instance.bad_mask
        self._bad = bad
        self._any_bad = bool(bad.any())
        adv = instance.adversary
        rng = np.random.default_rng([instance.seed, 0xAD5E])
        self._hash_key = np.uint64(int(rng.integers(0, 2**63)))
        self._half = None
        if adv is Adversary.SHIFTED_RANK:
            offset = instance.params.get("offset")
            fake = rank.copy()
            for e in instance.bad.tolist():
                if offset is not None:
                    fake[e] = (rank[e] + int(offset)) % n
                elif n > 1:
                    alt = int(rng.integers(0, n - 1))
                    fake[e] = alt + (alt >= rank[e])
            self._key = self._effective_rank(2 * rank + 1, 2 * fake, bad)
        elif adv is Adversary.MAX_PRETENDER:
            self._key = self._effective_rank(rank, rank + n, bad)
        else:
            self._key = rank
        if adv is Adversary.SPLIT_HALF and self._any_bad:
            # row i: the elements bad[i] claims to be greater than
            half = np.zeros((instance.b, n), dtype=bool)
            for i, e in enumerate(instance.bad.tolist()):
                others = np.delete(np.arange(n), e)
                half[i, rng.permutation(others)[: (n - 1) // 2]] = True
            self._half = half
            self._bad_index = np.full(n, -1, dtype=np.int64)
            self._bad_index[instance.bad] = np.arange(instance.b)

    def _arc_spec(self):
        adv = self.instance.adversary
        if not self._any_bad or adv in (Adversary.SHIFTED_RANK, Adversary.MAX_PRETENDER):
            return (_kernels.ARC_KEY, self._key, None, None, None, None, 0)
        if adv is Adversary.RANDOM_FLIP:
            return (_kernels.ARC_FLIP, self._key, self._bad, None, None, None, self._hash_key)
        return (_kernels.ARC_SPLIT, self._key, self._bad, None, self._half, self._bad_index, 0)

    @staticmethod
    def _effective_rank(good_key, bad_key, bad):
        key = np.where(bad, bad_key, good_key)
        order = np.lexsort((np.arange(key.size), key))
        eff = np.empty_like(order)
        eff[order] = np.arange(key.size)
        return eff

    def _less(self, u, v):
        out = self._key[u] < self._key[v]
        adv = self.instance.adversary
        if not self._any_bad or adv in (Adversary.SHIFTED_RANK, Adversary.MAX_PRETENDER):
            return out
        touched = self._bad[u] | self._bad[v]
        if not touched.any():
            return out
        tu, tv = u[touched], v[touched]
        if adv is Adversary.RANDOM_FLIP:
            lo = np.minimum(tu, tv).astype(np.uint64)
            hi = np.maximum(tu, tv).astype(np.uint64)
            coin = (_splitmix((lo * np.uint64(self.size) + hi) ^ self._hash_key) & np.uint64(1)).astype(bool)
            out[touched] = np.where(tu < tv, coin, ~coin)
        else:
            # the smaller bad id of the pair speaks for both
            u_owns = self._bad[tu] & (~self._bad[tv] | (tu < tv))
            owner = np.where(u_owns, tu, tv)
            other = np.where(u_owns, tv, tu)
            owner_greater = self._half[self._bad_index[owner], other]
            out[touched] = np.where(u_owns, ~owner_greater, owner_greater)
        return out


def generate_instance(n: int, b: int, adversary="random-flip", seed: int = 0, **params) -> PlantedOrderInstance:
    """Draw a uniform order and a uniform ``b``-subset of bad elements."""
    adversary = Adversary.parse(adversary)
    if n < 0 or not 0 <= b <= n:
        raise InvalidInputError(f"need 0 <= b <= n, got n={n}, b={b}")
    rng = np.random.default_rng(seed)
    pi = rng.permutation(n)
    bad = np.sort(rng.choice(n, size=b, replace=False)) if b else np.zeros(0, dtype=np.int64)
    return PlantedOrderInstance(n, pi, bad, adversary, seed, dict(params))


def make_planted_oracle(instance: PlantedOrderInstance, *, track_distinct: bool = True) -> PlantedOracle:
    return PlantedOracle(instance, track_distinct=track_distinct)


def first_triangle(oracle: TournamentOracle, x, y, z) -> int:
    """Test triples in order and return the index of the first directed triangle, or -1.

    Each test reads ``(x, y)``, then ``(y, z)``, and reads ``(z, x)`` only if a
    cycle is still possible. Triples with a repeated element cost nothing and
    never count as triangles. The ledger is charged exactly for the tests up to
    and including the hit, as if they were run one by one.
    """
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    spec = oracle.arc_spec()
    if spec is not None:
        ledger = oracle.ledger
        hit, q = _kernels.first_triangle(spec, x, y, z, ledger.seen_buffer(), ledger.track_distinct)
        ledger.charge(q)
        return int(hit)
    return _first_triangle_numpy(oracle, x, y, z)


def _first_triangle_numpy(oracle: TournamentOracle, x, y, z) -> int:
    distinct = (x != y) & (y != z) & (x != z)
    a = oracle._less(x, y)
    b = oracle._less(y, z)
    third = distinct & (a == b)
    c = oracle._less(z, x)
    hit = third & (b == c)
    hits = np.flatnonzero(hit)
    stop = int(hits[0]) + 1 if hits.size else x.size
    d, t = distinct[:stop], third[:stop]
    oracle.ledger.record(np.concatenate([x[:stop][d], y[:stop][d], z[:stop][t]]),
                         np.concatenate([y[:stop][d], z[:stop][d], x[:stop][t]]))
    return int(hits[0]) if hits.size else -1
