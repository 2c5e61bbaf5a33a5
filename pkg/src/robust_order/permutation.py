"""Permutations over ``{1, ..., d}``, LCS via patience sorting, and the Ulam metric.

Two permutations of the same symbols share a longest common subsequence that
is a longest increasing subsequence once one of them is relabelled through the
other's inverse. Everything here is built on that reduction, which runs in
``O(d log d)`` time.
"""

from __future__ import annotations

from bisect import bisect_left
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError, ParseError

__all__ = [
    "Permutation",
    "lis_indices",
    "lis_length",
    "lcs_length",
    "ulam_distance",
    "misaligned_set",
    "ulam_distances",
    "as_permutation_array",
    "read_permutations",
    "write_permutations",
    "format_permutations",
]


class Permutation:
    """An immutable bijection on the 1-based symbols ``1..d``.

    ``symbols[i]`` is the symbol at position ``i``; ``inverse[s]`` is the
    position of symbol ``s`` (index 0 of ``inverse`` is unused and holds -1).

    >>> p = Permutation([2, 1, 3])
    >>> p.d, p.position(3)
    (3, 2)
    """

    __slots__ = ("_symbols", "_inverse", "_key")

    def __init__(self, symbols: Iterable[int]):
        arr = np.array(list(symbols) if not isinstance(symbols, np.ndarray) else symbols)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidInputError("a permutation needs at least one symbol")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(np.equal(np.mod(arr, 1), 0)):
                raise InvalidInputError("permutation symbols must be integers")
        arr = arr.astype(np.int64)
        d = arr.size
        if arr.min() < 1 or arr.max() > d:
            raise InvalidInputError(f"symbols must lie in 1..{d}")
        seen = np.zeros(d + 1, dtype=bool)
        seen[arr] = True
        if not seen[1:].all():
            raise InvalidInputError("symbols must form a bijection on 1..d")
        arr.setflags(write=False)
        self._symbols = arr
        self._inverse = None
        self._key = None

    @classmethod
    def identity(cls, d: int) -> Permutation:
        return cls(np.arange(1, d + 1))

    @classmethod
    def random(cls, d: int, rng: np.random.Generator) -> Permutation:
        return cls(rng.permutation(d) + 1)

    @property
    def symbols(self) -> np.ndarray:
        return self._symbols

    @property
    def d(self) -> int:
        return int(self._symbols.size)

    @property
    def inverse(self) -> np.ndarray:
        if self._inverse is None:
            inv = np.full(self.d + 1, -1, dtype=np.int64)
            inv[self._symbols] = np.arange(self.d)
            inv.setflags(write=False)
            self._inverse = inv
        return self._inverse

    def position(self, symbol: int) -> int:
        return int(self.inverse[symbol])

    def reversed(self) -> Permutation:
        return Permutation(self._symbols[::-1])

    def tolist(self) -> list[int]:
        return self._symbols.tolist()

    def __len__(self) -> int:
        return self.d

    def __iter__(self):
        return iter(self.tolist())

    def __getitem__(self, i):
        return self._symbols[i]

    def _tuple(self) -> tuple[int, ...]:
        if self._key is None:
            self._key = tuple(self.tolist())
        return self._key

    def __eq__(self, other) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return self._tuple() == other._tuple()

    def __hash__(self) -> int:
        return hash(self._tuple())

    def __lt__(self, other: Permutation) -> bool:
        return self._tuple() < other._tuple()

    def __repr__(self) -> str:
        if self.d <= 12:
            return f"Permutation({self.tolist()})"
        head = " ".join(map(str, self._symbols[:8].tolist()))
        return f"Permutation(d={self.d}, [{head} ...])"


def _coerce(p) -> Permutation:
    return p if isinstance(p, Permutation) else Permutation(p)


def _check_same_d(a: Permutation, b: Permutation) -> None:
    if a.d != b.d:
        raise InvalidInputError(f"dimension mismatch: {a.d} != {b.d}")


def lis_indices(values: Sequence[int]) -> list[int]:
    """Indices of one longest strictly increasing subsequence of ``values``.

    Patience sorting: each value goes on the leftmost pile whose top is not
    smaller than it, and remembers the top of the pile to its left. The
    subsequence is read back from the top of the last pile, which fixes a
    single canonical answer among the possibly many optimal ones.
    """
    tops: list[int] = []
    top_idx: list[int] = []
    prev = [-1] * len(values)
    for i, x in enumerate(values):
        j = bisect_left(tops, x)
        if j:
            prev[i] = top_idx[j - 1]
        if j == len(tops):
            tops.append(x)
            top_idx.append(i)
        else:
            tops[j] = x
            top_idx[j] = i
    out: list[int] = []
    i = top_idx[-1] if top_idx else -1
    while i >= 0:
        out.append(i)
        i = prev[i]
    out.reverse()
    return out


def lis_length(values: Sequence[int]) -> int:
    tops: list[int] = []
    for x in values:
        j = bisect_left(tops, x)
        if j == len(tops):
            tops.append(x)
        else:
            tops[j] = x
    return len(tops)


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence of two permutations.

    >>> lcs_length([1, 2, 3], [2, 1, 3])
    2
    """
    a, b = _coerce(a), _coerce(b)
    _check_same_d(a, b)
    return lis_length(b.inverse[a.symbols].tolist())


def ulam_distance(a, b) -> int:
    """``d - lcs(a, b)``: the fewest symbol moves turning ``a`` into ``b``.

    >>> ulam_distance([1, 2, 3], [2, 1, 3])
    1
    """
    a, b = _coerce(a), _coerce(b)
    return a.d - lcs_length(a, b)


def misaligned_set(a, ref) -> frozenset[int]:
    """Symbols of ``a`` left out of the canonical LCS with ``ref``.

    The LCS is the one :func:`lis_indices` reconstructs, so the result is
    deterministic and its size always equals ``ulam_distance(a, ref)``.
    """
    a, ref = _coerce(a), _coerce(ref)
    _check_same_d(a, ref)
    keep = lis_indices(ref.inverse[a.symbols].tolist())
    mask = np.ones(a.d, dtype=bool)
    mask[keep] = False
    return frozenset(a.symbols[mask].tolist())


def as_permutation_array(X, *, d: int | None = None) -> np.ndarray:
    """Validate a dataset of permutations and return it as an ``(n, d)`` int array.

    Accepts a sequence of :class:`Permutation`, a list of lists, or a 2-D
    array. Every row must be a bijection on ``1..d``.
    """
    if isinstance(X, Permutation):
        X = [X]
    if isinstance(X, np.ndarray):
        arr = X
    else:
        rows = [p.symbols if isinstance(p, Permutation) else p for p in X]
        if not rows:
            return np.empty((0, d or 0), dtype=np.int64)
        lengths = {len(r) for r in rows}
        if len(lengths) != 1:
            raise InvalidInputError(f"permutations of mixed length: {sorted(lengths)}")
        arr = np.asarray(rows)
    if arr.ndim != 2:
        raise InvalidInputError(f"expected a 2-D array of permutations, got ndim={arr.ndim}")
    if arr.shape[0] == 0:
        return arr.astype(np.int64)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.issubdtype(arr.dtype, np.number) or not np.all(np.mod(arr, 1) == 0):
            raise InvalidInputError("permutation symbols must be integers")
    arr = arr.astype(np.int64)
    width = arr.shape[1]
    if d is not None and width != d:
        raise InvalidInputError(f"dimension mismatch: {width} != {d}")
    if width == 0:
        raise InvalidInputError("a permutation needs at least one symbol")
    if arr.min() < 1 or arr.max() > width:
        raise InvalidInputError(f"symbols must lie in 1..{width}")
    srt = np.sort(arr, axis=1)
    if not np.array_equal(srt, np.broadcast_to(np.arange(1, width + 1), arr.shape)):
        bad = int(np.flatnonzero((srt != np.arange(1, width + 1)).any(axis=1))[0])
        raise InvalidInputError(f"row {bad} is not a bijection on 1..{width}")
    return arr


def ulam_distances(X, center) -> np.ndarray:
    """Ulam distance from every row of ``X`` to ``center`` in one vectorized pass.

    Runs patience sorting on all rows simultaneously. The pile tops of every
    row are kept in one matrix; since they are increasing along each row, the
    insertion point of a new value is a count of smaller tops.
    """
    center = _coerce(center)
    X = np.asarray(X, dtype=np.int64)
    if X.ndim == 1:
        X = X[None, :]
    n, d = X.shape
    if d != center.d:
        raise InvalidInputError(f"dimension mismatch: {d} != {center.d}")
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    rel = center.inverse[X]
    tops = np.full((n, d + 1), d, dtype=np.int64)
    rows = np.arange(n)
    width = 1
    for j in range(d):
        x = rel[:, j]
        slot = (tops[:, :width] < x[:, None]).sum(axis=1)
        tops[rows, slot] = x
        if slot.max() + 1 >= width:
            width = min(d + 1, int(slot.max()) + 2)
    lengths = (tops[:, :d] < d).sum(axis=1)
    return d - lengths


def format_permutations(perms) -> str:
    arr = as_permutation_array(perms)
    return "".join(" ".join(map(str, row)) + "\n" for row in arr.tolist())


def write_permutations(path, perms) -> None:
    Path(path).write_text(format_permutations(perms))


def read_permutations(path) -> list[Permutation]:
    """Parse the one-permutation-per-line text format.

    Blank lines and ``#`` comments are skipped. Any line that is not a
    bijection on ``1..d``, or whose ``d`` differs from the first line, raises
    :class:`ParseError` carrying the line number.
    """
    perms: list[Permutation] = []
    d = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                values = [int(tok) for tok in text.split()]
            except ValueError as exc:
                raise ParseError(f"non-integer symbol ({exc})", lineno) from None
            try:
                p = Permutation(values)
            except InvalidInputError as exc:
                raise ParseError(str(exc), lineno) from None
            if d is None:
                d = p.d
            elif p.d != d:
                raise ParseError(f"expected {d} symbols, found {p.d}", lineno)
            perms.append(p)
    return perms
