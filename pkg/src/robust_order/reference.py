"""Brute-force oracles used to check the fast paths on small inputs.

Nothing here calls into the patience-sorting LCS kernel: distances come from
the quadratic dynamic program, and tournament properties are read off full
adjacency matrices.
"""

from __future__ import annotations

from itertools import combinations, permutations

import numpy as np

from .exceptions import InvalidInputError, ResourceLimitError
from .tournament import TournamentOracle

__all__ = [
    "dp_lcs_length",
    "dp_ulam_distance",
    "count_triangles",
    "count_triangles_by_degree",
    "exact_min_feedback_vertex_set",
    "brute_force_1median",
    "brute_force_kmedian",
]

DP_MAX_D = 2000
TRIANGLE_MAX_N = 500
FVS_MAX_N = 20
MEDIAN_MAX_D = 7
KMEDIAN_MAX_D = 6
KMEDIAN_MAX_K = 2


def _seq(p) -> np.ndarray:
    arr = np.asarray(p.symbols if hasattr(p, "symbols") else p, dtype=np.int64)
    if arr.ndim != 1:
        raise InvalidInputError("expected a single sequence")
    return arr


def dp_lcs_length(a, b) -> int:
    """Textbook LCS table, one row at a time.

    Row ``i`` is ``L[i][j] = max(L[i-1][j], L[i][j-1], L[i-1][j-1] + [a_i == b_j])``.
    Taking the first and third terms elementwise and then a running maximum
    supplies the middle term.
    """
    a, b = _seq(a), _seq(b)
    if a.size != b.size:
        raise InvalidInputError(f"dimension mismatch: {a.size} != {b.size}")
    if a.size > DP_MAX_D:
        raise ResourceLimitError(f"dp_lcs_length is quadratic; d={a.size} > {DP_MAX_D}")
    prev = np.zeros(b.size + 1, dtype=np.int64)
    for x in a:
        cand = prev.copy()
        cand[1:] = np.maximum(prev[1:], prev[:-1] + (b == x))
        prev = np.maximum.accumulate(cand)
    return int(prev[-1])


def dp_ulam_distance(a, b) -> int:
    return _seq(a).size - dp_lcs_length(a, b)


def _adjacency(oracle: TournamentOracle, elements, limit: int, what: str):
    elements = oracle.elements if elements is None else np.unique(np.asarray(elements, dtype=np.int64))
    if elements.size > limit:
        raise ResourceLimitError(f"{what} is limited to n <= {limit}, got {elements.size}")
    return elements, oracle.adjacency(elements).astype(np.int64)


def count_triangles(oracle: TournamentOracle, elements=None) -> tuple[int, dict[int, int]]:
    """Number of directed 3-cycles and, per element, how many contain it.

    Uses the diagonal of the cubed adjacency matrix: ``(A^3)[p, p]`` counts the
    closed 3-walks through ``p``, each of which is one triangle containing ``p``.
    """
    elements, A = _adjacency(oracle, elements, TRIANGLE_MAX_N, "count_triangles")
    if elements.size == 0:
        return 0, {}
    per = np.einsum("ij,jk,ki->i", A, A, A)
    return int(per.sum()) // 3, dict(zip(elements.tolist(), per.tolist()))


def count_triangles_by_degree(oracle: TournamentOracle, elements=None) -> int:
    """Recount 3-cycles with ``C(n,3) - sum_v C(out_v, 2)``: every transitive
    triple has exactly one vertex beating the other two."""
    elements, A = _adjacency(oracle, elements, TRIANGLE_MAX_N, "count_triangles_by_degree")
    n = elements.size
    out = A.sum(axis=1)
    return n * (n - 1) * (n - 2) // 6 - int((out * (out - 1) // 2).sum())


def _acyclic(A: np.ndarray, keep: np.ndarray) -> bool:
    # a tournament is acyclic iff its out-degrees are pairwise distinct
    sub = A[np.ix_(keep, keep)]
    out = sub.sum(axis=1)
    return np.unique(out).size == out.size


def exact_min_feedback_vertex_set(oracle: TournamentOracle, elements=None) -> frozenset[int]:
    """Smallest vertex set whose removal leaves the tournament acyclic.

    Subsets are tried in order of size, then lexicographically.
    """
    elements, A = _adjacency(oracle, elements, FVS_MAX_N, "exact_min_feedback_vertex_set")
    n = elements.size
    idx = np.arange(n)
    for size in range(n + 1):
        for drop in combinations(range(n), size):
            keep = np.setdiff1d(idx, drop, assume_unique=True)
            if _acyclic(A, keep):
                return frozenset(elements[list(drop)].tolist())
    raise AssertionError("unreachable: removing every vertex is always feasible")


def _all_permutation_distances(S: np.ndarray, d: int):
    cands = list(permutations(range(1, d + 1)))
    D = np.array([[dp_ulam_distance(c, s) for s in S] for c in cands], dtype=np.int64)
    return cands, D


def _rows(S) -> np.ndarray:
    rows = [_seq(s) for s in S]
    if not rows:
        raise InvalidInputError("need at least one point")
    if len({r.size for r in rows}) != 1:
        raise InvalidInputError("points must share d")
    return np.stack(rows)


def brute_force_1median(S) -> tuple[tuple[int, ...], int]:
    """Exact 1-median over all ``d!`` permutations; ties go to the lexicographically smallest."""
    X = _rows(S)
    d = X.shape[1]
    if d > MEDIAN_MAX_D:
        raise ResourceLimitError(f"brute_force_1median enumerates d!; d={d} > {MEDIAN_MAX_D}")
    cands, D = _all_permutation_distances(X, d)
    cost = D.sum(axis=1)
    best = int(np.argmin(cost))
    return cands[best], int(cost[best])


def brute_force_kmedian(S, k: int) -> tuple[list[tuple[int, ...]], int]:
    """Exact k-median (``k <= 2``) over all center tuples from the full permutation set."""
    X = _rows(S)
    d = X.shape[1]
    if d > KMEDIAN_MAX_D or k > KMEDIAN_MAX_K or k < 1:
        raise ResourceLimitError(f"brute_force_kmedian needs d <= {KMEDIAN_MAX_D} and 1 <= k <= {KMEDIAN_MAX_K}")
    cands, D = _all_permutation_distances(X, d)
    if k == 1:
        cost = D.sum(axis=1)
        best = int(np.argmin(cost))
        return [cands[best]], int(cost[best])
    best_cost, best_pair = None, None
    for i in range(len(cands)):
        costs = np.minimum(D[i], D[i:]).sum(axis=1)
        j = int(np.argmin(costs))
        if best_cost is None or costs[j] < best_cost:
            best_cost, best_pair = int(costs[j]), (i, i + j)
    return [cands[best_pair[0]], cands[best_pair[1]]], best_cost
