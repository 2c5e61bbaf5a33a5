"""Compiled inner loops for triangle testing.

Oracles that can describe their arcs with a few arrays (see
``TournamentOracle._arc_spec``) get their triangle tests run here instead of
through numpy. The kernels charge queries exactly like the numpy path of
:func:`robust_order.tournament.first_triangle`: ``(x, y)``, then ``(y, z)``,
then ``(z, x)`` only while a cycle is still possible, nothing for triples
with a repeated element.

Each arc kind is its own compiled function, passed to the kernels as an
argument so that every kind gets a specialized loop.
"""

from __future__ import annotations

import numpy as np
from numba import njit

ARC_KEY = 0  # key[u] < key[v]
ARC_FLIP = 1  # key order, hashed coin on pairs touching a bad element
ARC_SPLIT = 2  # key order, bad elements answer from a fixed half-set
ARC_TABLE = 3  # explicit arc matrix

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xBF58476D1CE4E5B9)
_M3 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M2
    z = (z ^ (z >> np.uint64(27))) * _M3
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _arc_key(u, v, key, bad, table, half, bad_index, hash_key, size):
    return key[u] < key[v]


@njit(cache=True, inline="always")
def _arc_flip(u, v, key, bad, table, half, bad_index, hash_key, size):
    if bad[u] or bad[v]:
        lo = min(u, v)
        hi = max(u, v)
        coin = (_mix((np.uint64(lo * size + hi) ^ hash_key) + _GOLDEN) & np.uint64(1)) == np.uint64(1)
        return coin if u < v else not coin
    return key[u] < key[v]


@njit(cache=True, inline="always")
def _arc_split(u, v, key, bad, table, half, bad_index, hash_key, size):
    bu = bad[u]
    bv = bad[v]
    if bu and (not bv or u < v):
        return not half[bad_index[u], v]
    if bv:
        return half[bad_index[v], u]
    return key[u] < key[v]


@njit(cache=True, inline="always")
def _arc_table(u, v, key, bad, table, half, bad_index, hash_key, size):
    return table[u, v]


ARC_FUNCS = {ARC_KEY: _arc_key, ARC_FLIP: _arc_flip, ARC_SPLIT: _arc_split, ARC_TABLE: _arc_table}


@njit(cache=True, inline="always")
def _mark(seen, track, size, u, v):
    if track:
        seen[min(u, v) * size + max(u, v)] = True


@njit(cache=True)
def _arcs(arc, u, v, key, bad, table, half, bad_index, hash_key, size):
    out = np.empty(u.size, dtype=np.bool_)
    for i in range(u.size):
        out[i] = arc(u[i], v[i], key, bad, table, half, bad_index, hash_key, size)
    return out


@njit(cache=True)
def _first_triangle(arc, x, y, z, key, bad, table, half, bad_index, hash_key, size, seen, track):
    q = 0
    for i in range(x.size):
        a, b, c = x[i], y[i], z[i]
        if a == b or b == c or a == c:
            continue
        ab = arc(a, b, key, bad, table, half, bad_index, hash_key, size)
        bc = arc(b, c, key, bad, table, half, bad_index, hash_key, size)
        _mark(seen, track, size, a, b)
        _mark(seen, track, size, b, c)
        q += 2
        if ab != bc:
            continue
        ca = arc(c, a, key, bad, table, half, bad_index, hash_key, size)
        _mark(seen, track, size, c, a)
        q += 1
        if ca == bc:
            return i, q
    return -1, q


_BLOCK = 512


@njit(cache=True)
def _random_search(arc, S, tests, apex, state, key, bad, table, half, bad_index, hash_key, size, seen, track):
    # Blocked so the index and arc passes have no early exit and vectorize.
    # Test t draws from mix(state + (2t+1)G) and mix(state + (2t+2)G).
    m = np.uint64(S.size)
    s0 = np.uint64(state)
    low = np.uint64(0xFFFFFFFF)
    A = np.empty(_BLOCK, np.int64)
    B = np.empty(_BLOCK, np.int64)
    C = np.empty(_BLOCK, np.int64)
    T = np.empty(_BLOCK, np.int64)
    q = 0
    done = 0
    while done < tests:
        nb = min(_BLOCK, tests - done)
        # ordered triple of distinct elements, uniform; i and j share one mix
        for t in range(nb):
            s = s0 + np.uint64(2 * (done + t) + 1) * _GOLDEN
            r = _mix(s)
            i = np.int64(((r >> np.uint64(32)) * m) >> np.uint64(32))
            j = np.int64(((r & low) * (m - np.uint64(1))) >> np.uint64(32))
            j += np.int64(j >= i)
            A[t] = S[i]
            B[t] = S[j]
            if apex >= 0:
                C[t] = apex
            else:
                k = np.int64(((_mix(s + _GOLDEN) >> np.uint64(32)) * (m - np.uint64(2))) >> np.uint64(32))
                k += np.int64(k >= min(i, j))
                k += np.int64(k >= max(i, j))
                C[t] = S[k]
        # bits 0-1: number of forward arcs (0 or 3 is a triangle); bit 2: third arc read
        for t in range(nb):
            a = A[t]
            b = B[t]
            c = C[t]
            ab = arc(a, b, key, bad, table, half, bad_index, hash_key, size)
            bc = arc(b, c, key, bad, table, half, bad_index, hash_key, size)
            ca = arc(c, a, key, bad, table, half, bad_index, hash_key, size)
            T[t] = np.int64(ab) + np.int64(bc) + np.int64(ca) + 4 * np.int64(ab == bc)
        for t in range(nb):
            v = T[t]
            third = v >> 2
            q += 2 + third
            if track:
                a = A[t]
                b = B[t]
                c = C[t]
                seen[min(a, b) * size + max(a, b)] = True
                seen[min(b, c) * size + max(b, c)] = True
                # an unread third arc lands in the scratch slot at the end
                seen[min(c, a) * size + max(c, a) if third else seen.size - 1] = True
            w = v & 3
            if w * (3 - w) == 0:
                return A[t], B[t], C[t], q
        done += nb
    return -1, -1, -1, q


def arcs(spec, u, v) -> np.ndarray:
    """Uncharged bulk arc lookup: ``True`` where ``u[i] -> v[i]``."""
    kind, *arrays = spec
    return _arcs(ARC_FUNCS[kind], u, v, *arrays)


def first_triangle(spec, x, y, z, seen, track) -> tuple[int, int]:
    """Index of the first triangle among the given triples (or -1), and the queries spent."""
    kind, *arrays = spec
    return _first_triangle(ARC_FUNCS[kind], x, y, z, *arrays, seen, track)


def random_search(spec, S, tests, apex, state, seen, track) -> tuple[int, int, int, int]:
    """Up to ``tests`` triangle tests on distinct elements of ``S``, stopping at the first hit.

    Each test draws an ordered triple of distinct elements uniformly (a pair
    plus ``apex`` when ``apex >= 0``, which must not be in ``S``) from a
    splitmix64 stream started at ``state``. Returns ``(x, y, z, queries)``
    with ``x == -1`` when nothing hit.
    """
    kind, *arrays = spec
    return _random_search(ARC_FUNCS[kind], S, tests, apex, state, *arrays, seen, track)
