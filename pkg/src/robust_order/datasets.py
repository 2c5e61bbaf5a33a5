"""Synthetic permutation data with known ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError
from .permutation import Permutation, misaligned_set, ulam_distance, ulam_distances

__all__ = [
    "move_symbols",
    "perturb",
    "PlantedClusters",
    "planted_clusters",
    "PlantedFiveTuple",
    "planted_five_tuple",
]


def move_symbols(p: Permutation, symbols, rng: np.random.Generator) -> Permutation:
    """Pull ``symbols`` out of ``p`` and reinsert each at a uniformly random position.

    The untouched symbols keep their relative order, so the result is within
    Ulam distance ``len(symbols)`` of ``p``.
    """
    moved = list(symbols)
    if not moved:
        return p
    rest = [s for s in p.tolist() if s not in set(moved)]
    for s in rng.permutation(moved).tolist():
        rest.insert(int(rng.integers(0, len(rest) + 1)), s)
    return Permutation(rest)


def perturb(p: Permutation, radius: int, rng: np.random.Generator) -> Permutation:
    """Move ``radius`` random symbols of ``p``; distance to ``p`` is at most ``radius``."""
    if radius <= 0:
        return p
    return move_symbols(p, rng.choice(p.symbols, size=min(radius, p.d), replace=False), rng)


@dataclass
class PlantedClusters:
    points: np.ndarray
    labels: np.ndarray
    centers: list[Permutation]
    planted_cost: int


def planted_clusters(k: int, d: int, n: int, *, noise: int = 0, min_separation: int | None = None,
                     seed: int = 0, max_tries: int = 1000) -> PlantedClusters:
    """Balanced clusters around random centers that are pairwise at least ``min_separation`` apart.

    Each point is its center with ``noise`` random symbols moved;
    ``planted_cost`` is the total distance of points to their own centers.
    """
    if k < 1 or n < k:
        raise InvalidInputError("need 1 <= k <= n")
    sep = d // 2 if min_separation is None else min_separation
    rng = np.random.default_rng(seed)
    centers: list[Permutation] = []
    tries = 0
    while len(centers) < k:
        tries += 1
        if tries > max_tries:
            raise InvalidInputError(f"could not place {k} centers at separation {sep} in d={d}")
        c = Permutation.random(d, rng)
        if all(ulam_distance(c, o) >= sep for o in centers):
            centers.append(c)
    labels = np.sort(np.arange(n) % k)
    points = np.stack([perturb(centers[lab], noise, rng).symbols for lab in labels])
    cost = int(sum(ulam_distances(points[labels == j], centers[j]).sum() for j in range(k)))
    return PlantedClusters(points, labels, centers, cost)


@dataclass
class PlantedFiveTuple:
    """Five noisy copies of ``sigma_star`` and their misaligned sets.

    ``misaligned[i]`` is computed from the canonical LCS of ``perms[i]`` with
    ``sigma_star``; ``bad`` holds the symbols misaligned in two or more copies.
    """

    sigma_star: Permutation
    perms: list[Permutation]
    moved: list[frozenset[int]]
    misaligned: list[frozenset[int]]

    @property
    def bad(self) -> frozenset[int]:
        counts: dict[int, int] = {}
        for s in self.misaligned:
            for x in s:
                counts[x] = counts.get(x, 0) + 1
        return frozenset(x for x, c in counts.items() if c >= 2)

    @property
    def good(self) -> frozenset[int]:
        return frozenset(range(1, self.sigma_star.d + 1)) - self.bad


def planted_five_tuple(d: int, sizes=(3, 4, 5, 6, 8), *, overlap: float = 0.25, seed: int = 0,
                       max_tries: int = 1000) -> PlantedFiveTuple:
    """Five permutations with controlled pairwise-overlapping moved sets.

    ``sizes`` are the moved-set sizes in ascending order. For ``i < j`` the
    moved sets share at most ``floor(overlap * sizes[i])`` symbols, which is
    the small-pairwise-overlap property with parameter ``overlap``.
    """
    sizes = sorted(int(s) for s in sizes)
    if len(sizes) != 5 or sum(sizes) > 5 * d or max(sizes) > d:
        raise InvalidInputError("need five moved-set sizes that fit in d symbols")
    rng = np.random.default_rng(seed)
    sigma = Permutation.random(d, rng)
    for _ in range(max_tries):
        sets: list[set[int]] = []
        for j, size in enumerate(sizes):
            chosen: set[int] = set()
            for i in range(j):
                cap = int(np.floor(overlap * sizes[i]))
                pool = sorted(sets[i] - chosen)
                take = int(rng.integers(0, min(cap, len(pool)) + 1)) if pool else 0
                if take:
                    chosen.update(rng.choice(pool, size=take, replace=False).tolist())
            free = sorted(set(range(1, d + 1)) - chosen - set().union(*sets))
            need = size - len(chosen)
            if need > len(free):
                break
            chosen.update(rng.choice(free, size=need, replace=False).tolist())
            sets.append(chosen)
        else:
            if all(len(sets[i] & sets[j]) <= int(np.floor(overlap * sizes[i]))
                   for i in range(5) for j in range(i + 1, 5)):
                break
    else:
        raise InvalidInputError("could not satisfy the overlap constraints")
    perms = [move_symbols(sigma, sorted(s), rng) for s in sets]
    misaligned = [misaligned_set(p, sigma) for p in perms]
    return PlantedFiveTuple(sigma, perms, [frozenset(s) for s in sets], misaligned)
