"""Permutations, derangements and condensed derangement sets.

Stations are 0-based internally. ``Permutation.source_of[j]`` is the station
whose signal is delivered to station ``j``, so the switch matrix has its single
1 of row ``j`` in column ``source_of[j]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidSizeError

# Desk-scale limits for exhaustive enumeration; not hard limits.
MAX_DERANGEMENT_N = 8
MAX_CONDENSED_N = 6


@dataclass(frozen=True, order=True)
class Permutation:
    source_of: tuple[int, ...]

    def __post_init__(self):
        src = tuple(int(i) for i in self.source_of)
        object.__setattr__(self, "source_of", src)
        if len(src) == 0 or sorted(src) != list(range(len(src))):
            raise ValueError(f"{src} is not a permutation of 0..{len(src) - 1}")

    @classmethod
    def from_one_based(cls, source_of: Iterable[int]):
        return cls(tuple(int(i) - 1 for i in source_of))

    @classmethod
    def from_matrix(cls, matrix):
        m = np.asarray(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("switch matrix must be square")
        if not (np.isin(m, (0, 1)).all() and (m.sum(axis=0) == 1).all() and (m.sum(axis=1) == 1).all()):
            raise ValueError("not a permutation matrix")
        return cls(tuple(int(c) for c in m.argmax(axis=1)))

    @property
    def n(self) -> int:
        return len(self.source_of)

    def one_based(self) -> tuple[int, ...]:
        return tuple(i + 1 for i in self.source_of)

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.n, self.n), dtype=int)
        m[np.arange(self.n), self.source_of] = 1
        return m

    def target_of(self) -> tuple[int, ...]:
        """Inverse map: ``target_of()[i]`` is the station that hears station ``i``."""
        inv = [0] * self.n
        for j, i in enumerate(self.source_of):
            inv[i] = j
        return tuple(inv)

    def is_derangement(self) -> bool:
        return all(i != j for j, i in enumerate(self.source_of))

    def cycles(self) -> list[tuple[int, ...]]:
        """Cycles of the map ``j -> source_of[j]``, each starting at its smallest station."""
        seen = set()
        out = []
        for start in range(self.n):
            if start in seen:
                continue
            cyc = [start]
            seen.add(start)
            k = self.source_of[start]
            while k != start:
                cyc.append(k)
                seen.add(k)
                k = self.source_of[k]
            out.append(tuple(cyc))
        return out

    def __str__(self):
        return "[" + ",".join(str(i) for i in self.one_based()) + "]"


class Derangement(Permutation):
    def __post_init__(self):
        super().__post_init__()
        if not self.is_derangement():
            raise ValueError(f"{self} has a fixed point")


@dataclass(frozen=True)
class CondensedSet:
    """``n - 1`` derangements whose switch matrices sum to ``J - I``.

    Members are stored sorted, so two sets with the same members compare equal.
    """

    members: tuple[Derangement, ...]

    def __post_init__(self):
        members = tuple(sorted(self.members))
        object.__setattr__(self, "members", members)
        if not members:
            raise ValueError("empty condensed set")
        n = members[0].n
        if len(members) != n - 1 or any(d.n != n for d in members):
            raise ValueError(f"a condensed set for n={n} needs {n - 1} derangements of size {n}")
        total = sum(d.matrix() for d in members)
        if not np.array_equal(total, np.ones((n, n), dtype=int) - np.eye(n, dtype=int)):
            raise ValueError("members do not sum to J - I")

    @property
    def n(self) -> int:
        return self.members[0].n

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def __str__(self):
        return "{" + ", ".join(str(d) for d in self.members) + "}"


def subfactorial(n: int) -> int:
    """Number of derangements of ``n`` elements, exact integer arithmetic."""
    if n < 0:
        raise InvalidSizeError(f"subfactorial needs n >= 0, got {n}")
    prev, cur = 1, 0  # !0, !1
    if n == 0:
        return prev
    for k in range(2, n + 1):
        prev, cur = cur, (k - 1) * (cur + prev)
    return cur


def _check_size(n: int, bound: int, what: str):
    if n < 2:
        raise InvalidSizeError(f"{what} needs n >= 2, got {n}")
    if n > bound:
        raise InvalidSizeError(f"{what} is limited to n <= {bound}, got {n}")


def enumerate_derangements(n: int, *, max_n: int = MAX_DERANGEMENT_N) -> list[Derangement]:
    """All derangements of size ``n`` in lexicographic order of ``source_of``."""
    _check_size(n, max_n, "enumerate_derangements")
    out: list[Derangement] = []
    used = [False] * n
    cur: list[int] = []

    def extend(j):
        if j == n:
            out.append(Derangement(tuple(cur)))
            return
        for i in range(n):
            if i != j and not used[i]:
                used[i] = True
                cur.append(i)
                extend(j + 1)
                cur.pop()
                used[i] = False

    extend(0)
    return out


def is_pairwise(p: Permutation) -> bool:
    """True when stations exchange in pairs (the switch matrix is symmetric)."""
    s = p.source_of
    return all(s[s[j]] == j for j in range(p.n))


def enumerate_condensed_sets(n: int, *, max_n: int = MAX_CONDENSED_N) -> list[CondensedSet]:
    """Every condensed derangement set of size ``n``, as unordered sets.

    Depth-first search: the smallest uncovered off-diagonal cell is covered next,
    trying only derangements whose cells are disjoint from everything chosen so
    far. Sets are listed in descending order of their canonical member keys.
    """
    _check_size(n, max_n, "enumerate_condensed_sets")
    ders = enumerate_derangements(n, max_n=max(max_n, MAX_DERANGEMENT_N))
    masks = []
    for d in ders:
        m = 0
        for j, i in enumerate(d.source_of):
            m |= 1 << (j * n + i)
        masks.append(m)
    by_cell: dict[int, list[int]] = {}
    for k, d in enumerate(ders):
        for j, i in enumerate(d.source_of):
            by_cell.setdefault(j * n + i, []).append(k)

    full = 0
    for j in range(n):
        for i in range(n):
            if i != j:
                full |= 1 << (j * n + i)

    found: dict[tuple, CondensedSet] = {}
    chosen: list[int] = []

    def search(covered):
        if covered == full:
            key = tuple(sorted(chosen))
            if key not in found:
                found[key] = CondensedSet(tuple(ders[k] for k in key))
            return
        free = full & ~covered
        cell = (free & -free).bit_length() - 1
        for k in by_cell[cell]:
            if masks[k] & covered == 0:
                chosen.append(k)
                search(covered | masks[k])
                chosen.pop()

    search(0)
    # List order: sets compared by their members taken from the last
    # derangement in canonical order downwards, largest first. For n=4 this is
    # the usual Q1..Q4 numbering.
    return [found[k] for k in sorted(found, key=lambda key: sorted(key, reverse=True), reverse=True)]


def full_unicast_pairs(cset: CondensedSet) -> list[tuple[int, int]]:
    """Ordered (source, destination) pairs served by one round over ``cset``."""
    return [(i, j) for d in cset for j, i in enumerate(d.source_of)]

