"""Set partitions of {1..K} and the refinement lattice they form.

A partition is stored as a restricted-growth sequence (RGS): ``rgs[i]`` is the
block label of element ``i`` and labels appear in first-occurrence order, so
every partition has exactly one encoding.  ``(0, 0, 1)`` is ``12/3``.

Pattern spaces order partitions from finest to coarsest (descending block
count, ties by lexicographic RGS), which for K=3 gives the familiar
``1/2/3, 12/3, 13/2, 1/23, 123``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, SizeLimitError

MAX_K = 12


def _check_k(k: int) -> None:
    if not isinstance(k, (int, np.integer)) or k < 1 or k > MAX_K:
        raise SizeLimitError(f"K must be an integer in [1, {MAX_K}] (cap {MAX_K}), got {k!r}")


@lru_cache(maxsize=None)
def _bell(k: int) -> int:
    if k == 0:
        return 1
    return sum(_bell(j) * comb(k - 1, j) for j in range(k))


def bell_number(k: int) -> int:
    """Number of set partitions of a k-element set.

    Uses B_k = sum_{j<k} B_j * C(k-1, j) with B_0 = 1.
    """
    _check_k(k)
    return _bell(int(k))


@dataclass(frozen=True, order=False)
class Partition:
    """A set partition of {1..K} in canonical RGS form."""

    rgs: tuple[int, ...]

    def __post_init__(self):
        rgs = tuple(int(x) for x in self.rgs)
        if not rgs:
            raise ValueError("a partition needs at least one element")
        top = -1
        for x in rgs:
            if x < 0 or x > top + 1:
                raise ValueError(f"not a restricted-growth sequence: {rgs}")
            top = max(top, x)
        object.__setattr__(self, "rgs", rgs)

    @property
    def k(self) -> int:
        return len(self.rgs)

    @property
    def block_count(self) -> int:
        return max(self.rgs) + 1

    def blocks(self) -> tuple[tuple[int, ...], ...]:
        """Blocks as tuples of 0-based element indices, ordered by minimum."""
        out: list[list[int]] = [[] for _ in range(self.block_count)]
        for i, label in enumerate(self.rgs):
            out[label].append(i)
        return tuple(tuple(b) for b in out)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], k: int | None = None) -> "Partition":
        """Build from 0-based blocks."""
        blocks = [list(b) for b in blocks]
        n = k if k is not None else sum(len(b) for b in blocks)
        labels = [-1] * n
        for tag, block in enumerate(blocks):
            for i in block:
                if labels[i] != -1:
                    raise ValueError(f"element {i + 1} appears in two blocks")
                labels[i] = tag
        if -1 in labels:
            raise ValueError("blocks do not cover every element")
        return partition_from_labels(labels)

    @classmethod
    def parse(cls, text: str) -> "Partition":
        """Inverse of ``str()``: ``"13/2"`` or ``"[[1,2],[3],...]"`` (1-based)."""
        text = text.strip()
        if text.startswith("["):
            blocks = [[int(x) - 1 for x in b] for b in json.loads(text)]
        else:
            blocks = [[int(ch) - 1 for ch in part] for part in text.split("/")]
        return cls.from_blocks(blocks)

    def __str__(self) -> str:
        blocks = self.blocks()
        if self.k <= 9:
            return "/".join("".join(str(i + 1) for i in b) for b in blocks)
        return json.dumps([[i + 1 for i in b] for b in blocks], separators=(",", ":"))

    def __repr__(self) -> str:
        return f"Partition({self})"


def partition_from_labels(labels: Sequence[Hashable]) -> Partition:
    """Group positions with equal tags; the result is canonical."""
    if len(labels) == 0:
        raise ValueError("labels must be non-empty")
    seen: dict = {}
    rgs = []
    for tag in labels:
        if tag not in seen:
            seen[tag] = len(seen)
        rgs.append(seen[tag])
    return Partition(tuple(rgs))


def _same_k(a: Partition, b: Partition) -> None:
    if a.k != b.k:
        raise DimensionError(f"partitions over different K: {a.k} vs {b.k}")


def is_refinement(fine: Partition, coarse: Partition) -> bool:
    """True iff every block of ``fine`` lies inside a block of ``coarse``."""
    _same_k(fine, coarse)
    image: dict[int, int] = {}
    for f, c in zip(fine.rgs, coarse.rgs):
        if image.setdefault(f, c) != c:
            return False
    return True


def meet(a: Partition, b: Partition) -> Partition:
    """Greatest common refinement."""
    _same_k(a, b)
    return partition_from_labels(list(zip(a.rgs, b.rgs)))


def _rgs_sequences(k: int):
    """All RGS of length k in lexicographic order."""
    rgs = [0] * k

    def rec(i: int, top: int):
        if i == k:
            yield tuple(rgs)
            return
        for v in range(top + 2):
            rgs[i] = v
            yield from rec(i + 1, max(top, v))

    yield from rec(1, 0)


def _rank_table(k: int) -> np.ndarray:
    # t[r, m]: number of RGS tails of length r when the running max is m
    t = np.zeros((k, k + 1), dtype=np.int64)
    t[0, :] = 1
    for r in range(1, k):
        for m in range(k - r):
            t[r, m] = (m + 1) * t[r - 1, m] + t[r - 1, m + 1]
    return t


def rgs_lex_rank(rgs: Sequence[int], table: np.ndarray) -> int:
    k = len(rgs)
    rank = 0
    top = 0
    for i in range(1, k):
        rank += int(rgs[i]) * int(table[k - 1 - i, top])
        top = max(top, int(rgs[i]))
    return rank


@dataclass(frozen=True, eq=False)
class PatternSpace:
    """All partitions of {1..K} in canonical order, with lookup helpers."""

    k: int
    patterns: tuple[Partition, ...]
    index: dict = field(repr=False)
    rgs_array: np.ndarray = field(repr=False)
    rank_table: np.ndarray = field(repr=False)
    lex_to_canon: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.patterns)

    def __len__(self) -> int:
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)

    def __getitem__(self, i: int) -> Partition:
        return self.patterns[i]

    @property
    def bottom(self) -> int:
        """Index of the all-singletons partition."""
        return 0

    @property
    def top(self) -> int:
        """Index of the one-block partition."""
        return len(self.patterns) - 1

    def labels(self) -> list[str]:
        return [str(p) for p in self.patterns]

    def position(self, p: Partition | str) -> int:
        if isinstance(p, str):
            p = Partition.parse(p)
        if p.k != self.k:
            raise DimensionError(f"partition over K={p.k} in space K={self.k}")
        return self.index[p]

    def index_of_rgs(self, rgs: Sequence[int]) -> int:
        return int(self.lex_to_canon[rgs_lex_rank(rgs, self.rank_table)])

    def down_set(self, coarse: int) -> np.ndarray:
        """Boolean mask of all patterns that refine pattern ``coarse``."""
        return _down_set(self, int(coarse))

    def leq_matrix(self) -> np.ndarray:
        """``m[i, j]`` is True iff pattern i refines pattern j."""
        if self.k > 8:
            raise SizeLimitError("dense refinement matrix is only built for K <= 8")
        return _leq_matrix(self)

    def admissible(self, coarse_indices: np.ndarray) -> np.ndarray:
        """Rows of the refinement matrix for the given coarse patterns."""
        coarse_indices = np.asarray(coarse_indices, dtype=np.int64)
        if self.k <= 8:
            return self.leq_matrix().T[coarse_indices]
        return np.array([self.down_set(c) for c in coarse_indices], dtype=bool)


@lru_cache(maxsize=None)
def _leq_matrix(space: PatternSpace) -> np.ndarray:
    return np.stack([_down_set(space, j) for j in range(space.size)], axis=1)


@lru_cache(maxsize=None)
def _block_firsts(space: PatternSpace) -> np.ndarray:
    # firsts[i, x]: first element sharing x's block under pattern i
    r = space.rgs_array
    firsts = np.zeros(r.shape, dtype=np.int64)
    for x in range(space.k):
        firsts[:, x] = np.argmax(r[:, :x + 1] == r[:, x:x + 1], axis=1)
    return firsts


def _down_set(space: PatternSpace, coarse: int) -> np.ndarray:
    # i refines c iff c's label is constant on every block of i
    c = space.rgs_array[coarse]
    return np.all(c[_block_firsts(space)] == c[None, :], axis=1)


@lru_cache(maxsize=None)
def enumerate_patterns(k: int) -> PatternSpace:
    """Every partition of {1..K}, finest first, coarsest last."""
    _check_k(k)
    lex = list(_rgs_sequences(k))
    order = sorted(range(len(lex)), key=lambda i: (-(max(lex[i]) + 1), lex[i]))
    patterns = tuple(Partition(lex[i]) for i in order)
    lex_to_canon = np.empty(len(lex), dtype=np.int32)
    for pos, i in enumerate(order):
        lex_to_canon[i] = pos
    rgs_array = np.array([p.rgs for p in patterns], dtype=np.int8)
    rgs_array.setflags(write=False)
    lex_to_canon.setflags(write=False)
    table = _rank_table(k)
    table.setflags(write=False)
    return PatternSpace(
        k=k,
        patterns=patterns,
        index={p: i for i, p in enumerate(patterns)},
        rgs_array=rgs_array,
        rank_table=table,
        lex_to_canon=lex_to_canon,
    )


def hasse_index_edges(space: PatternSpace) -> list[tuple[int, int]]:
    """Covering pairs as (fine, coarse) indices into ``space``."""
    return _hasse_index_edges(space)


@lru_cache(maxsize=None)
def _hasse_index_edges(space: PatternSpace) -> list[tuple[int, int]]:
    # coarse covers fine iff it merges exactly two blocks of fine
    edges = set()
    for i, p in enumerate(space.patterns):
        for a, b in combinations(range(p.block_count), 2):
            merged = [a if x == b else x for x in p.rgs]
            edges.add((i, space.index[partition_from_labels(merged)]))
    return sorted(edges)


def hasse_edges(space: PatternSpace) -> list[tuple[Partition, Partition]]:
    """Covering pairs (fine, coarse) of the refinement order."""
    return [(space[i], space[j]) for i, j in hasse_index_edges(space)]
