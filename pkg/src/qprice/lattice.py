"""Index sets and partitions of an instance space, with the semilattice
operations pricing needs: refinement, join, distinction-set size and
restriction to a support set.

Blocks are kept in canonical order (ascending minimum element), so two
partitions describing the same equivalence relation compare equal and
serialize identically.  Distinction sets are never materialized; only their
sizes are computed.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import EmptySupport, UniverseMismatch


def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << int(i)
    return m


def iter_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def mask_to_bool(mask: int, n: int) -> np.ndarray:
    """Dense boolean view of a bitmask (bit i -> entry i)."""
    nbytes = max(1, (n + 7) // 8)
    raw = np.frombuffer(mask.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


def bool_to_mask(flags: np.ndarray) -> int:
    packed = np.packbits(np.asarray(flags, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


class IndexSet:
    """Immutable set of database indices drawn from ``range(n)``."""

    __slots__ = ("n", "mask")

    def __init__(self, mask: int, n: int):
        if mask >> n:
            raise UniverseMismatch(f"mask has bits outside range({n})")
        self.n = n
        self.mask = mask

    @classmethod
    def of(cls, indices: Iterable[int], n: int) -> "IndexSet":
        indices = list(indices)
        for i in indices:
            if not 0 <= i < n:
                raise UniverseMismatch(f"index {i} outside range({n})")
        return cls(mask_of(indices), n)

    @classmethod
    def full(cls, n: int) -> "IndexSet":
        return cls((1 << n) - 1, n)

    @classmethod
    def empty(cls, n: int) -> "IndexSet":
        return cls(0, n)

    def _same(self, other: "IndexSet") -> None:
        if not isinstance(other, IndexSet) or other.n != self.n:
            raise UniverseMismatch("index sets over different universes")

    def __iter__(self) -> Iterator[int]:
        return iter_bits(self.mask)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __contains__(self, i) -> bool:
        return 0 <= i < self.n and bool(self.mask >> i & 1)

    def __bool__(self) -> bool:
        return self.mask != 0

    def __eq__(self, other) -> bool:
        if isinstance(other, IndexSet):
            return self.n == other.n and self.mask == other.mask
        if isinstance(other, (set, frozenset)):
            return set(self) == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.n, self.mask))

    def __and__(self, other: "IndexSet") -> "IndexSet":
        self._same(other)
        return IndexSet(self.mask & other.mask, self.n)

    def __or__(self, other: "IndexSet") -> "IndexSet":
        self._same(other)
        return IndexSet(self.mask | other.mask, self.n)

    def __sub__(self, other: "IndexSet") -> "IndexSet":
        self._same(other)
        return IndexSet(self.mask & ~other.mask, self.n)

    def complement(self) -> "IndexSet":
        return IndexSet(((1 << self.n) - 1) ^ self.mask, self.n)

    def issubset(self, other: "IndexSet") -> bool:
        self._same(other)
        return self.mask & ~other.mask == 0

    def issuperset(self, other: "IndexSet") -> bool:
        self._same(other)
        return other.mask & ~self.mask == 0

    def to_list(self) -> list[int]:
        return list(self)

    def to_bool(self) -> np.ndarray:
        return mask_to_bool(self.mask, self.n)

    def __repr__(self) -> str:
        return f"IndexSet({self.to_list()}, n={self.n})"


def _canonical_labels(raw: np.ndarray) -> np.ndarray:
    # renumber blocks by first occurrence: block order = ascending minimum
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse.reshape(-1)]


class Partition:
    """A partition of a universe of database indices.

    ``universe`` is a sorted array of indices (by default ``0..n-1``);
    ``labels[k]`` is the block number of ``universe[k]``, with blocks
    numbered in order of their minimum element.
    """

    __slots__ = ("universe", "labels", "_key", "_sizes", "_masks")

    def __init__(self, labels: Sequence, universe: Sequence[int] | None = None):
        raw = np.asarray(labels)
        if raw.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if universe is None:
            uni = np.arange(len(raw), dtype=np.int64)
        else:
            uni = np.asarray(universe, dtype=np.int64)
            if len(uni) != len(raw):
                raise UniverseMismatch("labels and universe differ in length")
            if len(uni) and np.any(np.diff(uni) <= 0):
                order = np.argsort(uni, kind="stable")
                uni, raw = uni[order], raw[order]
                if np.any(np.diff(uni) == 0):
                    raise UniverseMismatch("universe has repeated indices")
        if len(raw) == 0:
            raise EmptySupport("a partition needs a non-empty universe")
        if raw.dtype.kind not in "iub":
            _, raw = np.unique(raw.astype(str), return_inverse=True)
        self.universe = uni
        self.universe.setflags(write=False)
        self.labels = _canonical_labels(raw)
        self.labels.setflags(write=False)
        self._key = None
        self._sizes = None
        self._masks = None

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], universe: Sequence[int] | int | None = None) -> "Partition":
        blocks = [sorted(int(i) for i in b) for b in blocks]
        members = sorted(i for b in blocks for i in b)
        if any(len(b) == 0 for b in blocks):
            raise ValueError("blocks must be non-empty")
        if len(set(members)) != len(members):
            raise ValueError("blocks must be pairwise disjoint")
        if universe is None:
            uni = members
        elif isinstance(universe, (int, np.integer)):
            uni = list(range(int(universe)))
        else:
            uni = sorted(int(i) for i in universe)
        if members != uni:
            raise ValueError("blocks must cover the universe exactly")
        pos = {u: k for k, u in enumerate(uni)}
        labels = np.empty(len(uni), dtype=np.int64)
        for b_id, b in enumerate(blocks):
            for i in b:
                labels[pos[i]] = b_id
        return cls(labels, uni)

    @classmethod
    def bottom(cls, n: int) -> "Partition":
        """The one-block partition (what a constant query induces)."""
        return cls(np.zeros(n, dtype=np.int64))

    @classmethod
    def top(cls, n: int) -> "Partition":
        """All singletons (what the identity query induces)."""
        return cls(np.arange(n, dtype=np.int64))

    @property
    def n(self) -> int:
        return len(self.universe)

    @property
    def is_full_universe(self) -> bool:
        return self.universe[-1] == self.n - 1

    @property
    def num_blocks(self) -> int:
        # blocks are numbered by first occurrence, so the maximum is the count
        return int(self.labels.max()) + 1

    def __len__(self) -> int:
        return self.num_blocks

    @property
    def sizes(self) -> np.ndarray:
        if self._sizes is None:
            self._sizes = np.bincount(self.labels, minlength=self.num_blocks)
            self._sizes.setflags(write=False)
        return self._sizes

    @property
    def blocks(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.num_blocks)]
        for u, b in zip(self.universe.tolist(), self.labels.tolist()):
            out[b].append(u)
        return out

    @property
    def block_masks(self) -> tuple[int, ...]:
        """Each block as a bitmask over original database indices."""
        if self._masks is None:
            self._masks = tuple(mask_of(b) for b in self.blocks)
        return self._masks

    @property
    def universe_mask(self) -> int:
        return mask_of(self.universe.tolist())

    def position(self, index: int) -> int:
        k = int(np.searchsorted(self.universe, index))
        if k >= self.n or self.universe[k] != index:
            raise UniverseMismatch(f"index {index} not in the partition's universe")
        return k

    def block_id(self, index: int) -> int:
        return int(self.labels[self.position(index)])

    def block_of(self, index: int) -> list[int]:
        """Members of the block that contains ``index`` (the class [D])."""
        return self.blocks[self.block_id(index)]

    def key(self) -> tuple:
        if self._key is None:
            self._key = (self.universe.tobytes(), self.labels.tobytes())
        return self._key

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def to_list(self) -> list[list[int]]:
        return self.blocks

    def __str__(self) -> str:
        sep = "" if self.universe[-1] < 10 else ","
        return "|".join(sep.join(str(i) for i in b) for b in self.blocks)

    def __repr__(self) -> str:
        return f"Partition({self.to_list()})"


def _same_universe(p1: Partition, p2: Partition) -> None:
    if p1.n != p2.n or not np.array_equal(p1.universe, p2.universe):
        raise UniverseMismatch("partitions over different universes")


def refines(p1: Partition, p2: Partition) -> bool:
    """True iff every block of ``p1`` lies inside some block of ``p2``."""
    _same_universe(p1, p2)
    # p1 refines p2 iff p2's label is a function of p1's label; any member
    # may serve as the block representative
    rep = np.empty(p1.num_blocks, dtype=np.int64)
    rep[p1.labels] = p2.labels
    return bool(np.all(rep[p1.labels] == p2.labels))


def join(p1: Partition, p2: Partition) -> Partition:
    """Coarsest common refinement: blocks are the non-empty intersections."""
    _same_universe(p1, p2)
    combined = p1.labels * (p2.num_blocks) + p2.labels
    return Partition(combined, p1.universe)


def join_all(partitions: Iterable[Partition]) -> Partition:
    it = iter(partitions)
    acc = next(it)
    for p in it:
        acc = join(acc, p)
    return acc


def dit_size(p: Partition) -> int:
    """Number of ordered pairs separated by ``p``: n^2 - sum |B|^2."""
    sizes = p.sizes.astype(object)
    return p.n * p.n - int(sum(s * s for s in sizes))


def restrict(p: Partition, support: IndexSet | Iterable[int]) -> Partition:
    """Intersect every block with ``support`` and drop empty intersections."""
    flags = _support_flags(p, support)
    if not flags.any():
        raise EmptySupport("support does not meet the partition's universe")
    return Partition(p.labels[flags], p.universe[flags])


def _support_flags(p: Partition, support) -> np.ndarray:
    if isinstance(support, IndexSet):
        if not support:
            raise EmptySupport("empty support")
        bits = support.to_bool()
        inside = p.universe < len(bits)
        flags = np.zeros(p.n, dtype=bool)
        flags[inside] = bits[p.universe[inside]]
        return flags
    members = np.asarray(sorted(set(int(i) for i in support)), dtype=np.int64)
    if len(members) == 0:
        raise EmptySupport("empty support")
    return np.isin(p.universe, members)


def restrict_set(s: IndexSet, support: IndexSet) -> IndexSet:
    if not support:
        raise EmptySupport("empty support")
    return s & support


def all_partitions(n: int) -> Iterator[Partition]:
    """Every partition of ``range(n)``, via restricted growth strings."""
    labels = [0] * n

    def rec(i: int, top: int):
        if i == n:
            yield Partition(np.array(labels, dtype=np.int64))
            return
        for b in range(top + 2):
            labels[i] = b
            yield from rec(i + 1, max(top, b))

    if n == 0:
        return
    yield from rec(1, 0)


def random_partition(n: int, rng: np.random.Generator, max_blocks: int | None = None) -> Partition:
    k = int(rng.integers(1, (max_blocks or n) + 1))
    return Partition(rng.integers(0, k, size=n))
