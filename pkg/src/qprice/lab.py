"""Exhaustive arbitrage checks over finite bundle families.

A check quantifies over a family of bundles instead of every bundle of a
query language, so a clean report means "no violation within the family".
Extensional bundles realize any partition, which makes small families
complete in practice.

All checks work from a ``PriceTable``: one price per member for QPS schemes,
one price per (member, database) for APS schemes.  Reusing a table lets a
test perturb single entries and confirm the checker notices.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .aps import ApsScheme
from .errors import BudgetExceeded, ConstantBundle, InvalidParameter, ModeMismatch, UnsupportedSpace, ZeroSamples
from .lattice import Partition, join_all
from .qps import QpsScheme
from .query import BundleLike, ExtensionalQuery, QueryBundle, as_bundle, partition_of
from .space import InstanceSpace

DEFAULT_EPSILON = 1e-9
DEFAULT_BUDGET = 10**10

CONDITIONS = ("info", "bundle", "serendipitous")


def mode_of(scheme) -> str:
    if isinstance(scheme, ApsScheme):
        return "aps"
    if isinstance(scheme, QpsScheme):
        return "qps"
    raise ModeMismatch(f"not a pricing scheme: {scheme!r}")


def _require_mode(scheme, mode: str | None) -> str:
    actual = mode_of(scheme)
    if mode is not None and mode.lower() != actual:
        raise ModeMismatch(f"{scheme.id} is an {actual.upper()} scheme, not {mode.upper()}")
    return actual


# families


class BundleFamily:
    """Named base bundles plus their unions.

    ``depth`` 0 keeps only the base bundles; depth k adds the union of every
    set of 2..k+1 distinct base bundles, named ``"A+B"``.  Unions of base
    pairs are always materialized (as extra rows at depth 0) because the
    bundle check needs their prices.
    """

    def __init__(self, bundles: Sequence[tuple[str, BundleLike]] | dict, depth: int = 1):
        items = list(bundles.items()) if isinstance(bundles, dict) else list(bundles)
        names = [n for n, _ in items]
        if len(set(names)) != len(names):
            raise InvalidParameter("bundle names in a family must be unique")
        if depth < 0:
            raise InvalidParameter("depth must be non-negative")
        self.base = [(str(n), as_bundle(b)) for n, b in items]
        self.depth = int(depth)
        self._layouts: dict = {}
        self._given: dict[int, Partition] = {}

    @classmethod
    def from_partitions(cls, partitions: Sequence[Partition], names: Sequence[str] | None = None, depth: int = 1) -> "BundleFamily":
        """Extensional bundles realizing the given partitions of the space."""
        if names is None:
            names = [f"P{i}" for i in range(len(partitions))]
        fam = cls([(n, ExtensionalQuery.from_partition(p)) for n, p in zip(names, partitions)], depth)
        fam._given = {i: p for i, p in enumerate(partitions)}
        return fam

    @property
    def base_names(self) -> list[str]:
        return [n for n, _ in self.base]

    def combos(self) -> list[tuple[int, ...]]:
        """Member index tuples: singles first, then unions by size."""
        k = len(self.base)
        out: list[tuple[int, ...]] = [(i,) for i in range(k)]
        for r in range(2, min(self.depth + 1, k) + 1):
            out.extend(itertools.combinations(range(k), r))
        return out

    @property
    def names(self) -> list[str]:
        return ["+".join(self.base[i][0] for i in c) for c in self.combos()]

    def __len__(self) -> int:
        return len(self.combos())

    def bundle(self, name: str) -> QueryBundle:
        for c, n in zip(self.combos(), self.names):
            if n == name:
                out = self.base[c[0]][1]
                for i in c[1:]:
                    out = out + self.base[i][1]
                return out
        raise KeyError(name)

    def layout(self, space: InstanceSpace) -> "FamilyLayout":
        key = id(space), space
        lay = self._layouts.get(key)
        if lay is None:
            lay = FamilyLayout(self, space)
            self._layouts = {key: lay}
        return lay


class FamilyLayout:
    """Family rows over one space: members first, then extra union rows."""

    def __init__(self, family: BundleFamily, space: InstanceSpace):
        self.space = space
        n = space.size
        base_parts = [family._given[i] if i in family._given else partition_of(b, space) for i, (_, b) in enumerate(family.base)]
        for p in base_parts:
            if p.n != n:
                raise InvalidParameter("family partition over a different space")
        combos = family.combos()
        rows = list(combos)
        index = {c: r for r, c in enumerate(rows)}
        self.n_members = len(rows)
        k = len(family.base)
        for c in itertools.combinations(range(k), 2):
            if c not in index:
                index[c] = len(rows)
                rows.append(c)
        self.names = ["+".join(family.base[i][0] for i in c) for c in rows]
        self.pairs = np.array(
            [(i, j, index[(i, j)]) for i, j in itertools.combinations(range(k), 2)], dtype=np.int64
        ).reshape(-1, 3)

        # distinct partitions; unions use the join, which equals the union's partition
        distinct: dict = {}
        self.partitions: list[Partition] = []
        pid = np.empty(len(rows), dtype=np.int64)
        for r, c in enumerate(rows):
            p = base_parts[c[0]] if len(c) == 1 else join_all(base_parts[i] for i in c)
            key = p.key()
            if key not in distinct:
                distinct[key] = len(self.partitions)
                self.partitions.append(p)
            pid[r] = distinct[key]
        self.part_id = pid
        if self.partitions:
            self.labels = np.stack([p.labels for p in self.partitions])  # (distinct, n)
        else:
            self.labels = np.zeros((0, n), dtype=np.int64)
        self._agree = None
        self._refine = None

    @property
    def n_rows(self) -> int:
        return len(self.names)

    def agreement_words(self) -> np.ndarray:
        """(distinct, n, W) uint64: bitmask of the block holding each database."""
        if self._agree is None:
            n = self.space.size
            words = (n + 63) // 64
            same = self.labels[:, :, None] == self.labels[:, None, :]  # (k, n, n)
            packed = np.packbits(same, axis=2, bitorder="little")
            pad = words * 8 - packed.shape[2]
            if pad:
                packed = np.concatenate([packed, np.zeros(packed.shape[:2] + (pad,), np.uint8)], axis=2)
            self._agree = np.ascontiguousarray(packed).view(np.uint64).reshape(len(self.partitions), n, words)
        return self._agree

    def refinement(self) -> np.ndarray:
        """R[a, b] = partition a refines partition b."""
        if self._refine is None:
            L = self.labels
            k, n = L.shape
            R = np.empty((k, k), dtype=bool)
            for a in range(k):
                nb = int(L[a].max()) + 1
                rep = np.empty(nb, dtype=np.int64)
                rep[L[a]] = np.arange(n)  # any member represents its block
                R[a] = np.all(L[:, rep[L[a]]] == L, axis=1)
            self._refine = R
        return self._refine


# price tables


@dataclass
class PriceTable:
    """Prices of every family row: shape (rows,) for QPS, (rows, n) for APS."""

    names: list[str]
    prices: np.ndarray
    mode: str

    def perturbed(self, row: int, delta: float, database: int | None = None) -> "PriceTable":
        p = self.prices.copy()
        if self.mode == "aps":
            if database is None:
                p[row, :] += delta
            else:
                p[row, database] += delta
        else:
            p[row] += delta
        return PriceTable(list(self.names), p, self.mode)

    def price(self, name: str, database: int | None = None) -> float:
        r = self.names.index(name)
        return float(self.prices[r] if self.mode == "qps" else self.prices[r, database])


def price_table(scheme, family: BundleFamily, space: InstanceSpace) -> PriceTable:
    mode = mode_of(scheme)
    lay = family.layout(space)
    bound = scheme.bind(space)
    if mode == "qps":
        vals = np.array([bound.price(p) for p in lay.partitions], dtype=float)
        return PriceTable(list(lay.names), vals[lay.part_id], mode)
    full = space.full_mask()
    per_d = scheme.database_dependent
    vecs = np.empty((len(lay.partitions), space.size))
    for k, p in enumerate(lay.partitions):
        masks = p.block_masks
        if per_d:
            vecs[k] = [bound.price(full ^ masks[b], d) for d, b in enumerate(p.labels.tolist())]
        else:
            blocks = p.blocks
            vals = np.array([bound.price(full ^ masks[b], blocks[b][0]) for b in range(p.num_blocks)])
            vecs[k] = vals[p.labels]
    return PriceTable(list(lay.names), vecs[lay.part_id], mode)


# reports


@dataclass
class Violation:
    condition: str
    q1: str
    q2: str
    database: int | None
    prices: tuple[float, ...]
    margin: float
    union: str | None = None
    multiplicity: int = 1

    def sort_key(self):
        return (self.condition, self.q1, self.q2, -1 if self.database is None else self.database)

    def to_record(self, scheme: str) -> dict:
        w = {
            "q1": self.q1,
            "q2": self.q2,
            "database": "—" if self.database is None else self.database,
            "prices": [_num(p) for p in self.prices],
            "margin": _num(self.margin),
        }
        if self.union is not None:
            w["union"] = self.union
        if self.multiplicity > 1:
            w["multiplicity"] = self.multiplicity
        return {"scheme": scheme, "condition": self.condition, "witness": w}


def _num(x: float) -> float:
    return float(f"{x:.12g}")


@dataclass
class ArbitrageReport:
    scheme: str
    mode: str
    epsilon: float
    counts: dict = field(default_factory=dict)
    violations: list[Violation] = field(default_factory=list)
    unsafe: bool = False
    truncated: bool = False

    @property
    def clean(self) -> bool:
        return not self.violations

    def of(self, condition: str) -> list[Violation]:
        return [v for v in self.violations if v.condition == condition]

    def merge(self, other: "ArbitrageReport") -> "ArbitrageReport":
        counts = dict(self.counts)
        for k, v in other.counts.items():
            counts[k] = counts.get(k, 0) + v
        vs = sorted(self.violations + other.violations, key=Violation.sort_key)
        return ArbitrageReport(self.scheme, self.mode, self.epsilon, counts, vs, self.unsafe or other.unsafe, self.truncated or other.truncated)

    def to_records(self) -> list[dict]:
        return [v.to_record(self.scheme) for v in self.violations]

    def summary(self) -> dict:
        return {
            "scheme": self.scheme,
            "mode": self.mode,
            "epsilon": self.epsilon,
            "checks": dict(self.counts),
            "violations": len(self.violations),
            "unsafe": self.unsafe,
            "truncated": self.truncated,
        }

    def to_lines(self) -> list[str]:
        lines = [json.dumps(r, ensure_ascii=False) for r in self.to_records()]
        lines.append(json.dumps({"summary": self.summary()}, ensure_ascii=False))
        return lines


def _report(scheme, mode, epsilon, condition) -> ArbitrageReport:
    unsafe = not (scheme.info_safe and scheme.bundle_safe)
    return ArbitrageReport(scheme.id, mode, epsilon, {condition: 0}, [], unsafe)


def _check_budget(members: int, n: int, budget: int) -> None:
    if members * members * n > budget:
        raise BudgetExceeded(f"{members}^2 * {n} cells exceed the budget {budget}")


class _Collector:
    """Deduplicates witnesses and honors ``first``."""

    def __init__(self, first: bool):
        self.first = first
        self.seen: dict = {}
        self.done = False

    def add(self, key, make) -> None:
        v = self.seen.get(key)
        if v is None:
            self.seen[key] = make()
            if self.first:
                self.done = True
        else:
            v.multiplicity += 1

    def violations(self) -> list[Violation]:
        return sorted(self.seen.values(), key=Violation.sort_key)


def _table_for(scheme, family, space, table, mode) -> PriceTable:
    if table is None:
        return price_table(scheme, family, space)
    if table.mode != mode:
        raise ModeMismatch(f"price table is {table.mode}, scheme is {mode}")
    return table


def _group_rows(words: np.ndarray):
    """Unique agreement masks (rows of W words): returns (uniq, inverse)."""
    if words.shape[1] == 1:
        uniq, inv = np.unique(words[:, 0], return_inverse=True)
        return uniq[:, None], inv.reshape(-1)
    uniq, inv = np.unique(words, axis=0, return_inverse=True)
    return uniq, inv.reshape(-1)


def _subset_matrix(uniq: np.ndarray) -> np.ndarray:
    """S[a, b] = group a's agreement set is inside group b's."""
    k = len(uniq)
    S = np.ones((k, k), dtype=bool)
    for w in range(uniq.shape[1]):
        col = uniq[:, w]
        S &= (col[:, None] & ~col[None, :]) == 0
    return S


def _pair_candidates(gmin, gmax, S, eps):
    # (g2, g1) where g2 |- g1 and some price in g1 exceeds some price in g2
    hit = S & (gmax[None, :] > gmin[:, None] + eps)
    return np.argwhere(hit)


def _group_extrema(inv, vals, k):
    gmin = np.full(k, np.inf)
    gmax = np.full(k, -np.inf)
    np.minimum.at(gmin, inv, vals)
    np.maximum.at(gmax, inv, vals)
    return gmin, gmax


def _members_by_group(inv, k):
    order = np.argsort(inv, kind="stable")
    bounds = np.searchsorted(inv[order], np.arange(k + 1))
    return [order[bounds[g]:bounds[g + 1]] for g in range(k)]


def _enumerate_pairs(cands, groups, vals, eps, emit, extra=None):
    """Call ``emit(q2, q1)`` for members q2 in g2, q1 in g1 with vals[q1] > vals[q2] + eps."""
    for g2, g1 in cands:
        m2 = groups[g2]
        m1 = groups[g1]
        v1 = vals[m1]
        for q2 in m2.tolist():
            over = m1[v1 > vals[q2] + eps]
            for q1 in over.tolist():
                if q1 == q2 or (extra is not None and not extra(q2, q1)):
                    continue
                if emit(q2, q1):
                    return True
    return False


def check_information_arbitrage(
    scheme,
    family: BundleFamily,
    space: InstanceSpace,
    mode: str | None = None,
    epsilon: float = DEFAULT_EPSILON,
    first: bool = False,
    budget: int = DEFAULT_BUDGET,
    table: PriceTable | None = None,
) -> ArbitrageReport:
    """Flag determined bundles priced above their determiner by more than ``epsilon``.

    APS: at every database D, q2 determines q1 at D when q2's agreement set
    sits inside q1's.  QPS: q2's partition refines q1's.
    """
    mode = _require_mode(scheme, mode)
    lay = family.layout(space)
    m, n = lay.n_members, space.size
    _check_budget(m, n, budget)
    tab = _table_for(scheme, family, space, table, mode)
    rep = _report(scheme, mode, epsilon, "info")
    if m == 0:
        return rep
    names = lay.names
    col = _Collector(first)
    pid = lay.part_id[:m]

    if mode == "qps":
        vals = tab.prices[:m]
        k = len(lay.partitions)
        R = lay.refinement()
        used = np.unique(pid)
        sub = R[np.ix_(used, used)]
        remap = np.full(k, -1)
        remap[used] = np.arange(len(used))
        inv = remap[pid]
        gmin, gmax = _group_extrema(inv, vals, len(used))
        cnt = np.bincount(inv, minlength=len(used))
        rep.counts["info"] = int(cnt @ sub @ cnt) - m

        def emit(q2, q1):
            col.add(
                (q2, q1),
                lambda: Violation("info", names[q1], names[q2], None, (float(vals[q1]), float(vals[q2])), float(vals[q1] - vals[q2])),
            )
            return col.done

        _enumerate_pairs(_pair_candidates(gmin, gmax, sub, epsilon), _members_by_group(inv, len(used)), vals, epsilon, emit)
    else:
        words = lay.agreement_words()
        total = 0
        for d in range(n):
            vals = tab.prices[:m, d]
            uniq, inv = _group_rows(words[pid, d, :])
            k = len(uniq)
            S = _subset_matrix(uniq)
            cnt = np.bincount(inv, minlength=k)
            total += int(cnt @ S @ cnt) - m
            gmin, gmax = _group_extrema(inv, vals, k)
            block = lay.labels[pid, d]

            def emit(q2, q1, d=d, vals=vals, block=block):
                col.add(
                    (q2, q1, int(block[q2]), float(vals[q1]), float(vals[q2])),
                    lambda: Violation("info", names[q1], names[q2], d, (float(vals[q1]), float(vals[q2])), float(vals[q1] - vals[q2])),
                )
                return col.done

            if _enumerate_pairs(_pair_candidates(gmin, gmax, S, epsilon), _members_by_group(inv, k), vals, epsilon, emit):
                break
        rep.counts["info"] = total
    rep.violations = col.violations()
    rep.truncated = col.done
    return rep


def check_bundle_arbitrage(
    scheme,
    family: BundleFamily,
    space: InstanceSpace,
    mode: str | None = None,
    epsilon: float = DEFAULT_EPSILON,
    first: bool = False,
    budget: int = DEFAULT_BUDGET,
    table: PriceTable | None = None,
) -> ArbitrageReport:
    """Flag pairs of base bundles whose union costs more than both parts."""
    mode = _require_mode(scheme, mode)
    lay = family.layout(space)
    n = space.size
    _check_budget(lay.n_members, n, budget)
    tab = _table_for(scheme, family, space, table, mode)
    rep = _report(scheme, mode, epsilon, "bundle")
    pairs = lay.pairs
    names = lay.names
    col = _Collector(first)
    if len(pairs) == 0:
        return rep
    i, j, u = pairs[:, 0], pairs[:, 1], pairs[:, 2]
    P = tab.prices
    if mode == "qps":
        rep.counts["bundle"] = len(pairs)
        excess = P[u] - P[i] - P[j]
        for k in np.flatnonzero(excess > epsilon).tolist():
            a, b, c = int(i[k]), int(j[k]), int(u[k])
            col.add((a, b), lambda: Violation("bundle", names[a], names[b], None, (float(P[a]), float(P[b]), float(P[c])), float(excess[k]), names[c]))
            if col.done:
                break
    else:
        rep.counts["bundle"] = len(pairs) * n
        excess = P[u] - P[i] - P[j]  # (pairs, n)
        ulab = lay.labels[lay.part_id[u]]
        for k, d in np.argwhere(excess > epsilon).tolist():
            a, b, c = int(i[k]), int(j[k]), int(u[k])
            pr = (float(P[a, d]), float(P[b, d]), float(P[c, d]))
            col.add((a, b, int(ulab[k, d]), pr), lambda: Violation("bundle", names[a], names[b], d, pr, float(excess[k, d]), names[c]))
            if col.done:
                break
    rep.violations = col.violations()
    rep.truncated = col.done
    return rep


def check_serendipitous(
    scheme: QpsScheme,
    family: BundleFamily,
    space: InstanceSpace,
    epsilon: float = DEFAULT_EPSILON,
    first: bool = False,
    budget: int = DEFAULT_BUDGET,
    table: PriceTable | None = None,
) -> ArbitrageReport:
    """Flag (D, q2, q1) where q2 happens to reveal q1 at D although it does
    not determine it in general, and q1 costs more."""
    mode = _require_mode(scheme, "qps")
    lay = family.layout(space)
    m, n = lay.n_members, space.size
    _check_budget(m, n, budget)
    tab = _table_for(scheme, family, space, table, mode)
    rep = _report(scheme, mode, epsilon, "serendipitous")
    if m == 0:
        return rep
    names = lay.names
    col = _Collector(first)
    pid = lay.part_id[:m]
    R = lay.refinement()
    vals = tab.prices[:m]
    words = lay.agreement_words()
    rep.counts["serendipitous"] = m * (m - 1) * n

    def not_determined(q2, q1):
        return not R[pid[q2], pid[q1]]

    for d in range(n):
        uniq, inv = _group_rows(words[pid, d, :])
        k = len(uniq)
        S = _subset_matrix(uniq)
        gmin, gmax = _group_extrema(inv, vals, k)
        block = lay.labels[pid, d]

        def emit(q2, q1, d=d, block=block):
            col.add(
                (q2, q1, int(block[q2]), float(vals[q1]), float(vals[q2])),
                lambda: Violation("serendipitous", names[q1], names[q2], d, (float(vals[q1]), float(vals[q2])), float(vals[q1] - vals[q2])),
            )
            return col.done

        if _enumerate_pairs(_pair_candidates(gmin, gmax, S, epsilon), _members_by_group(inv, k), vals, epsilon, emit, not_determined):
            break
    rep.violations = col.violations()
    rep.truncated = col.done
    return rep


def check_all(
    scheme,
    family: BundleFamily,
    space: InstanceSpace,
    conditions: Iterable[str] = ("info", "bundle"),
    epsilon: float = DEFAULT_EPSILON,
    first: bool = False,
    budget: int = DEFAULT_BUDGET,
    table: PriceTable | None = None,
) -> ArbitrageReport:
    mode = mode_of(scheme)
    conditions = list(conditions)
    for c in conditions:
        if c not in CONDITIONS:
            raise InvalidParameter(f"unknown condition {c!r}; choose from {CONDITIONS}")
    if table is None:
        table = price_table(scheme, family, space)
    rep = ArbitrageReport(scheme.id, mode, epsilon, {}, [], not (scheme.info_safe and scheme.bundle_safe))
    for c in conditions:
        if c == "info":
            part = check_information_arbitrage(scheme, family, space, None, epsilon, first, budget, table)
        elif c == "bundle":
            part = check_bundle_arbitrage(scheme, family, space, None, epsilon, first, budget, table)
        else:
            if mode != "qps":
                raise ModeMismatch("the serendipitous check applies to QPS schemes")
            part = check_serendipitous(scheme, family, space, epsilon, first, budget, table)
        rep = rep.merge(part)
        if first and rep.violations:
            break
    return rep


# tradeoff


@dataclass(frozen=True)
class TradeoffWitness:
    database: int
    price: float
    full_price: float
    ratio: float


def tradeoff_witness(scheme: ApsScheme, bundle: BundleLike, space: InstanceSpace) -> TradeoffWitness:
    """Database maximizing price(bundle) / price(whole database), both at D.

    Databases where learning the whole database is free are skipped.  Ties
    go to the smallest index.
    """
    _require_mode(scheme, "aps")
    p = partition_of(bundle, space)
    if p.num_blocks == 1:
        raise ConstantBundle("the bundle has the same answer on every database")
    bound = scheme.bind(space)
    full = space.full_mask()
    masks = p.block_masks
    best = None
    for d, b in enumerate(p.labels.tolist()):
        whole = bound.price(full ^ (1 << d), d)
        if not whole > 0:
            continue
        price = bound.price(full ^ masks[b], d)
        ratio = price / whole
        if best is None or ratio > best.ratio:
            best = TradeoffWitness(d, price, whole, ratio)
    if best is None:
        raise ConstantBundle("the full database is free everywhere under this scheme")
    return best


# sampling estimator


@dataclass(frozen=True)
class ShannonEstimate:
    estimate: float
    stderr: float
    samples: int
    seed: int | None


def estimate_shannon(bundle: BundleLike, space: InstanceSpace, samples: int, seed: int | None = None) -> ShannonEstimate:
    """Monte-Carlo estimate of the uniform Shannon price of ``bundle``.

    Draws ``samples`` database indices uniformly with replacement and
    averages log2 n - log2 |[D]|.
    """
    if samples < 1:
        raise ZeroSamples("need at least one sample")
    if not space.is_uniform:
        raise UnsupportedSpace("the estimator assumes the uniform distribution")
    p = partition_of(bundle, space)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, space.size, size=int(samples))
    gains = math.log2(space.size) - np.log2(p.sizes[p.labels[idx]].astype(float))
    est = float(gains.mean())
    err = float(gains.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return ShannonEstimate(est, err, int(samples), seed)
