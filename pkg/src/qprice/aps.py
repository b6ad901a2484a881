"""Answer-dependent prices ``p(Q, E) = f(conflict set of Q at E)``.

The catalog is closed: every scheme except ``EntropyGain`` (and the
``log2_conflict`` concave shape, see ``ConcaveCoverage``) is a monotone set
function, and all but ``UniformShannonGain`` are also subadditive, which
makes them free of information and bundle arbitrage.  Prices are in bits
wherever a logarithm appears.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InvalidParameter, TooManyViews, UnrealizedLabel
from .lattice import IndexSet, iter_bits, mask_of, mask_to_bool
from .query import BundleLike, Query, QueryBundle, as_bundle, bundle_labels, partition_of
from .space import InstanceSpace

DEFAULT_MAX_VIEWS = 24

SupportLike = Union[IndexSet, Iterable[int], None]


def _support_tuple(support: SupportLike) -> tuple[int, ...] | None:
    if support is None:
        return None
    idx = tuple(sorted(set(int(i) for i in support)))
    if not idx:
        from .errors import EmptySupport

        raise EmptySupport("support must be non-empty")
    return idx


def _popcount(m: int) -> int:
    return m.bit_count()


class _Weights:
    """Per-space weight lookups on bitmasks."""

    def __init__(self, w: np.ndarray):
        self.w = w
        self.n = len(w)
        self._list = w.tolist()

    def total(self, mask: int) -> float:
        if _popcount(mask) <= 64:
            return math.fsum(self._list[i] for i in iter_bits(mask))
        return math.fsum(self.w[mask_to_bool(mask, self.n)].tolist())

    def maximum(self, mask: int) -> float:
        if not mask:
            return 0.0
        if _popcount(mask) <= 64:
            return max(self._list[i] for i in iter_bits(mask))
        return float(self.w[mask_to_bool(mask, self.n)].max())

    def values(self, mask: int) -> np.ndarray:
        return self.w[mask_to_bool(mask, self.n)]


class BoundAps:
    """An APS scheme specialized to one space; ``price`` takes a conflict
    bitmask over the whole space and the database the answer came from."""

    def __init__(self, scheme: "ApsScheme", space: InstanceSpace):
        self.scheme = scheme
        self.space = space
        self.full = space.full_mask()
        self.universe = mask_of(scheme.support) & self.full if scheme.support else self.full
        if scheme.support and mask_of(scheme.support) >> space.size:
            raise InvalidParameter("support contains indices outside the space")
        self._cache: dict = {}

    def price(self, conflict: int, at: int) -> float:
        conflict &= self.universe
        key = self._key(conflict, at)
        val = self._cache.get(key)
        if val is None:
            val = self._compute(conflict, at)
            self._cache[key] = val
        return val

    def _key(self, conflict: int, at: int):
        return conflict

    def _compute(self, conflict: int, at: int) -> float:
        raise NotImplementedError


class ApsScheme:
    """Marker base for answer-dependent schemes."""

    info_safe = True
    bundle_safe = True
    database_dependent = False
    support: tuple[int, ...] | None

    @property
    def id(self) -> str:
        raise NotImplementedError

    def _suffix(self) -> str:
        return "" if self.support is None else f"@support{list(self.support)}"

    def bind(self, space: InstanceSpace) -> BoundAps:
        return _bind(self, space)


@lru_cache(maxsize=256)
def _bind(scheme: ApsScheme, space: InstanceSpace) -> BoundAps:
    return scheme._make_bound(space)


# weight-based set functions


class _CoverageBound(BoundAps):
    def __init__(self, scheme, space, fn):
        super().__init__(scheme, space)
        self.weights = _Weights(space.weight_array())
        self.fn = fn

    def _compute(self, conflict, at):
        return float(self.fn(self.weights.total(conflict)))


@dataclass(frozen=True)
class WeightedCoverage(ApsScheme):
    """Total weight of the conflict set."""

    support: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def id(self) -> str:
        return "weighted_coverage" + self._suffix()

    def _make_bound(self, space):
        return _CoverageBound(self, space, lambda x: x)


class _SupremumBound(BoundAps):
    def __init__(self, scheme, space):
        super().__init__(scheme, space)
        self.weights = _Weights(space.weight_array())

    def _compute(self, conflict, at):
        return self.weights.maximum(conflict)


@dataclass(frozen=True)
class Supremum(ApsScheme):
    """Largest weight in the conflict set (0 when it is empty)."""

    support: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def id(self) -> str:
        return "supremum" + self._suffix()

    def _make_bound(self, space):
        return _SupremumBound(self, space)


@dataclass(frozen=True)
class BudgetCoverage(ApsScheme):
    budget: float
    support: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.budget >= 0:
            raise InvalidParameter("budget must be non-negative")
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def id(self) -> str:
        return f"budget[B={self.budget:g}]" + self._suffix()

    def _make_bound(self, space):
        b = self.budget
        return _CoverageBound(self, space, lambda x: min(b, x))


CONCAVE_SHAPES = ("sqrt", "log1p", "cap", "log2_conflict")


@dataclass(frozen=True)
class ConcaveCoverage(ApsScheme):
    """A concave, non-decreasing shape applied to the conflict weight.

    ``sqrt``, ``log1p`` (log2(1 + x)) and ``cap`` (min(cap, x)) have g(0) = 0
    and are therefore subadditive.  ``log2_conflict`` is log2(x) for x >= 1
    and 0 below; with unit weights it is log2 |conflict|.  It is monotone but
    not subadditive: two singleton conflicts cost 0 each while their union
    costs 1, so it is flagged as bundle-unsafe.
    """

    shape: str
    cap: float | None = None
    support: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.shape not in CONCAVE_SHAPES:
            raise InvalidParameter(f"unknown concave shape {self.shape!r}; choose from {CONCAVE_SHAPES}")
        if self.shape == "cap" and not (self.cap is not None and self.cap >= 0):
            raise InvalidParameter("the cap shape needs a non-negative cap")
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def bundle_safe(self) -> bool:  # type: ignore[override]
        return self.shape != "log2_conflict"

    @property
    def id(self) -> str:
        extra = f",B={self.cap:g}" if self.shape == "cap" else ""
        return f"concave[{self.shape}{extra}]" + self._suffix()

    def g(self, x: float) -> float:
        if self.shape == "sqrt":
            return math.sqrt(x)
        if self.shape == "log1p":
            return math.log2(1.0 + x)
        if self.shape == "cap":
            return min(self.cap, x)
        return math.log2(x) if x >= 1.0 else 0.0

    def _make_bound(self, space):
        return _CoverageBound(self, space, self.g)


# weighted set cover


def _as_mask(s) -> int:
    if isinstance(s, IndexSet):
        return s.mask
    if isinstance(s, int):
        return s
    return mask_of(s)


def _cover_search(target: int, views: Sequence[tuple[int, float]]) -> float | None:
    usable = sorted(((p, m & target) for m, p in views if m & target), key=lambda v: v[0])
    reach = 0
    for _, m in usable:
        reach |= m
    if target & ~reach:
        return None
    best = math.inf

    def rec(uncovered: int, cost: float) -> None:
        nonlocal best
        if cost >= best:
            return
        if not uncovered:
            best = cost
            return
        low = uncovered & -uncovered
        for p, m in usable:
            if m & low:
                rec(uncovered & ~m, cost + p)

    rec(target, 0.0)
    return best


def min_weighted_cover(target, views: Sequence[tuple], ceiling: float, max_views: int = DEFAULT_MAX_VIEWS) -> float:
    """Cheapest sub-family of ``views`` whose union covers ``target``.

    ``views`` holds ``(set, price)`` pairs with sets given as IndexSet,
    bitmask or iterable of indices.  Returns ``ceiling`` when no cover exists
    and 0 for the empty target.  Exact branch and bound: branch on the lowest
    uncovered element over the views containing it, cheapest first.
    """
    if len(views) > max_views:
        raise TooManyViews(f"{len(views)} views exceed the cap {max_views}")
    pairs = [(_as_mask(s), float(p)) for s, p in views]
    if any(p < 0 for _, p in pairs):
        raise InvalidParameter("view prices must be non-negative")
    if pairs and ceiling < max(p for _, p in pairs):
        raise InvalidParameter("ceiling must be at least the largest view price")
    t = _as_mask(target)
    if not t:
        return 0.0
    best = _cover_search(t, pairs)
    return float(ceiling) if best is None else best


class _SetCoverBound(BoundAps):
    def __init__(self, scheme: "SetCover", space):
        super().__init__(scheme, space)
        self.prices = [float(p) for _, p in scheme.views]
        self.fixed: list[int | None] = []
        self.partitions = []
        for v, _ in scheme.views:
            if isinstance(v, QueryBundle):
                self.fixed.append(None)
                self.partitions.append(partition_of(v, space))
            else:
                m = _as_mask(v)
                if m >> space.size:
                    raise InvalidParameter("view set contains indices outside the space")
                self.fixed.append(m)
                self.partitions.append(None)

    def view_masks(self, at: int) -> tuple[int, ...]:
        out = []
        for m, p in zip(self.fixed, self.partitions):
            if m is None:
                m = self.full ^ p.block_masks[p.block_id(at)]
            out.append(m)
        return tuple(out)

    def _key(self, conflict, at):
        if self.scheme.database_dependent:
            return (conflict, self.view_masks(at))
        return conflict

    def _compute(self, conflict, at):
        views = list(zip(self.view_masks(at), self.prices))
        return min_weighted_cover(conflict, views, self.scheme.ceiling, self.scheme.max_views)


@dataclass(frozen=True)
class SetCover(ApsScheme):
    """Minimum total price of views whose conflict sets cover the target.

    A view is either a fixed set of database indices or a query bundle with
    an explicit price.  A bundle view contributes its conflict set at the
    database the answer came from, so its price is the cheapest set of views
    that determine the query there.
    """

    views: tuple
    ceiling: float
    max_views: int = DEFAULT_MAX_VIEWS
    support: tuple[int, ...] | None = None

    def __post_init__(self):
        views = []
        for v, p in self.views:
            if isinstance(v, QueryBundle):
                views.append((v, float(p)))
            elif isinstance(v, IndexSet):
                views.append((tuple(v), float(p)))
            elif isinstance(v, Query):
                views.append((as_bundle(v), float(p)))
            else:
                views.append((tuple(sorted(int(i) for i in v)), float(p)))
        if len(views) > self.max_views:
            raise TooManyViews(f"{len(views)} views exceed the cap {self.max_views}")
        if any(p < 0 for _, p in views):
            raise InvalidParameter("view prices must be non-negative")
        if views and self.ceiling < max(p for _, p in views):
            raise InvalidParameter("ceiling must be at least the largest view price")
        object.__setattr__(self, "views", tuple(views))
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def database_dependent(self) -> bool:  # type: ignore[override]
        return any(isinstance(v, QueryBundle) for v, _ in self.views)

    @property
    def id(self) -> str:
        return f"set_cover[{len(self.views)} views,B={self.ceiling:g}]" + self._suffix()

    def _make_bound(self, space):
        return _SetCoverBound(self, space)


# information gain


class _UniformGainBound(BoundAps):
    def __init__(self, scheme, space):
        super().__init__(scheme, space)
        self.n = _popcount(self.universe)

    def _compute(self, conflict, at):
        agree = self.n - _popcount(conflict)
        # an agreement set missing the support is clamped to one database
        return math.log2(self.n) - math.log2(max(agree, 1))


@dataclass(frozen=True)
class UniformShannonGain(ApsScheme):
    """log2 n - log2 |agreement|: Shannon gain under the uniform prior.

    Monotone, hence free of information arbitrage, but not subadditive.
    """

    support: tuple[int, ...] | None = None
    bundle_safe = False

    def __post_init__(self):
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def id(self) -> str:
        return "uniform_shannon_gain" + self._suffix()

    def _make_bound(self, space):
        return _UniformGainBound(self, space)


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return -math.fsum((p * np.log2(p)).tolist())


class _EntropyGainBound(BoundAps):
    def __init__(self, scheme: "EntropyGain", space):
        super().__init__(scheme, space)
        if scheme.weights is None:
            w = space.weight_array()
        else:
            if len(scheme.weights) != space.size:
                raise InvalidParameter(f"{len(scheme.weights)} weights for {space.size} databases")
            w = np.asarray(scheme.weights, dtype=float)
        self.w = w
        inside = mask_to_bool(self.universe, space.size)
        wu = w[inside]
        self.h0 = _entropy(wu / math.fsum(wu.tolist()))

    def _compute(self, conflict, at):
        agree = self.universe & ~conflict
        wa = self.w[mask_to_bool(agree, self.space.size)]
        total = math.fsum(wa.tolist())
        if not total > 0:
            raise UnrealizedLabel("the answer has zero probability under the distribution")
        return self.h0 - _entropy(wa / total)


@dataclass(frozen=True)
class EntropyGain(ApsScheme):
    """H(X) - H(X | answer) under an arbitrary prior.

    Known to admit information arbitrage for skewed priors; kept so the
    arbitrage lab can exhibit the violation.  ``weights`` defaults to the
    space's weights.
    """

    weights: tuple[float, ...] | None = None
    support: tuple[int, ...] | None = None
    info_safe = False
    bundle_safe = False

    def __post_init__(self):
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(x) for x in self.weights))
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def id(self) -> str:
        return "entropy_gain" + self._suffix()

    def _make_bound(self, space):
        return _EntropyGainBound(self, space)


# public entry points


def _agreement_indices(bundle: BundleLike, label: str, space: InstanceSpace) -> list[int]:
    return [i for i, lab in enumerate(bundle_labels(bundle, space)) if lab == label]


def price_aps(
    scheme: ApsScheme,
    bundle: BundleLike,
    label: str,
    space: InstanceSpace,
    database: int | None = None,
) -> float:
    """Price of answer ``label`` to ``bundle``.

    ``database`` fixes which database produced the answer; it only matters
    for set-cover schemes with bundle views and defaults to the smallest
    index realizing the label.
    """
    agree = _agreement_indices(bundle, label, space)
    if not agree:
        raise UnrealizedLabel(f"no database of the space produces {label}")
    if database is None:
        database = agree[0]
    elif database not in agree:
        raise UnrealizedLabel(f"database {database} does not produce {label}")
    conflict = space.full_mask() ^ mask_of(agree)
    return scheme.bind(space).price(conflict, database)


def price_at(scheme: ApsScheme, bundle: BundleLike, database: int, space: InstanceSpace) -> float:
    """Price of the answer that ``bundle`` gives on database ``database``."""
    p = partition_of(bundle, space)
    conflict = space.full_mask() ^ p.block_masks[p.block_id(database)]
    return scheme.bind(space).price(conflict, database)


def price_vector(inner: ApsScheme, bundle: BundleLike, space: InstanceSpace) -> list[tuple[int, float]]:
    """``(d, p(Q, Q(D_d)))`` for every database index ``d``."""
    p = partition_of(bundle, space)
    bound = inner.bind(space)
    full = space.full_mask()
    masks = p.block_masks
    return [(d, bound.price(full ^ masks[b], d)) for d, b in enumerate(p.labels.tolist())]


def aps_scheme_from_config(cfg: dict, bundles: dict | None = None) -> ApsScheme:
    """Build a scheme from its JSON fragment (the value under ``"aps"``)."""
    variant = cfg.get("variant")
    support = cfg.get("support")
    if variant == "weighted_coverage":
        return WeightedCoverage(support=support)
    if variant == "supremum":
        return Supremum(support=support)
    if variant in ("budget", "budget_coverage"):
        return BudgetCoverage(float(cfg["budget"]), support=support)
    if variant == "concave":
        cap = cfg.get("cap")
        return ConcaveCoverage(cfg["shape"], None if cap is None else float(cap), support=support)
    if variant == "set_cover":
        views = []
        for v in cfg.get("views", []):
            if "bundle" in v:
                name = v["bundle"]
                if bundles is None or name not in bundles:
                    raise InvalidParameter(f"set-cover view refers to unknown bundle {name!r}")
                views.append((bundles[name], float(v["price"])))
            else:
                views.append((tuple(v["set"]), float(v["price"])))
        return SetCover(tuple(views), float(cfg["ceiling"]), int(cfg.get("max_views", DEFAULT_MAX_VIEWS)), support=support)
    if variant == "uniform_shannon_gain":
        return UniformShannonGain(support=support)
    if variant == "entropy_gain":
        w = cfg.get("weights")
        return EntropyGain(None if w is None else tuple(w), support=support)
    raise InvalidParameter(f"unknown APS variant {variant!r}")
