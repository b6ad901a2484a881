"""Instance-independent prices ``p(Q) = f(P_Q)``.

Each scheme prices a partition of the space.  ``bind(space)`` precomputes
the distribution once; the bound object's ``price(partition)`` is what the
arbitrage lab calls in its inner loops.  With a support set the partition is
restricted first and the weights are renormalized over the support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .aps import ApsScheme, _support_tuple, aps_scheme_from_config
from .errors import InvalidParameter, NonUniformDistribution
from .lattice import Partition, mask_of, restrict
from .query import BundleLike, partition_of
from .space import InstanceSpace


class BoundQps:
    def __init__(self, scheme: "QpsScheme", space: InstanceSpace):
        self.scheme = scheme
        self.space = space
        self.n = space.size
        if scheme.support is None:
            self.inside = None
            self.w = space.weight_array()
        else:
            if max(scheme.support) >= space.size:
                raise InvalidParameter("support contains indices outside the space")
            self.inside = np.asarray(scheme.support, dtype=np.int64)
            self.w = space.weight_array()[self.inside]
        total = math.fsum(self.w.tolist())
        if not total > 0:
            raise InvalidParameter("the support carries zero weight")
        self.total = total
        self.p = self.w / total
        self.uniform = bool(np.all(self.w == self.w[0]))

    def local(self, partition: Partition) -> Partition:
        if self.inside is None:
            return partition
        return restrict(partition, self.inside.tolist())

    def require_uniform(self) -> None:
        if not self.uniform:
            raise NonUniformDistribution(f"{self.scheme.id} is defined for the uniform distribution only")

    def price(self, partition: Partition) -> float:
        if partition.n != self.n:
            raise InvalidParameter(f"partition over {partition.n} databases, space has {self.n}")
        return self._price(self.local(partition), partition)

    def _price(self, local: Partition, full: Partition) -> float:
        raise NotImplementedError

    def block_mass(self, local: Partition) -> np.ndarray:
        return np.bincount(local.labels, weights=self.p, minlength=local.num_blocks)


class QpsScheme:
    info_safe = True
    bundle_safe = True
    support: tuple[int, ...] | None

    @property
    def id(self) -> str:
        raise NotImplementedError

    def _suffix(self) -> str:
        return "" if self.support is None else f"@support{list(self.support)}"

    def bind(self, space: InstanceSpace) -> BoundQps:
        return _bind(self, space)


@lru_cache(maxsize=256)
def _bind(scheme: QpsScheme, space: InstanceSpace) -> BoundQps:
    return scheme._make_bound(space)


def _fsum(a: np.ndarray) -> float:
    return math.fsum(a.tolist())


def _plog(p: np.ndarray) -> np.ndarray:
    p = p[p > 0]
    return p * np.log2(p)


# aggregates of answer-dependent prices


class _AggregateBound(BoundQps):
    def __init__(self, scheme: "MaxAggregate | ExpectedAggregate", space):
        super().__init__(scheme, space)
        inner = scheme.inner
        if scheme.support is not None:
            # the aggregate over C prices conflicts inside C
            sup = set(scheme.support) if inner.support is None else set(scheme.support) & set(inner.support)
            inner = _with_support(inner, tuple(sorted(sup)))
        self.inner = inner.bind(space)
        self.members = list(range(space.size)) if self.inside is None else self.inside.tolist()
        self.raw_w = np.asarray(self.w, dtype=float)

    def vector(self, full: Partition) -> list[float]:
        masks = full.block_masks
        labels = full.labels
        whole = self.space.full_mask()
        return [self.inner.price(whole ^ masks[labels[d]], d) for d in self.members]


def _with_support(s: ApsScheme, support: tuple[int, ...]) -> ApsScheme:
    import dataclasses

    return dataclasses.replace(s, support=support)


class _MaxBound(_AggregateBound):
    def _price(self, local, full):
        return max(self.vector(full))


class _ExpectedBound(_AggregateBound):
    def _price(self, local, full):
        return math.fsum((self.raw_w * np.asarray(self.vector(full))).tolist())


@dataclass(frozen=True)
class MaxAggregate(QpsScheme):
    """Largest answer-dependent price over the realizable answers."""

    inner: ApsScheme
    support: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def info_safe(self) -> bool:  # type: ignore[override]
        return self.inner.info_safe and self.inner.bundle_safe

    @property
    def bundle_safe(self) -> bool:  # type: ignore[override]
        return self.inner.info_safe and self.inner.bundle_safe

    @property
    def id(self) -> str:
        return f"max_aggregate({self.inner.id})" + self._suffix()

    def _make_bound(self, space):
        return _MaxBound(self, space)


@dataclass(frozen=True)
class ExpectedAggregate(QpsScheme):
    """Weighted sum ``sum_d w_d * p(Q, Q(D_d))`` with the raw weights.

    With unit weights and weighted coverage as the inner scheme this is the
    number of ordered pairs the bundle separates.
    """

    inner: ApsScheme
    support: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def info_safe(self) -> bool:  # type: ignore[override]
        return self.inner.info_safe and self.inner.bundle_safe

    @property
    def bundle_safe(self) -> bool:  # type: ignore[override]
        return self.inner.info_safe and self.inner.bundle_safe

    @property
    def id(self) -> str:
        return f"expected_aggregate({self.inner.id})" + self._suffix()

    def _make_bound(self, space):
        return _ExpectedBound(self, space)


# partition functionals


class _DitBound(BoundQps):
    def _price(self, local, full):
        wb = np.bincount(local.labels, weights=self.w, minlength=local.num_blocks)
        return _fsum(wb * (self.total - wb))


@dataclass(frozen=True)
class DitSize(QpsScheme):
    """Weighted count of separated ordered pairs, ``sum_B w_B (W - w_B)``."""

    support: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def id(self) -> str:
        return "dit_size" + self._suffix()

    def _make_bound(self, space):
        return _DitBound(self, space)


class _ShannonBound(BoundQps):
    def _price(self, local, full):
        return max(0.0, -_fsum(_plog(self.block_mass(local))))


@dataclass(frozen=True)
class Shannon(QpsScheme):
    """Entropy of the bundle output, i.e. the expected information gain."""

    support: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def id(self) -> str:
        return "shannon" + self._suffix()

    def _make_bound(self, space):
        return _ShannonBound(self, space)


class _TsallisBound(BoundQps):
    def _price(self, local, full):
        q = self.scheme.q
        pb = self.block_mass(local)
        return max(0.0, (1.0 - _fsum(pb**q)) / (q - 1.0))


@dataclass(frozen=True)
class Tsallis(QpsScheme):
    q: float = 2.0
    support: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.q > 1:
            raise InvalidParameter(f"Tsallis q must exceed 1, got {self.q}")
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def id(self) -> str:
        return f"tsallis[q={self.q:g}]" + self._suffix()

    def _make_bound(self, space):
        return _TsallisBound(self, space)


class _GuessingBound(BoundQps):
    def __init__(self, scheme, space):
        super().__init__(scheme, space)
        k = len(self.p)
        order = np.lexsort((np.arange(k), -self.p))
        self.rank_all = np.empty(k, dtype=np.int64)
        self.rank_all[order] = np.arange(1, k + 1)

    def _price(self, local, full):
        k = len(self.p)
        labels = local.labels
        order = np.lexsort((np.arange(k), -self.p, labels))
        sorted_labels = labels[order]
        starts = np.searchsorted(sorted_labels, np.arange(local.num_blocks))
        rank_block = np.empty(k, dtype=np.int64)
        rank_block[order] = np.arange(k) - starts[sorted_labels] + 1
        return _fsum(self.p * (self.rank_all - rank_block))


@dataclass(frozen=True)
class Guessing(QpsScheme):
    """Expected number of guesses saved: ``G(X) - sum_B p_B G(X | B)``.

    Guesses go in descending probability; equal probabilities are taken in
    index order, which does not change the value.
    """

    support: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def id(self) -> str:
        return "guessing" + self._suffix()

    def _make_bound(self, space):
        return _GuessingBound(self, space)


class _MinEntropyBound(BoundQps):
    def _price(self, local, full):
        best = np.zeros(local.num_blocks)
        np.maximum.at(best, local.labels, self.p)
        return math.log2(_fsum(best)) - math.log2(float(self.p.max()))


@dataclass(frozen=True)
class MinEntropy(QpsScheme):
    """Min-entropy leakage ``log2(sum_B max_{D in B} p_D / max_D p_D)``.

    No information arbitrage, but bundles can cost more than their parts
    under skewed priors.
    """

    support: tuple[int, ...] | None = None
    bundle_safe = False

    def __post_init__(self):
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def id(self) -> str:
        return "min_entropy" + self._suffix()

    def _make_bound(self, space):
        return _MinEntropyBound(self, space)


class _BlockCountBound(BoundQps):
    def __init__(self, scheme, space):
        super().__init__(scheme, space)
        self.require_uniform()

    def _price(self, local, full):
        beta = getattr(self.scheme, "beta", None)
        if beta is None:
            return math.log2(local.num_blocks)
        return math.log2(int(np.minimum(local.sizes, beta).sum()))


@dataclass(frozen=True)
class MinEntropyUniform(QpsScheme):
    """``log2 |P_Q|``; uniform distribution only."""

    support: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def id(self) -> str:
        return "min_entropy_uniform" + self._suffix()

    def _make_bound(self, space):
        return _BlockCountBound(self, space)


@dataclass(frozen=True)
class BetaSuccess(QpsScheme):
    """``log2 sum_B min(beta, |B|)``; uniform distribution only."""

    beta: int = 1
    support: tuple[int, ...] | None = None

    def __post_init__(self):
        if int(self.beta) != self.beta or self.beta < 1:
            raise InvalidParameter(f"beta must be a positive integer, got {self.beta}")
        object.__setattr__(self, "beta", int(self.beta))
        object.__setattr__(self, "support", _support_tuple(self.support))

    @property
    def id(self) -> str:
        return f"beta_success[beta={self.beta}]" + self._suffix()

    def _make_bound(self, space):
        return _BlockCountBound(self, space)


class _ConstantBound(BoundQps):
    def _price(self, local, full):
        return self.scheme.value


@dataclass(frozen=True)
class ConstantPrice(QpsScheme):
    """Every bundle costs ``value``.  The degenerate arbitrage-free scheme."""

    value: float = 0.0
    support: tuple[int, ...] | None = None

    @property
    def id(self) -> str:
        return f"constant[{self.value:g}]"

    def _make_bound(self, space):
        return _ConstantBound(self, space)


# entry points


def price_qps(scheme: QpsScheme, bundle: BundleLike, space: InstanceSpace) -> float:
    return scheme.bind(space).price(partition_of(bundle, space))


def price_partition(scheme: QpsScheme, partition: Partition, space: InstanceSpace) -> float:
    return scheme.bind(space).price(partition)


def uniform_closed_form(scheme: QpsScheme, sizes: Sequence[int]) -> float:
    """Block-size formulas valid under the uniform distribution.

    ``sizes`` are the block sizes of the (restricted) partition.
    """
    sizes = [int(s) for s in sizes]
    n = sum(sizes)
    if isinstance(scheme, Shannon):
        return math.log2(n) - math.fsum(s * math.log2(s) for s in sizes) / n
    if isinstance(scheme, Guessing):
        return (n * n - sum(s * s for s in sizes)) / (2 * n)
    if isinstance(scheme, MinEntropyUniform):
        return math.log2(len(sizes))
    if isinstance(scheme, BetaSuccess):
        return math.log2(sum(min(scheme.beta, s) for s in sizes))
    if isinstance(scheme, Tsallis):
        q = scheme.q
        return (1.0 - math.fsum((s / n) ** q for s in sizes)) / (q - 1.0)
    if isinstance(scheme, DitSize):
        return float(n * n - sum(s * s for s in sizes))
    if isinstance(scheme, MinEntropy):
        return math.log2(len(sizes))
    raise InvalidParameter(f"no closed form for {scheme.id}")


def qps_scheme_from_config(cfg: dict, bundles: dict | None = None) -> QpsScheme:
    """Build a scheme from its JSON fragment (the value under ``"qps"``)."""
    variant = cfg.get("variant")
    support = cfg.get("support")
    if variant in ("max_aggregate", "expected_aggregate"):
        inner_cfg = cfg.get("inner")
        if not isinstance(inner_cfg, dict):
            raise InvalidParameter(f"{variant} needs an inner APS scheme")
        inner = aps_scheme_from_config(inner_cfg.get("aps", inner_cfg), bundles)
        cls = MaxAggregate if variant == "max_aggregate" else ExpectedAggregate
        return cls(inner, support=support)
    if variant == "dit_size":
        return DitSize(support=support)
    if variant == "shannon":
        return Shannon(support=support)
    if variant == "tsallis":
        return Tsallis(float(cfg.get("q", 2.0)), support=support)
    if variant == "guessing":
        return Guessing(support=support)
    if variant == "min_entropy":
        return MinEntropy(support=support)
    if variant == "min_entropy_uniform":
        return MinEntropyUniform(support=support)
    if variant == "beta_success":
        return BetaSuccess(cfg.get("beta", 1), support=support)
    if variant == "constant":
        return ConstantPrice(float(cfg.get("value", 0.0)))
    raise InvalidParameter(f"unknown QPS variant {variant!r}")


def support_mask(scheme) -> int | None:
    return None if scheme.support is None else mask_of(scheme.support)
