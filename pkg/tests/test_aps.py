import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import brute_cover
from qprice.aps import (
    BudgetCoverage,
    ConcaveCoverage,
    EntropyGain,
    SetCover,
    Supremum,
    UniformShannonGain,
    WeightedCoverage,
    aps_scheme_from_config,
    min_weighted_cover,
    price_aps,
    price_at,
    price_vector,
)
from qprice.errors import InvalidParameter, TooManyViews, UnrealizedLabel
from qprice.lattice import IndexSet, all_partitions
from qprice.query import ExtensionalQuery, QueryBundle, determines_at, identity_bundle, label_of
from qprice.scenarios import keyvalue, value_of
from qprice.space import Database, ExplicitSpace

S2 = keyvalue(2)
Q = value_of("a1")


def weighted_space(n, seed=0):
    rng = np.random.default_rng(seed)
    dbs = tuple(Database.from_dict({"R": [[i]]}) for i in range(n))
    return ExplicitSpace(dbs, tuple(rng.uniform(0.1, 2.0, n).round(3)))


def safe_schemes(n, seed=1):
    rng = np.random.default_rng(seed)
    views = tuple((tuple(sorted(rng.choice(n, 3, replace=False).tolist())), float(rng.integers(1, 6))) for _ in range(5))
    return [
        WeightedCoverage(),
        Supremum(),
        BudgetCoverage(1.5),
        ConcaveCoverage("sqrt"),
        ConcaveCoverage("log1p"),
        ConcaveCoverage("cap", 1.2),
        SetCover(views, 30.0),
    ]


class TestExamples:
    def test_weighted_coverage(self):
        assert price_aps(WeightedCoverage(), Q, label_of(Q, 1, S2), S2) == 2.0

    @pytest.mark.parametrize("n", [2, 10])
    def test_log_conflict(self, n):
        s = keyvalue(n)
        assert price_at(ConcaveCoverage("log2_conflict"), value_of("a1"), 0, s) == n - 1

    def test_uniform_gain(self):
        s = keyvalue(10)
        assert price_at(UniformShannonGain(), value_of("a1"), 5, s) == 1.0
        assert price_at(UniformShannonGain(), identity_bundle(s), 5, s) == 10.0

    def test_constant(self):
        const = ExtensionalQuery((0,) * 4)
        for sc in safe_schemes(4) + [UniformShannonGain(), EntropyGain()]:
            assert price_at(sc, const, 0, S2) == 0.0

    def test_supremum_and_budget(self):
        s = keyvalue(2, weights=(0.7, 0.1, 0.2, 0.4))
        assert price_at(Supremum(), Q, 0, s) == 0.4
        assert math.isclose(price_at(BudgetCoverage(0.5), Q, 0, s), 0.5)
        assert math.isclose(price_at(WeightedCoverage(), Q, 0, s), 0.6)

    def test_unrealized(self):
        with pytest.raises(UnrealizedLabel):
            price_aps(WeightedCoverage(), Q, '[[["nope"]]]', S2)
        with pytest.raises(UnrealizedLabel):
            price_aps(WeightedCoverage(), Q, label_of(Q, 0, S2), S2, database=3)

    def test_price_vector(self):
        assert [p for _, p in price_vector(WeightedCoverage(), Q, S2)] == [2, 2, 2, 2]
        assert [p for _, p in price_vector(WeightedCoverage(), ExtensionalQuery((1,) * 4), S2)] == [0] * 4
        assert [p for _, p in price_vector(WeightedCoverage(), identity_bundle(S2), S2)] == [3] * 4


class TestSetCover:
    V = [(IndexSet.of([2, 3], 4), 5), (IndexSet.of([1, 3], 4), 4)]

    def test_example(self):
        assert min_weighted_cover(IndexSet.of([1, 2, 3], 4), self.V, 10) == 9
        assert min_weighted_cover(IndexSet.of([0, 1, 2, 3], 4), self.V, 10) == 10
        assert min_weighted_cover(IndexSet.empty(4), self.V, 10) == 0

    def test_no_views(self):
        assert min_weighted_cover({1}, [], 3.0) == 3.0
        assert min_weighted_cover(set(), [], 3.0) == 0.0

    def test_guards(self):
        with pytest.raises(TooManyViews):
            min_weighted_cover({0}, [({0}, 1)] * 25, 5)
        with pytest.raises(InvalidParameter):
            min_weighted_cover({0}, [({0}, 6)], 5)
        with pytest.raises(InvalidParameter):
            SetCover((((0,), -1.0),), 5.0)

    @given(st.integers(1, 10).flatmap(lambda n: st.tuples(
        st.just(n),
        st.sets(st.integers(0, n - 1)),
        st.lists(st.tuples(st.sets(st.integers(0, n - 1), min_size=1), st.integers(0, 9)), max_size=6),
    )))
    def test_matches_brute_force(self, t):
        n, target, views = t
        ceiling = max([p for _, p in views], default=0) + 5
        assert min_weighted_cover(target, views, ceiling) == brute_cover(target, views, ceiling)

    @given(st.integers(1, 8).flatmap(lambda n: st.tuples(
        st.sets(st.integers(0, n - 1)),
        st.sets(st.integers(0, n - 1)),
        st.lists(st.tuples(st.sets(st.integers(0, n - 1), min_size=1), st.integers(0, 9)), max_size=6),
    )))
    def test_monotone_and_subadditive(self, t):
        a, b, views = t
        c = 100
        fa, fb, fab = (min_weighted_cover(x, views, c) for x in (a, b, a | b))
        assert fab <= fa + fb
        assert fab >= max(fa, fb)

    def test_bundle_views_price_cheapest_determining_views(self):
        s = keyvalue(3)
        views = [
            (QueryBundle.of(value_of("a1")), 3.0),
            (QueryBundle.of(value_of("a2")), 2.0),
            (QueryBundle.of(value_of("a3")), 4.0),
            (QueryBundle.of(ExtensionalQuery((0, 0, 1, 1, 1, 1, 0, 0))), 1.0),
        ]
        sc = SetCover(tuple(views), 20.0)
        targets = [identity_bundle(s), value_of("a1"), ExtensionalQuery((0, 1, 1, 0, 1, 0, 0, 1)), ExtensionalQuery((0, 0, 0, 0, 1, 1, 1, 1))]
        for q in targets:
            for d in range(s.size):
                best = 20.0
                for r in range(len(views) + 1):
                    for combo in itertools.combinations(views, r):
                        if combo:
                            bundle = QueryBundle(tuple(x for v, _ in combo for x in v))
                            ok = determines_at(d, bundle, q, s)
                        else:
                            ok = not price_at(WeightedCoverage(), q, d, s)
                        if ok:
                            best = min(best, sum(p for _, p in combo))
                assert price_at(sc, q, d, s) == best


def all_masks(n):
    return range(1 << n)


class TestSetFunctionLaws:
    """Each safe scheme is a monotone, subadditive function of the conflict set."""

    n = 6

    @pytest.mark.parametrize("k", range(7))
    def test_monotone_subadditive(self, k):
        s = weighted_space(self.n)
        sc = safe_schemes(self.n)[k]
        f = [sc.bind(s).price(m, 0) for m in all_masks(self.n)]
        for a in all_masks(self.n):
            for b in all_masks(self.n):
                if a & b == a:
                    assert f[a] <= f[b] + 1e-12
                assert f[a | b] <= f[a] + f[b] + 1e-12
        assert f[0] == 0

    @pytest.mark.parametrize("k", range(7))
    def test_with_support(self, k):
        import dataclasses

        s = weighted_space(self.n)
        sc = dataclasses.replace(safe_schemes(self.n)[k], support=(0, 2, 3))
        f = [sc.bind(s).price(m, 0) for m in all_masks(self.n)]
        for a in all_masks(self.n):
            for b in all_masks(self.n):
                if a & b == a:
                    assert f[a] <= f[b] + 1e-12
                assert f[a | b] <= f[a] + f[b] + 1e-12
            assert f[a] == f[a & 0b1101]

    def test_uniform_gain_monotone_not_subadditive(self):
        s = keyvalue(3)
        f = [UniformShannonGain().bind(s).price(m, 0) for m in range(256)]
        assert all(f[a] <= f[b] for a in range(256) for b in range(256) if a & b == a)
        assert any(f[a | b] > f[a] + f[b] + 1e-9 for a in range(256) for b in range(256))

    def test_log_conflict_not_subadditive(self):
        sc = ConcaveCoverage("log2_conflict")
        assert not sc.bundle_safe
        f = sc.bind(S2).price
        assert f(0b0001, 0) == 0 and f(0b0010, 0) == 0 and f(0b0011, 0) == 1

    def test_entropy_gain_uniform_equals_uniform_gain(self):
        s = keyvalue(3)
        eg, ug = EntropyGain(), UniformShannonGain()
        for p in all_partitions(8):
            q = ExtensionalQuery.from_partition(p)
            for d in range(8):
                assert math.isclose(price_at(eg, q, d, s), price_at(ug, q, d, s), abs_tol=1e-12)

    def test_entropy_gain_zero_mass(self):
        s = keyvalue(2)
        eg = EntropyGain(weights=(1.0, 1.0, 0.0, 0.0))
        with pytest.raises(UnrealizedLabel):
            price_at(eg, Q, 2, s)


class TestConfig:
    def test_variants(self):
        assert aps_scheme_from_config({"variant": "weighted_coverage"}) == WeightedCoverage()
        assert aps_scheme_from_config({"variant": "concave", "shape": "log2_conflict"}) == ConcaveCoverage("log2_conflict")
        sc = aps_scheme_from_config({"variant": "set_cover", "views": [{"set": [2, 3], "price": 5}], "ceiling": 10})
        assert sc.views == (((2, 3), 5.0),)
        sc = aps_scheme_from_config({"variant": "set_cover", "views": [{"bundle": "V1", "price": 5}], "ceiling": 10}, {"V1": QueryBundle.of(Q)})
        assert sc.database_dependent

    def test_bad(self):
        with pytest.raises(InvalidParameter):
            aps_scheme_from_config({"variant": "nope"})
        with pytest.raises(InvalidParameter):
            ConcaveCoverage("cube")
        with pytest.raises(InvalidParameter):
            BudgetCoverage(-1)
