import math

import pytest
from hypothesis import given, strategies as st

from qprice.errors import DatabaseNotInSpace, IndexOutOfRange, InvalidSpace, SpaceTooLarge
from qprice.space import Database, ExplicitSpace, KeyValueSpace, SubsetSpace, space_from_config


class TestKeyValue:
    def test_two_keys_order(self):
        s = KeyValueSpace(("a1", "a2"), (0, 1))
        assert len(s.enumerate()) == 4
        assert [s.label(i) for i in range(4)] == ["D00", "D01", "D10", "D11"]
        assert s.database_at(1) == Database.from_dict({"R": [("a1", 0), ("a2", 1)]})

    def test_size_is_values_to_the_keys(self):
        s = KeyValueSpace(("a", "b", "c"), (0, 1, 2))
        assert s.size == 27

    @given(st.integers(1, 4), st.integers(1, 3))
    def test_round_trip(self, n, v):
        s = KeyValueSpace(tuple(f"k{i}" for i in range(n)), tuple(range(v)))
        assert [s.index_of(s.database_at(i)) for i in range(s.size)] == list(range(s.size))

    def test_cap(self):
        s = KeyValueSpace(tuple(f"k{i}" for i in range(30)), (0, 1))
        with pytest.raises(SpaceTooLarge):
            s.enumerate()

    def test_stable_enumeration(self):
        a = KeyValueSpace(("a1", "a2"), (0, 1)).enumerate()
        b = KeyValueSpace(("a1", "a2"), (0, 1)).enumerate()
        assert a == b

    def test_foreign_database(self):
        s = KeyValueSpace(("a1", "a2"), (0, 1))
        with pytest.raises(DatabaseNotInSpace):
            s.index_of(Database.from_dict({"R": [("a1", 0)]}))


class TestSubset:
    def test_empty_base(self):
        base = Database.from_dict({})
        s = SubsetSpace(base)
        assert s.size == 1
        assert s.enumerate() == [base]

    def test_two_tuples(self):
        s = SubsetSpace(Database.from_dict({"R": [["t1"], ["t2"]]}))
        dbs = s.enumerate()
        assert [sorted(d["R"]) for d in dbs] == [[], [("t1",)], [("t2",)], [("t1",), ("t2",)]]
        assert all(s.index_of(d) == i for i, d in enumerate(dbs))


class TestWeights:
    def test_uniform(self):
        s = KeyValueSpace(("a1", "a2"), (0, 1))
        assert s.weight_of(3) == 1
        assert s.is_uniform

    def test_explicit(self):
        s = KeyValueSpace(("a1", "a2"), (0, 1), weights=(0.7, 0.1, 0.1, 0.1))
        assert s.weight_of(0) == 0.7
        assert math.isclose(sum(s.probability_of(i) for i in range(4)), 1.0, abs_tol=1e-12)

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            KeyValueSpace(("a1",), (0, 1)).weight_of(2)

    @pytest.mark.parametrize("w", [(1, 1, 1), (-1, 1, 1, 1), (0, 0, 0, 0)])
    def test_bad_weights(self, w):
        with pytest.raises(InvalidSpace):
            KeyValueSpace(("a1", "a2"), (0, 1), weights=w)

    @given(st.lists(st.floats(0.01, 100), min_size=1, max_size=20))
    def test_probabilities_sum_to_one(self, w):
        dbs = tuple(Database.from_dict({"R": [[i]]}) for i in range(len(w)))
        s = ExplicitSpace(dbs, tuple(w))
        assert abs(math.fsum(s.probability_of(i) for i in range(s.size)) - 1) <= 1e-12


def test_explicit_rejects_duplicates():
    d = Database.from_dict({"R": [[1]]})
    with pytest.raises(InvalidSpace):
        ExplicitSpace((d, d))


def test_database_rows_sorted():
    a = Database.from_dict({"R": [(2, "x"), (1, "y")]})
    b = Database.from_dict({"R": [(1, "y"), (2, "x")]})
    assert a == b and hash(a) == hash(b)


class TestConfig:
    def test_keyvalue(self):
        s = space_from_config({"kind": "keyvalue", "keys": ["a1", "a2"], "values": [0, 1], "weights": "uniform"})
        assert s.size == 4

    def test_subset(self):
        s = space_from_config({"kind": "subset", "base": {"R": [["t1"], ["t2"]]}})
        assert s.size == 4

    def test_explicit(self):
        s = space_from_config({"kind": "explicit", "databases": [{"R": [[1]]}, {"R": [[2]]}], "weights": [3, 1]})
        assert s.probability_of(0) == 0.75

    def test_unknown_kind(self):
        with pytest.raises(InvalidSpace):
            space_from_config({"kind": "cube"})
