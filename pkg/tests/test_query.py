import itertools

import pytest
from hypothesis import given, strategies as st

from qprice.errors import ArityMismatch, DatabaseNotInSpace, InvalidQuery, UnknownRelation
from qprice.lattice import IndexSet, Partition, all_partitions, join
from qprice.query import (
    Atom,
    ConjunctiveQuery,
    ExtensionalQuery,
    FullRelation,
    QueryBundle,
    UnionQuery,
    Var,
    agreement_set,
    conflict_at,
    conflict_set,
    cq,
    determines,
    determines_at,
    emptiness_bundle,
    evaluate,
    identity_bundle,
    label_of,
    partition_of,
    query_from_config,
)
from qprice.scenarios import has_value, keyvalue, value_of
from qprice.space import Database, SubsetSpace

S2 = keyvalue(2)
Q = value_of("a1")
Q2 = has_value(1)


class TestEvaluate:
    def test_value_lookup(self):
        d01 = S2.database_at(1)
        assert evaluate(Q, d01) == ((0,),)

    def test_boolean(self):
        assert evaluate(has_value(1), S2.database_at(0)) is False
        assert evaluate(has_value(1), S2.database_at(1)) is True

    def test_full_relation(self):
        d = S2.database_at(2)
        assert evaluate(FullRelation("R"), d) == d["R"]

    def test_join_query(self):
        d = Database.from_dict({"E": [(1, 2), (2, 3), (3, 1)]})
        x, y, z = Var("x"), Var("y"), Var("z")
        path = ConjunctiveQuery((Atom("E", (x, y)), Atom("E", (y, z))), (x, z))
        assert evaluate(path, d) == ((1, 3), (2, 1), (3, 2))

    def test_repeated_variable(self):
        d = Database.from_dict({"E": [(1, 1), (1, 2)]})
        x = Var("x")
        assert evaluate(ConjunctiveQuery((Atom("E", (x, x)),), (x,)), d) == ((1,),)

    def test_union(self):
        u = UnionQuery((cq("R", ["a1", "?x"], ["?x"]), cq("R", ["a2", "?x"], ["?x"])))
        assert evaluate(u, S2.database_at(1)) == ((0,), (1,))

    def test_errors(self):
        d = S2.database_at(0)
        with pytest.raises(UnknownRelation):
            evaluate(cq("S", ["?x"], ["?x"]), d)
        with pytest.raises(ArityMismatch):
            evaluate(cq("R", ["?x"], ["?x"]), d)
        with pytest.raises(InvalidQuery):
            cq("R", ["?x", "?y"], ["?z"])
        with pytest.raises(InvalidQuery):
            UnionQuery((cq("R", ["?x", "?y"], ["?x"]), cq("R", ["?x", "?y"])))

    def test_config(self):
        q = query_from_config({"kind": "cq", "atoms": [{"rel": "R", "pattern": ["a1", "?x"]}], "head": ["?x"]})
        assert q == Q
        e = query_from_config({"kind": "extensional", "map": {"0": "a", "1": "a", "2": "b", "3": "b"}})
        assert str(partition_of(e, S2)) == "01|23"


class TestPartitions:
    def test_examples(self):
        assert str(partition_of(Q, S2)) == "01|23"
        assert str(partition_of(has_value(0), S2)) == "012|3"
        assert partition_of(ExtensionalQuery((7, 7, 7, 7)), S2).num_blocks == 1

    def test_blocks_cover(self):
        p = partition_of(Q2, S2)
        assert sorted(i for b in p.blocks for i in b) == [0, 1, 2, 3]

    def test_extensional_realizes_everything(self):
        for p in all_partitions(4):
            assert partition_of(ExtensionalQuery.from_partition(p), S2) == p

    def test_union_is_join(self):
        qs = [Q, value_of("a2"), has_value(0), has_value(1), FullRelation("R")]
        for a, b in itertools.product(qs, repeat=2):
            assert partition_of(QueryBundle.of(a, b), S2) == join(partition_of(a, S2), partition_of(b, S2))


class TestConflicts:
    def test_running_example(self):
        assert conflict_set(Q, label_of(Q, 1, S2), S2) == IndexSet.of([2, 3], 4)
        assert conflict_at(Q2, 0, S2) == {1, 2, 3}

    def test_constant_and_identity(self):
        const = ExtensionalQuery((0,) * 4)
        assert conflict_at(const, 2, S2) == set()
        assert conflict_at(identity_bundle(S2), 2, S2) == {0, 1, 3}

    def test_agreement_is_block(self):
        for d in range(4):
            assert agreement_set(Q, label_of(Q, d, S2), S2).to_list() == partition_of(Q, S2).block_of(d)

    def test_unrealized_label_has_empty_agreement(self):
        assert not agreement_set(Q, '[[["zz"]]]', S2)

    def test_union_conflict(self):
        qs = [Q, value_of("a2"), has_value(0), has_value(1)]
        for a, b in itertools.product(qs, repeat=2):
            for d in range(4):
                assert conflict_at(QueryBundle.of(a, b), d, S2) == conflict_at(a, d, S2) | conflict_at(b, d, S2)


class TestDeterminacy:
    def test_data_dependent(self):
        assert determines_at(0, Q2, Q, S2)
        assert determines_at(S2.database_at(0), Q, Q, S2)
        assert not determines_at(1, Q, identity_bundle(S2), S2)

    def test_information_theoretic(self):
        assert determines(identity_bundle(S2), Q, S2)
        assert not determines(Q, Q2, S2)
        assert determines(QueryBundle.of(Q, Q2), Q, S2)

    def test_not_in_space(self):
        with pytest.raises(DatabaseNotInSpace):
            determines_at(9, Q, Q, S2)

    @given(st.lists(st.integers(0, 2), min_size=8, max_size=8), st.lists(st.integers(0, 2), min_size=8, max_size=8))
    def test_global_implies_local(self, a, b):
        s = keyvalue(3)
        qa, qb = ExtensionalQuery(tuple(a)), ExtensionalQuery(tuple(b))
        if determines(qa, qb, s):
            assert all(determines_at(d, qa, qb, s) for d in range(8))


def test_emptiness_bundle():
    s = SubsetSpace(Database.from_dict({"R": [["t1"], ["t2"]]}))
    assert str(partition_of(emptiness_bundle(s), s)) == "0|123"
    assert str(partition_of(identity_bundle(s), s)) == "0|1|2|3"
