"""Ready-made spaces, bundles and families for the worked scenarios.

Shared by the demos, the default CLI workspace and the test-suite.
"""

from __future__ import annotations

from dataclasses import dataclass

from .aps import ConcaveCoverage, EntropyGain, UniformShannonGain
from .lab import BundleFamily
from .lattice import Partition
from .qps import MinEntropy, MinEntropyUniform
from .query import ConjunctiveQuery, ExtensionalQuery, QueryBundle, cq, emptiness_bundle, identity_bundle
from .space import Database, ExplicitSpace, KeyValueSpace, SubsetSpace


def keyvalue(n: int = 2, weights=None) -> KeyValueSpace:
    """R(A, B) with keys a1..an and binary values."""
    return KeyValueSpace(tuple(f"a{i}" for i in range(1, n + 1)), (0, 1), weights)


def value_of(key: str = "a1") -> ConjunctiveQuery:
    """Q(x) = R(key, x): the value stored under ``key``."""
    return cq("R", [key, "?x"], ["?x"])


def select_key(key: str) -> ConjunctiveQuery:
    """The tuples of R whose key is ``key``."""
    return cq("R", [key, "?x"], [key, "?x"])


def has_value(value) -> ConjunctiveQuery:
    """Q() = R(x, value): does some key hold ``value``?"""
    return cq("R", ["?x", value])


@dataclass
class Scenario:
    space: object
    family: BundleFamily
    scheme: object
    bundles: dict


def min_entropy_example() -> Scenario:
    """Skewed two-key space where min-entropy prices a bundle above its parts."""
    space = keyvalue(2, weights=(0.7, 0.1, 0.1, 0.1))
    q1, q2 = select_key("a1"), select_key("a2")
    fam = BundleFamily([("Q1", q1), ("Q2", q2)], depth=1)
    return Scenario(space, fam, MinEntropy(), {"Q1": QueryBundle.of(q1), "Q2": QueryBundle.of(q2)})


def skewed_entropy_space(light: int = 16, others: int = 32) -> ExplicitSpace:
    """One heavy database (index 0), ``light`` light ones, ``others`` filler.

    Inside the union of the heavy and light databases the heavy one holds
    half the mass and each light one 1/(2*light).
    """
    dbs = tuple(Database.from_dict({"R": [[i]]}) for i in range(1 + light + others))
    weights = (float(light),) + (1.0,) * (light + others)
    return ExplicitSpace(dbs, weights)


def entropy_gain_example(light: int = 16, others: int = 32) -> Scenario:
    """Two extensional bundles whose agreement sets A (heavy + light) and
    B (light only) differ by the heavy database.  At a light database the
    finer bundle determines the coarser one yet costs less."""
    space = skewed_entropy_space(light, others)
    n = space.size
    heavy = [0]
    lights = list(range(1, 1 + light))
    rest = list(range(1 + light, n))
    qa = ExtensionalQuery.from_partition(Partition.from_blocks([heavy + lights, rest], n))
    qb = ExtensionalQuery.from_partition(Partition.from_blocks([heavy, lights, rest], n))
    fam = BundleFamily([("QA", qa), ("QB", qb)], depth=0)
    return Scenario(space, fam, EntropyGain(), {"QA": QueryBundle.of(qa), "QB": QueryBundle.of(qb)})


def serendipity_example() -> Scenario:
    """Subsets of a two-tuple database; emptiness reveals everything at the empty instance."""
    space = SubsetSpace(Database.from_dict({"R": [["t1"], ["t2"]]}))
    empty = emptiness_bundle(space)
    ident = identity_bundle(space)
    fam = BundleFamily([("Q0", empty), ("identity", ident)], depth=0)
    return Scenario(space, fam, MinEntropyUniform(), {"Q0": empty, "identity": ident})


def tradeoff_example(n: int = 10) -> Scenario:
    space = keyvalue(n)
    q = value_of("a1")
    fam = BundleFamily([("Q", q)], depth=0)
    return Scenario(space, fam, ConcaveCoverage("log2_conflict"), {"Q": QueryBundle.of(q)})


def tradeoff_counterexample(n: int = 10) -> Scenario:
    sc = tradeoff_example(n)
    sc.scheme = UniformShannonGain()
    return sc
