"""A small positive query language and bundle evaluation over instance spaces.

Queries are conjunctive queries (CQs), unions of CQs, full-relation scans and
extensional queries (an explicit output per database index).  A bundle is an
ordered tuple of queries; bundle union is concatenation.

Determinacy is decided relative to the finite instance space by enumeration:
``D |- Q2 -> Q1`` iff the conflict set of Q2 at D contains the conflict set of
Q1 at D, and ``Q2 -> Q1`` iff the partition of Q2 refines that of Q1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Iterator, Sequence, Union

from .errors import ArityMismatch, DatabaseNotInSpace, InvalidQuery, UnknownRelation
from .lattice import IndexSet, Partition, mask_of, refines
from .space import DEFAULT_MAX_SPACE, Database, InstanceSpace, SpaceTooLarge, row_key


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return "?" + self.name


Term = Any  # Var or constant


@dataclass(frozen=True)
class Atom:
    relation: str
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def variables(self) -> set[Var]:
        return {t for t in self.terms if isinstance(t, Var)}

    def __str__(self) -> str:
        return f"{self.relation}({','.join(map(str, self.terms))})"


class Query:
    """Base class; concrete queries are frozen dataclasses."""

    @property
    def is_boolean(self) -> bool:
        return False


@dataclass(frozen=True)
class ConjunctiveQuery(Query):
    """``head :- atom_1, ..., atom_k``.  Head terms may be variables or
    constants; an empty head makes the query boolean (non-emptiness of the
    match set)."""

    atoms: tuple[Atom, ...]
    head: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "head", tuple(self.head))
        if not self.atoms:
            raise InvalidQuery("a conjunctive query needs at least one atom")
        body_vars = set().union(*(a.variables for a in self.atoms))
        for t in self.head:
            if isinstance(t, Var) and t not in body_vars:
                raise InvalidQuery(f"head variable {t} does not occur in the body")

    @property
    def is_boolean(self) -> bool:
        return not self.head

    def __str__(self) -> str:
        return f"Q({','.join(map(str, self.head))}) :- " + ", ".join(map(str, self.atoms))


@dataclass(frozen=True)
class UnionQuery(Query):
    disjuncts: tuple[ConjunctiveQuery, ...]

    def __post_init__(self):
        object.__setattr__(self, "disjuncts", tuple(self.disjuncts))
        if not self.disjuncts:
            raise InvalidQuery("a union needs at least one disjunct")
        arities = {len(q.head) for q in self.disjuncts}
        if len(arities) != 1:
            raise InvalidQuery(f"union disjuncts have different head arities {sorted(arities)}")

    @property
    def is_boolean(self) -> bool:
        return self.disjuncts[0].is_boolean


@dataclass(frozen=True)
class FullRelation(Query):
    relation: str


@dataclass(frozen=True)
class ExtensionalQuery(Query):
    """Output given explicitly per database index; realizes any partition."""

    outputs: tuple

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @classmethod
    def from_partition(cls, p: Partition) -> "ExtensionalQuery":
        if not p.is_full_universe:
            raise InvalidQuery("extensional queries are defined over the whole space")
        return cls(tuple(int(x) for x in p.labels))

    @classmethod
    def from_blocks(cls, blocks, n: int) -> "ExtensionalQuery":
        return cls.from_partition(Partition.from_blocks(blocks, n))


def cq(relation: str, pattern: Sequence, head: Sequence = ()) -> ConjunctiveQuery:
    """Single-atom CQ; strings of the form ``"?x"`` become variables."""
    return ConjunctiveQuery((Atom(relation, tuple(_term(t) for t in pattern)),), tuple(_term(t) for t in head))


def _term(t):
    if isinstance(t, str) and t.startswith("?"):
        return Var(t[1:])
    return t


# evaluation

def _match(atom: Atom, db: Database, binding: dict) -> Iterator[dict]:
    try:
        rows = db[atom.relation]
    except UnknownRelation:
        raise UnknownRelation(atom.relation) from None
    arity = db.arity_of(atom.relation)
    if arity is not None and arity != len(atom.terms):
        raise ArityMismatch(f"{atom}: relation {atom.relation} has arity {arity}")
    for row in rows:
        b = binding
        ok = True
        for t, c in zip(atom.terms, row):
            if isinstance(t, Var):
                bound = b.get(t, _UNBOUND)
                if bound is _UNBOUND:
                    if b is binding:
                        b = dict(binding)
                    b[t] = c
                elif bound != c:
                    ok = False
                    break
            elif t != c:
                ok = False
                break
        if ok:
            yield b


_UNBOUND = object()


def _bindings(atoms: Sequence[Atom], db: Database, binding: dict) -> Iterator[dict]:
    if not atoms:
        yield binding
        return
    for b in _match(atoms[0], db, binding):
        yield from _bindings(atoms[1:], db, b)


def _eval_cq(q: ConjunctiveQuery, db: Database):
    if q.is_boolean:
        return any(True for _ in _bindings(q.atoms, db, {}))
    out = {tuple(b[t] if isinstance(t, Var) else t for t in q.head) for b in _bindings(q.atoms, db, {})}
    return tuple(sorted(out, key=row_key))


def evaluate(q: Query, d: Database, space: InstanceSpace | None = None):
    """Output of ``q`` on ``d``: a sorted tuple of rows, or a bool for
    boolean queries.  Extensional queries need ``space`` to locate ``d``."""
    if isinstance(q, ConjunctiveQuery):
        return _eval_cq(q, d)
    if isinstance(q, UnionQuery):
        if q.is_boolean:
            return any(_eval_cq(c, d) for c in q.disjuncts)
        rows = set()
        for c in q.disjuncts:
            rows.update(_eval_cq(c, d))
        return tuple(sorted(rows, key=row_key))
    if isinstance(q, FullRelation):
        return tuple(d[q.relation])
    if isinstance(q, ExtensionalQuery):
        if space is None:
            raise InvalidQuery("evaluating an extensional query needs the instance space")
        if len(q.outputs) != space.size:
            raise InvalidQuery(f"extensional query covers {len(q.outputs)} databases, space has {space.size}")
        return q.outputs[space.index_of(d)]
    raise InvalidQuery(f"not a query: {q!r}")


@dataclass(frozen=True)
class QueryBundle:
    queries: tuple[Query, ...]

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(self.queries))
        if not self.queries:
            raise InvalidQuery("a bundle needs at least one query")

    @classmethod
    def of(cls, *queries: Query) -> "QueryBundle":
        return cls(queries)

    def __add__(self, other: "QueryBundle") -> "QueryBundle":
        return QueryBundle(self.queries + other.queries)

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)


BundleLike = Union[QueryBundle, Query]


def as_bundle(b: BundleLike) -> QueryBundle:
    return b if isinstance(b, QueryBundle) else QueryBundle((b,))


def identity_bundle(space: InstanceSpace) -> QueryBundle:
    """One full-relation query per schema relation: reveals the database."""
    return QueryBundle(tuple(FullRelation(r.name) for r in space.schema.relations))


def emptiness_bundle(space: InstanceSpace) -> QueryBundle:
    """Single boolean UCQ that is true iff the database is non-empty."""
    disjuncts = tuple(
        ConjunctiveQuery((Atom(r.name, tuple(Var(f"x{j}") for j in range(r.arity))),))
        for r in space.schema.relations
    )
    return QueryBundle((UnionQuery(disjuncts),))


def _canonical(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, tuple):
        return [_canonical(v) for v in value]
    return value


def output_label(outputs: Sequence) -> str:
    """Canonical serialization of a bundle output (one entry per query)."""
    return json.dumps([_canonical(o) for o in outputs], separators=(",", ":"), default=str)


def bundle_output(bundle: BundleLike, d: Database, space: InstanceSpace | None = None) -> tuple:
    return tuple(evaluate(q, d, space) for q in as_bundle(bundle))


def label_of(bundle: BundleLike, d: Database | int, space: InstanceSpace) -> str:
    if isinstance(d, int):
        d = space.database_at(d)
    return output_label(bundle_output(bundle, d, space))


def _query_outputs(q: Query, space: InstanceSpace) -> tuple:
    if isinstance(q, ExtensionalQuery):
        if len(q.outputs) != space.size:
            raise InvalidQuery(f"extensional query covers {len(q.outputs)} databases, space has {space.size}")
        return q.outputs
    return tuple(evaluate(q, d, space) for d in space)


@lru_cache(maxsize=4096)
def _cached_query_outputs(q: Query, space: InstanceSpace) -> tuple:
    return _query_outputs(q, space)


def query_outputs(q: Query, space: InstanceSpace, max_size: int = DEFAULT_MAX_SPACE) -> tuple:
    """Output of ``q`` on every database, in index order (memoized)."""
    if space.size > max_size:
        raise SpaceTooLarge(f"|I| = {space.size} exceeds the cap {max_size}")
    try:
        return _cached_query_outputs(q, space)
    except TypeError:  # unhashable constants somewhere
        return _query_outputs(q, space)


def bundle_labels(bundle: BundleLike, space: InstanceSpace, max_size: int = DEFAULT_MAX_SPACE) -> list[str]:
    """Canonical output label of the bundle on every database."""
    per_query = [query_outputs(q, space, max_size) for q in as_bundle(bundle)]
    return [output_label(outs) for outs in zip(*per_query)]


@lru_cache(maxsize=4096)
def _cached_partition(bundle: QueryBundle, space: InstanceSpace) -> Partition:
    return _partition(bundle, space)


def _partition(bundle: QueryBundle, space: InstanceSpace) -> Partition:
    per_query = [query_outputs(q, space) for q in bundle]
    ids: dict = {}
    labels = [ids.setdefault(key, len(ids)) for key in zip(*per_query)]
    return Partition(labels)


def partition_of(bundle: BundleLike, space: InstanceSpace, max_size: int = DEFAULT_MAX_SPACE) -> Partition:
    """The partition of the space induced by equal bundle outputs."""
    if space.size > max_size:
        raise SpaceTooLarge(f"|I| = {space.size} exceeds the cap {max_size}")
    bundle = as_bundle(bundle)
    try:
        return _cached_partition(bundle, space)
    except TypeError:
        return _partition(bundle, space)


def agreement_set(bundle: BundleLike, label: str, space: InstanceSpace) -> IndexSet:
    """Databases whose bundle output equals ``label``; empty if unrealized."""
    labels = bundle_labels(bundle, space)
    return IndexSet(mask_of(i for i, lab in enumerate(labels) if lab == label), space.size)


def conflict_set(bundle: BundleLike, label: str, space: InstanceSpace) -> IndexSet:
    """Databases whose bundle output differs from ``label``."""
    return agreement_set(bundle, label, space).complement()


def _index(d: Database | int, space: InstanceSpace) -> int:
    if isinstance(d, Database):
        return space.index_of(d)
    if not 0 <= d < space.size:
        raise DatabaseNotInSpace(f"index {d}")
    return int(d)


def conflict_at(bundle: BundleLike, d: Database | int, space: InstanceSpace) -> IndexSet:
    """Conflict set of ``bundle`` at the answer it gives on ``d``."""
    i = _index(d, space)
    p = partition_of(bundle, space)
    return IndexSet(p.block_masks[p.block_id(i)], space.size).complement()


def determines_at(d: Database | int, q2: BundleLike, q1: BundleLike, space: InstanceSpace) -> bool:
    """Data-dependent determinacy ``d |- q2 -> q1``."""
    return conflict_at(q2, d, space).issuperset(conflict_at(q1, d, space))


def determines(q2: BundleLike, q1: BundleLike, space: InstanceSpace) -> bool:
    """Information-theoretic determinacy ``q2 -> q1`` relative to the space."""
    return refines(partition_of(q2, space), partition_of(q1, space))


def query_from_config(cfg: dict) -> Query:
    kind = cfg.get("kind", "cq")
    if kind == "cq":
        atoms = tuple(Atom(a["rel"], tuple(_term(t) for t in a["pattern"])) for a in cfg["atoms"])
        return ConjunctiveQuery(atoms, tuple(_term(t) for t in cfg.get("head", ())))
    if kind == "union":
        return UnionQuery(tuple(query_from_config({**d, "kind": "cq"}) for d in cfg["disjuncts"]))
    if kind == "full":
        return FullRelation(cfg["rel"])
    if kind == "extensional":
        m = cfg["map"]
        if isinstance(m, dict):
            keys = sorted(int(k) for k in m)
            if keys != list(range(len(keys))):
                raise InvalidQuery("extensional map must be total over 0..|I|-1")
            return ExtensionalQuery(tuple(_hashable(m[str(k)] if str(k) in m else m[k]) for k in keys))
        return ExtensionalQuery(tuple(_hashable(v) for v in m))
    raise InvalidQuery(f"unknown query kind {kind!r}")


def _hashable(v):
    if isinstance(v, list):
        return tuple(_hashable(x) for x in v)
    return v
