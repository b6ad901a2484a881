"""Schemas, databases and finite instance spaces.

An instance space is the public, finite set of candidate databases.  Every
member has a stable integer index; all other modules key on that index.

Canonical orderings:

* ``KeyValueSpace``: mixed radix over the declared keys, first key most
  significant, digit = position of the value in the declared value list.
  For keys (a1, a2) and values (0, 1) the order is D00, D01, D10, D11.
* ``SubsetSpace``: bitmask over the base tuples in declared order, bit ``j``
  set iff base tuple ``j`` is present.
* ``ExplicitSpace``: input order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    ArityMismatch,
    DatabaseNotInSpace,
    IndexOutOfRange,
    InvalidSpace,
    SpaceTooLarge,
    UnknownRelation,
)

DEFAULT_MAX_SPACE = 2**24

Constant = Any
Row = tuple


def const_key(c: Constant) -> tuple:
    """Sort key that orders constants of mixed type deterministically."""
    return (type(c).__name__, c)


def row_key(row: Row) -> tuple:
    return tuple(const_key(c) for c in row)


@dataclass(frozen=True)
class RelationSchema:
    name: str
    arity: int
    domains: tuple[tuple, ...] | None = None

    def __post_init__(self):
        if not self.name:
            raise InvalidSpace("relation name must be non-empty")
        if self.arity < 1:
            raise InvalidSpace(f"relation {self.name}: arity must be positive")
        if self.domains is not None:
            if len(self.domains) != self.arity:
                raise InvalidSpace(f"relation {self.name}: {self.arity} attributes, {len(self.domains)} domains")
            if any(len(d) == 0 for d in self.domains):
                raise InvalidSpace(f"relation {self.name}: empty attribute domain")


@dataclass(frozen=True)
class Schema:
    relations: tuple[RelationSchema, ...]

    def __post_init__(self):
        names = [r.name for r in self.relations]
        if len(set(names)) != len(names):
            raise InvalidSpace(f"duplicate relation names in schema: {names}")

    def __getitem__(self, name: str) -> RelationSchema:
        for r in self.relations:
            if r.name == name:
                return r
        raise UnknownRelation(name)

    def __contains__(self, name: str) -> bool:
        return any(r.name == name for r in self.relations)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.relations)


@dataclass(frozen=True)
class Database:
    """A relational instance: a sorted tuple set per relation.

    Equality and hashing are structural over ``relations``; the schema only
    serves arity checks during evaluation.
    """

    relations: tuple[tuple[str, tuple[Row, ...]], ...]
    schema: Schema | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_dict(cls, data: Mapping[str, Iterable[Sequence]], schema: Schema | None = None) -> "Database":
        rels: dict[str, set] = {}
        for name, rows in data.items():
            rels[name] = {tuple(r) for r in rows}
        if schema is not None:
            for name in rels:
                if name not in schema:
                    raise UnknownRelation(name)
            for rs in schema.relations:
                rows = rels.setdefault(rs.name, set())
                for row in rows:
                    if len(row) != rs.arity:
                        raise ArityMismatch(f"{rs.name}{row}: expected arity {rs.arity}")
                    if rs.domains is not None:
                        for c, dom in zip(row, rs.domains):
                            if c not in dom:
                                raise InvalidSpace(f"{rs.name}{row}: constant {c!r} outside its domain")
            order = list(schema.names)
        else:
            order = sorted(rels)
        relations = tuple((name, tuple(sorted(rels[name], key=row_key))) for name in order)
        return cls(relations, schema)

    def __getitem__(self, name: str) -> tuple[Row, ...]:
        for rel, rows in self.relations:
            if rel == name:
                return rows
        if self.schema is not None and name in self.schema:
            return ()
        raise UnknownRelation(name)

    def arity_of(self, name: str) -> int | None:
        if self.schema is not None:
            return self.schema[name].arity
        rows = self[name]
        return len(rows[0]) if rows else None

    @property
    def num_tuples(self) -> int:
        return sum(len(rows) for _, rows in self.relations)

    def to_dict(self) -> dict[str, list[list]]:
        return {name: [list(r) for r in rows] for name, rows in self.relations}

    def __str__(self) -> str:
        parts = []
        for name, rows in self.relations:
            parts.append(name + "{" + ", ".join("(" + ",".join(map(str, r)) + ")" for r in rows) + "}")
        return " ".join(parts)


def _check_weights(weights, size: int) -> tuple[float, ...] | None:
    if weights is None:
        return None
    w = tuple(float(x) for x in weights)
    if len(w) != size:
        raise InvalidSpace(f"{len(w)} weights for {size} databases")
    if any(not math.isfinite(x) or x < 0 for x in w):
        raise InvalidSpace("weights must be finite and non-negative")
    if not sum(w) > 0:
        raise InvalidSpace("weights must have positive total")
    return w


class InstanceSpace:
    """Finite, canonically indexed set of candidate databases.

    Subclasses provide ``size``, ``schema``, ``database_at`` and
    ``index_of``; weights default to uniform (every database weighs 1).
    """

    weights: tuple[float, ...] | None
    schema: Schema

    @property
    def size(self) -> int:
        raise NotImplementedError

    def database_at(self, index: int) -> Database:
        raise NotImplementedError

    def index_of(self, db: Database) -> int:
        raise NotImplementedError

    def __len__(self) -> int:
        return self.size

    def _check_index(self, index: int) -> int:
        if not isinstance(index, (int, np.integer)) or not 0 <= index < self.size:
            raise IndexOutOfRange(f"database index {index} outside 0..{self.size - 1}")
        return int(index)

    def __iter__(self) -> Iterator[Database]:
        for i in range(self.size):
            yield self.database_at(i)

    def enumerate(self, max_size: int = DEFAULT_MAX_SPACE) -> list[Database]:
        """All members in canonical index order."""
        if self.size > max_size:
            raise SpaceTooLarge(f"|I| = {self.size} exceeds the cap {max_size}")
        return list(self)

    def contains(self, db: Database) -> bool:
        try:
            self.index_of(db)
        except DatabaseNotInSpace:
            return False
        return True

    @property
    def is_uniform(self) -> bool:
        if self.weights is None:
            return True
        first = self.weights[0]
        return all(math.isclose(w, first, rel_tol=1e-12, abs_tol=0.0) for w in self.weights)

    def weight_of(self, index: int) -> float:
        index = self._check_index(index)
        return 1.0 if self.weights is None else self.weights[index]

    def probability_of(self, index: int) -> float:
        index = self._check_index(index)
        if self.weights is None:
            return 1.0 / self.size
        return self.weights[index] / math.fsum(self.weights)

    def weight_array(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(self.size)
        return np.asarray(self.weights, dtype=float)

    def probabilities(self) -> np.ndarray:
        w = self.weight_array()
        return w / math.fsum(w)

    def full_mask(self) -> int:
        return (1 << self.size) - 1


@dataclass(frozen=True, eq=True)
class KeyValueSpace(InstanceSpace):
    """All instances of a binary relation R(A, B) whose key A takes exactly
    the declared keys and whose B values range over a finite domain."""

    keys: tuple
    values: tuple
    weights: tuple[float, ...] | None = None
    relation: str = "R"

    def __post_init__(self):
        object.__setattr__(self, "keys", tuple(self.keys))
        object.__setattr__(self, "values", tuple(self.values))
        if len(set(self.keys)) != len(self.keys):
            raise InvalidSpace("duplicate keys")
        if len(set(self.values)) != len(self.values) or not self.values:
            raise InvalidSpace("value domain must be non-empty and duplicate-free")
        object.__setattr__(self, "weights", _check_weights(self.weights, self.size))

    @cached_property
    def schema(self) -> Schema:
        return Schema((RelationSchema(self.relation, 2, (self.keys, self.values)),))

    @property
    def size(self) -> int:
        return len(self.values) ** len(self.keys)

    def _digits(self, index: int) -> list[int]:
        base = len(self.values)
        digits = []
        for _ in self.keys:
            index, d = divmod(index, base)
            digits.append(d)
        return digits[::-1]

    def database_at(self, index: int) -> Database:
        index = self._check_index(index)
        digits = self._digits(index)
        rows = sorted(((k, self.values[d]) for k, d in zip(self.keys, digits)), key=row_key)
        return Database(((self.relation, tuple(rows)),), self.schema)

    def index_of(self, db: Database) -> int:
        try:
            rows = db[self.relation]
        except UnknownRelation:
            raise DatabaseNotInSpace(str(db)) from None
        if len(db.relations) != 1 or len(rows) != len(self.keys):
            raise DatabaseNotInSpace(str(db))
        assignment = dict(rows)
        base = len(self.values)
        index = 0
        for k in self.keys:
            if k not in assignment or assignment[k] not in self.values:
                raise DatabaseNotInSpace(str(db))
            index = index * base + self.values.index(assignment[k])
        return index

    def label(self, index: int) -> str:
        """Short name such as ``D01`` (value positions per key)."""
        digits = self._digits(self._check_index(index))
        return "D" + "".join(str(d) for d in digits)


@dataclass(frozen=True, eq=True)
class SubsetSpace(InstanceSpace):
    """All sub-instances of a base database."""

    base: Database
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "weights", _check_weights(self.weights, self.size))

    @cached_property
    def tuples(self) -> tuple[tuple[str, Row], ...]:
        return tuple((name, row) for name, rows in self.base.relations for row in rows)

    @cached_property
    def schema(self) -> Schema:
        if self.base.schema is not None:
            return self.base.schema
        rels = []
        for name, rows in self.base.relations:
            if not rows:
                raise InvalidSpace(f"cannot infer arity of empty base relation {name}; pass a schema")
            arity = len(rows[0])
            domains = tuple(tuple(sorted({r[j] for r in rows}, key=const_key)) for j in range(arity))
            rels.append(RelationSchema(name, arity, domains))
        return Schema(tuple(rels))

    @property
    def size(self) -> int:
        return 2 ** self.base.num_tuples

    def database_at(self, index: int) -> Database:
        index = self._check_index(index)
        chosen: dict[str, list] = {name: [] for name, _ in self.base.relations}
        for j, (name, row) in enumerate(self.tuples):
            if index >> j & 1:
                chosen[name].append(row)
        # base rows are sorted already, so each chosen list is sorted
        return Database(tuple((name, tuple(rows)) for name, rows in chosen.items()), self.schema)

    @cached_property
    def _positions(self) -> dict:
        return {t: j for j, t in enumerate(self.tuples)}

    def index_of(self, db: Database) -> int:
        position = self._positions
        names = {name for name, _ in self.base.relations}
        index = 0
        for name, rows in db.relations:
            if name not in names:
                if rows:
                    raise DatabaseNotInSpace(str(db))
                continue
            for row in rows:
                j = position.get((name, row))
                if j is None:
                    raise DatabaseNotInSpace(str(db))
                index |= 1 << j
        return index


@dataclass(frozen=True, eq=True)
class ExplicitSpace(InstanceSpace):
    """A user-supplied list of databases, indexed in input order."""

    databases: tuple[Database, ...]
    weights: tuple[float, ...] | None = None
    declared_schema: Schema | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "databases", tuple(self.databases))
        if not self.databases:
            raise InvalidSpace("an explicit space needs at least one database")
        if len(set(self.databases)) != len(self.databases):
            raise InvalidSpace("explicit space contains duplicate databases")
        object.__setattr__(self, "weights", _check_weights(self.weights, self.size))
        object.__setattr__(self, "_positions", {db: i for i, db in enumerate(self.databases)})

    @property
    def schema(self) -> Schema:
        if self.declared_schema is not None:
            return self.declared_schema
        arity: dict[str, int] = {}
        for db in self.databases:
            for name, rows in db.relations:
                if rows:
                    arity.setdefault(name, len(rows[0]))
        names = sorted({name for db in self.databases for name, _ in db.relations})
        return Schema(tuple(RelationSchema(n, arity.get(n, 1)) for n in names))

    @property
    def size(self) -> int:
        return len(self.databases)

    def database_at(self, index: int) -> Database:
        return self.databases[self._check_index(index)]

    def index_of(self, db: Database) -> int:
        try:
            return self._positions[db]
        except KeyError:
            raise DatabaseNotInSpace(str(db)) from None


def space_from_config(cfg: Mapping[str, Any]) -> InstanceSpace:
    """Build a space from its JSON fragment (the value under ``"space"``)."""
    kind = cfg.get("kind")
    weights = cfg.get("weights", "uniform")
    if weights == "uniform":
        weights = None
    elif isinstance(weights, str) or not isinstance(weights, Sequence):
        raise InvalidSpace(f"weights must be 'uniform' or a list, got {weights!r}")
    if kind == "keyvalue":
        return KeyValueSpace(tuple(cfg["keys"]), tuple(cfg["values"]), weights, cfg.get("relation", "R"))
    if kind == "subset":
        base = Database.from_dict(cfg["base"])
        return SubsetSpace(base, weights)
    if kind == "explicit":
        dbs = tuple(Database.from_dict(d) for d in cfg["databases"])
        return ExplicitSpace(dbs, weights)
    raise InvalidSpace(f"unknown space kind {kind!r}")
