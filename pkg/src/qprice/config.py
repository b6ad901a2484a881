"""Workspace files: one space plus named queries, bundles, schemes and families."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .aps import aps_scheme_from_config
from .errors import ConfigError, QPriceError
from .lab import DEFAULT_BUDGET, DEFAULT_EPSILON, BundleFamily
from .qps import qps_scheme_from_config
from .query import QueryBundle, query_from_config
from .space import DEFAULT_MAX_SPACE, InstanceSpace, space_from_config


@dataclass
class Workspace:
    space: InstanceSpace
    queries: dict = field(default_factory=dict)
    bundles: dict = field(default_factory=dict)
    schemes: dict = field(default_factory=dict)
    families: dict = field(default_factory=dict)
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    max_space: int = DEFAULT_MAX_SPACE

    def bundle(self, name: str) -> QueryBundle:
        try:
            return self.bundles[name]
        except KeyError:
            raise ConfigError(f"unknown bundle {name!r}") from None

    def scheme(self, name: str):
        try:
            return self.schemes[name]
        except KeyError:
            raise ConfigError(f"unknown scheme {name!r}") from None

    def family(self, name: str) -> BundleFamily:
        try:
            return self.families[name]
        except KeyError:
            raise ConfigError(f"unknown family {name!r}") from None


def _wrap(what: str, fn, *args):
    try:
        return fn(*args)
    except ConfigError:
        raise
    except (QPriceError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def parse_workspace(cfg: dict) -> Workspace:
    if not isinstance(cfg, dict) or "space" not in cfg:
        raise ConfigError("a workspace needs a 'space' entry")
    space = _wrap("space", space_from_config, cfg["space"])

    queries: dict = {}
    for i, qc in enumerate(cfg.get("queries", [])):
        name = qc.get("name") if isinstance(qc, dict) else None
        if not name:
            raise ConfigError(f"query #{i} has no name")
        if name in queries:
            raise ConfigError(f"duplicate query name {name!r}")
        queries[name] = _wrap(f"query {name}", query_from_config, qc)

    bundles = {name: QueryBundle.of(q) for name, q in queries.items()}
    for name, members in cfg.get("bundles", {}).items():
        if isinstance(members, str):
            members = [members]
        missing = [m for m in members if m not in queries]
        if missing or not members:
            raise ConfigError(f"bundle {name!r} refers to unknown queries {missing}")
        bundles[name] = QueryBundle(tuple(queries[m] for m in members))

    schemes: dict = {}
    for name, sc in cfg.get("schemes", {}).items():
        if not isinstance(sc, dict) or len(sc) != 1 or next(iter(sc)) not in ("aps", "qps"):
            raise ConfigError(f"scheme {name!r} must be {{'aps': ...}} or {{'qps': ...}}")
        kind, body = next(iter(sc.items()))
        build = aps_scheme_from_config if kind == "aps" else qps_scheme_from_config
        schemes[name] = _wrap(f"scheme {name}", build, body, bundles)

    families: dict = {}
    for name, fc in cfg.get("families", {}).items():
        if isinstance(fc, list):
            fc = {"bundles": fc}
        members = fc.get("bundles", [])
        missing = [m for m in members if m not in bundles]
        if missing:
            raise ConfigError(f"family {name!r} refers to unknown bundles {missing}")
        families[name] = _wrap(f"family {name}", BundleFamily, [(m, bundles[m]) for m in members], int(fc.get("depth", 1)))

    check = cfg.get("check", {})
    return Workspace(
        space,
        queries,
        bundles,
        schemes,
        families,
        epsilon=float(check.get("epsilon", DEFAULT_EPSILON)),
        seed=int(check.get("seed", 0)),
        budget=int(check.get("budget", DEFAULT_BUDGET)),
        max_space=int(check.get("max_space", DEFAULT_MAX_SPACE)),
    )


def load_workspace(source: str | Path | dict) -> Workspace:
    """Load from a dict, a JSON file path, or ``builtin:<name>``."""
    if isinstance(source, dict):
        return parse_workspace(source)
    source = str(source)
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        if name not in BUILTIN_WORKSPACES:
            raise ConfigError(f"unknown builtin workspace {name!r}; choose from {sorted(BUILTIN_WORKSPACES)}")
        return parse_workspace(BUILTIN_WORKSPACES[name])
    try:
        text = Path(source).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {source}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON ({exc})") from exc
    return parse_workspace(cfg)


def _sel(key: str) -> dict:
    return {"kind": "cq", "atoms": [{"rel": "R", "pattern": [key, "?x"]}], "head": [key, "?x"]}


RUNNING_EXAMPLE: dict[str, Any] = {
    "space": {"kind": "keyvalue", "keys": ["a1", "a2"], "values": [0, 1], "weights": "uniform"},
    "queries": [
        {"name": "Q", "kind": "cq", "atoms": [{"rel": "R", "pattern": ["a1", "?x"]}], "head": ["?x"]},
        {"name": "Qp", "kind": "cq", "atoms": [{"rel": "R", "pattern": ["?x", 0]}], "head": []},
        {"name": "Q2", "kind": "cq", "atoms": [{"rel": "R", "pattern": ["?x", 1]}], "head": []},
        {"name": "identity", "kind": "full", "rel": "R"},
        {"name": "const", "kind": "extensional", "map": [0, 0, 0, 0]},
    ],
    "bundles": {"constant_bundle": ["const"], "Q_Qp": ["Q", "Qp"]},
    "schemes": {
        "weighted_coverage": {"aps": {"variant": "weighted_coverage"}},
        "supremum": {"aps": {"variant": "supremum"}},
        "budget": {"aps": {"variant": "budget", "budget": 2.5}},
        "concave_sqrt": {"aps": {"variant": "concave", "shape": "sqrt"}},
        "log_conflict": {"aps": {"variant": "concave", "shape": "log2_conflict"}},
        "set_cover": {"aps": {"variant": "set_cover", "views": [{"set": [2, 3], "price": 5}, {"set": [1, 3], "price": 4}], "ceiling": 10}},
        "uniform_shannon_gain": {"aps": {"variant": "uniform_shannon_gain"}},
        "shannon": {"qps": {"variant": "shannon"}},
        "tsallis": {"qps": {"variant": "tsallis", "q": 2.0}},
        "guessing": {"qps": {"variant": "guessing"}},
        "min_entropy_uniform": {"qps": {"variant": "min_entropy_uniform"}},
        "beta3": {"qps": {"variant": "beta_success", "beta": 3}},
        "dit_size": {"qps": {"variant": "dit_size"}},
        "expected_coverage": {"qps": {"variant": "expected_aggregate", "inner": {"aps": {"variant": "weighted_coverage"}}}},
        "max_coverage": {"qps": {"variant": "max_aggregate", "inner": {"aps": {"variant": "weighted_coverage"}}}},
    },
    "families": {
        "all": {"bundles": ["Q", "Qp", "Q2", "identity", "const"], "depth": 1},
        "empty_family": {"bundles": []},
    },
    "check": {"epsilon": 1e-9, "seed": 0},
}

MIN_ENTROPY_EXAMPLE: dict[str, Any] = {
    "space": {"kind": "keyvalue", "keys": ["a1", "a2"], "values": [0, 1], "weights": [0.7, 0.1, 0.1, 0.1]},
    "queries": [dict(_sel("a1"), name="Q1"), dict(_sel("a2"), name="Q2")],
    "bundles": {"Q1_Q2": ["Q1", "Q2"]},
    "schemes": {
        "min_entropy": {"qps": {"variant": "min_entropy"}},
        "shannon": {"qps": {"variant": "shannon"}},
    },
    "families": {"example4_family": {"bundles": ["Q1", "Q2"], "depth": 1}, "empty_family": {"bundles": []}},
}

BUILTIN_WORKSPACES = {"running-example": RUNNING_EXAMPLE, "min-entropy": MIN_ENTROPY_EXAMPLE}
