"""Arbitrage-free pricing of relational query bundles over finite instance spaces."""

from .aps import (
    BudgetCoverage,
    ConcaveCoverage,
    EntropyGain,
    SetCover,
    Supremum,
    UniformShannonGain,
    WeightedCoverage,
    min_weighted_cover,
    price_aps,
    price_at,
    price_vector,
)
from .lab import (
    ArbitrageReport,
    BundleFamily,
    PriceTable,
    Violation,
    check_all,
    check_bundle_arbitrage,
    check_information_arbitrage,
    check_serendipitous,
    estimate_shannon,
    price_table,
    tradeoff_witness,
)
from .lattice import IndexSet, Partition, dit_size, join, refines, restrict, restrict_set
from .qps import (
    BetaSuccess,
    ConstantPrice,
    DitSize,
    ExpectedAggregate,
    Guessing,
    MaxAggregate,
    MinEntropy,
    MinEntropyUniform,
    Shannon,
    Tsallis,
    price_qps,
    uniform_closed_form,
)
from .query import (
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
    evaluate,
    partition_of,
)
from .space import Database, ExplicitSpace, KeyValueSpace, SubsetSpace

__version__ = "0.1.0"
