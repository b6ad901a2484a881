"""Self-checking walkthroughs of the worked scenarios.

Every line compares an expected value with the computed one and reports
PASS or FAIL, so each demo doubles as a one-command regression test.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

from . import scenarios as sc
from .aps import EntropyGain, WeightedCoverage, price_at
from .errors import UnknownDemo
from .lab import check_all, check_bundle_arbitrage, check_information_arbitrage, check_serendipitous, tradeoff_witness
from .lattice import join
from .qps import ConstantPrice, MinEntropy, Shannon, price_qps
from .query import QueryBundle, conflict_at, determines_at, identity_bundle, label_of, partition_of


@dataclass
class Line:
    what: str
    expected: Any
    computed: Any
    ok: bool


@dataclass
class DemoResult:
    name: str
    title: str
    lines: list[Line] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(l.ok for l in self.lines)

    def eq(self, what, expected, computed):
        self.lines.append(Line(what, expected, computed, expected == computed))

    def close(self, what, expected: float, computed: float, tol: float = 1e-9):
        self.lines.append(Line(what, _fmt(expected), _fmt(computed), abs(expected - computed) <= tol))

    def holds(self, what, condition: bool, detail=""):
        self.lines.append(Line(what, True, detail if detail else condition, bool(condition)))

    def render(self, as_json: bool = False) -> list[str]:
        if as_json:
            out = [
                json.dumps({"demo": self.name, "check": l.what, "expected": l.expected, "computed": l.computed, "pass": l.ok}, default=str)
                for l in self.lines
            ]
            out.append(json.dumps({"demo": self.name, "pass": self.ok}))
            return out
        out = [f"== {self.title} =="]
        for l in self.lines:
            out.append(f"{'PASS' if l.ok else 'FAIL'}  {l.what}: expected {l.expected}, computed {l.computed}")
        out.append(f"{'ALL PASS' if self.ok else 'SOME CHECKS FAILED'}")
        return out


def _fmt(x):
    return float(f"{x:.12g}") if isinstance(x, float) else x


def _names(space, indices) -> str:
    return "{" + ",".join(space.label(i) for i in indices) + "}"


def running_example() -> DemoResult:
    r = DemoResult("running-example", "Two keys, binary values: conflicts, determinacy and partitions")
    s = sc.keyvalue(2)
    q1 = sc.value_of("a1")
    q2 = sc.has_value(1)
    qp = sc.has_value(0)
    r.eq("Q(x)=R(a1,x) answer on D01", '[[[0]]]', label_of(q1, 1, s))
    r.eq("conflict of Q at D01", "{D10,D11}", _names(s, conflict_at(q1, 1, s)))
    r.eq("conflict of Q2()=R(x,1) at D00", "{D01,D10,D11}", _names(s, conflict_at(q2, 0, s)))
    r.eq("D00 |- Q2 -> Q", True, determines_at(0, q2, q1, s))
    r.eq("D01 |- Q -> identity", False, determines_at(1, q1, identity_bundle(s), s))
    pq, pqp = partition_of(q1, s), partition_of(qp, s)
    r.eq("partition of Q", "01|23", str(pq))
    r.eq("partition of Q'()=R(x,0)", "012|3", str(pqp))
    r.eq("join", "01|2|3", str(join(pq, pqp)))
    r.eq("partition of the bundle (Q, Q')", "01|2|3", str(partition_of(QueryBundle.of(q1, qp), s)))
    r.close("weighted coverage price of Q at D01", 2.0, price_at(WeightedCoverage(), q1, 1, s))
    r.close("Shannon price of Q", 1.0, price_qps(Shannon(), q1, s))
    return r


def min_entropy_violation() -> DemoResult:
    r = DemoResult("min-entropy-violation", "Min-entropy under a skewed prior: bundle costs more than its parts")
    ex = sc.min_entropy_example()
    s, q1, q2 = ex.space, ex.bundles["Q1"], ex.bundles["Q2"]
    m = MinEntropy()
    r.close("p(Q1)", math.log2(8 / 7), price_qps(m, q1, s))
    r.close("p(Q2)", math.log2(8 / 7), price_qps(m, q2, s))
    r.close("p(Q1, Q2)", math.log2(10 / 7), price_qps(m, q1 + q2, s))
    rep = check_bundle_arbitrage(m, ex.family, s)
    r.eq("bundle violations found", 1, len(rep.violations))
    if rep.violations:
        r.close("violation margin", math.log2(10 / 7) - 2 * math.log2(8 / 7), rep.violations[0].margin)
    r.eq("min-entropy information violations", 0, len(check_information_arbitrage(m, ex.family, s).violations))
    r.eq("Shannon violations on the same family", 0, len(check_all(Shannon(), ex.family, s).violations))
    return r


def entropy_gain_violation() -> DemoResult:
    r = DemoResult("entropy-gain-violation", "Answer-dependent entropy gain admits information arbitrage")
    ex = sc.entropy_gain_example()
    s, qa, qb = ex.space, ex.bundles["QA"], ex.bundles["QB"]
    g = EntropyGain()
    light = 1
    r.close("prior entropy H(X)", 5.0, g.bind(s).h0)
    r.close("p(QA) at a light database", 2.0, price_at(g, qa, light, s))
    r.close("p(QB) at a light database", 1.0, price_at(g, qb, light, s))
    r.eq("QB determines QA at the light database", True, determines_at(light, qb, qa, s))
    rep = check_information_arbitrage(g, ex.family, s)
    r.eq("information violations (deduplicated)", 1, len(rep.violations))
    if rep.violations:
        v = rep.violations[0]
        r.eq("witness", "QB -> QA", f"{v.q2} -> {v.q1}")
        r.close("violation margin (bits)", 0.5 * math.log2(16) - 1.0, v.margin)
    uniform = EntropyGain(weights=(1.0,) * s.size)
    r.eq("same bundles under the uniform prior", 0, len(check_information_arbitrage(uniform, ex.family, s).violations))
    return r


def tradeoff() -> DemoResult:
    r = DemoResult("tradeoff", "Tradeoff between one value and the whole database, n = 10")
    ex = sc.tradeoff_example(10)
    s, q = ex.space, ex.bundles["Q"]
    w = tradeoff_witness(ex.scheme, q, s)
    r.close("log-conflict price of Q", 9.0, w.price)
    r.close("price of the whole database", math.log2(2**10 - 1), w.full_price)
    r.holds("ratio >= 1/2", w.ratio >= 0.5 - 1e-12, _fmt(w.ratio))
    bad = tradeoff_witness(sc.tradeoff_counterexample(10).scheme, q, s)
    r.close("uniform Shannon gain of Q", 1.0, bad.price)
    r.close("its whole-database price", 10.0, bad.full_price)
    r.holds("ratio < 1/2 without subadditivity", bad.ratio < 0.5, _fmt(bad.ratio))
    return r


def serendipity() -> DemoResult:
    r = DemoResult("serendipity", "Emptiness check reveals the empty database")
    ex = sc.serendipity_example()
    s = ex.space
    rep = check_serendipitous(ex.scheme, ex.family, s)
    wit = [v for v in rep.violations if v.database == 0]
    r.eq("witnesses at the empty database", 1, len(wit))
    if wit:
        v = wit[0]
        r.eq("witness", "Q0 -> identity", f"{v.q2} -> {v.q1}")
        r.close("price of identity", 2.0, v.prices[0])
        r.close("price of the emptiness query", 1.0, v.prices[1])
    r.eq("constant-price scheme witnesses", 0, len(check_serendipitous(ConstantPrice(0.0), ex.family, s).violations))
    return r


DEMOS: dict[str, Callable[[], DemoResult]] = {
    "running-example": running_example,
    "min-entropy-violation": min_entropy_violation,
    "entropy-gain-violation": entropy_gain_violation,
    "tradeoff": tradeoff,
    "serendipity": serendipity,
}


def run_demo(name: str) -> DemoResult:
    try:
        fn = DEMOS[name]
    except KeyError:
        raise UnknownDemo(f"unknown demo {name!r}; choose from {sorted(DEMOS)}") from None
    return fn()
