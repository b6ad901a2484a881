import json
import math

import pytest

from qprice.cli import main
from qprice.config import BUILTIN_WORKSPACES


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def records(out):
    return [json.loads(l) for l in out.splitlines() if l.strip()]


class TestPrice:
    def test_shannon(self, capsys):
        code, out, _ = run(capsys, "price", "shannon", "Q", "--json")
        assert code == 0 and records(out) == [{"scheme": "shannon", "bundle": "Q", "price": 1.0}]

    def test_weighted_coverage(self, capsys):
        code, out, _ = run(capsys, "price", "weighted_coverage", "Q", "--db", "1", "--json")
        rec = records(out)[0]
        assert code == 0 and rec["price"] == 2.0 and rec["database"] == 1

    def test_constant_bundle(self, capsys):
        code, out, _ = run(capsys, "price", "shannon", "constant_bundle")
        assert code == 0 and "price=0" in out

    def test_human_format(self, capsys):
        code, out, _ = run(capsys, "price", "tsallis", "Q_Qp")
        assert out.strip() == "tsallis  Q_Qp  price=0.625"

    @pytest.mark.parametrize(
        "argv",
        [
            ("price", "weighted_coverage", "Q"),
            ("price", "shannon", "Q", "--db", "1"),
            ("price", "weighted_coverage", "Q", "--db", "9"),
            ("check", "weighted_coverage", "all", "--mode", "qps"),
            ("check", "weighted_coverage", "all", "--conditions", "serendipitous"),
            ("check", "shannon", "all", "--conditions", "bogus"),
            ("tradeoff", "shannon", "Q"),
            ("tradeoff", "weighted_coverage", "constant_bundle"),
            ("conflict", "Q"),
            ("estimate", "Q", "-m", "0"),
            ("demo", "nope"),
            ("frobnicate",),
            ("price",),
            (),
            ("check", "shannon", "all", "--epsilon", "-1"),
        ],
    )
    def test_usage_errors(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 3 and err

    @pytest.mark.parametrize(
        "argv",
        [
            ("price", "nope", "Q"),
            ("price", "shannon", "nope"),
            ("check", "shannon", "nope"),
            ("partition", "Q", "--config", "builtin:nope"),
            ("partition", "Q", "--config", "/nonexistent/ws.json"),
        ],
    )
    def test_config_errors(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 2 and err.startswith("qprice: ")

    def test_bad_json_file(self, capsys, tmp_path):
        p = tmp_path / "ws.json"
        p.write_text("{not json")
        assert run(capsys, "partition", "Q", "--config", str(p))[0] == 2
        p.write_text(json.dumps({"space": {"kind": "keyvalue", "keys": ["a"], "values": [0]}, "bundles": {"B": ["missing"]}}))
        assert run(capsys, "partition", "Q", "--config", str(p))[0] == 2


class TestInspect:
    def test_partition(self, capsys):
        code, out, _ = run(capsys, "partition", "Q_Qp", "--json")
        rec = records(out)[0]
        assert code == 0 and rec["partition"] == "01|2|3" and rec["blocks"] == [[0, 1], [2], [3]]

    def test_conflict(self, capsys):
        code, out, _ = run(capsys, "conflict", "Q", "--db", "1", "--json")
        assert code == 0 and records(out)[0]["conflict"] == [2, 3]
        code, out, _ = run(capsys, "conflict", "Q2", "--db", "0", "--json")
        assert records(out)[0]["conflict"] == [1, 2, 3]


class TestCheck:
    def test_min_entropy_bundle(self, capsys):
        code, out, err = run(capsys, "check", "min_entropy", "example4_family", "--conditions", "bundle", "--json", "--config", "builtin:min-entropy")
        recs = records(out)
        assert code == 1 and "warning" in err
        assert len(recs) == 2
        assert math.isclose(recs[0]["witness"]["margin"], math.log2(10 / 7) - 2 * math.log2(8 / 7), abs_tol=1e-9)

    def test_shannon_clean(self, capsys):
        code, out, _ = run(capsys, "check", "shannon", "example4_family", "--config", "builtin:min-entropy")
        assert code == 0 and "clean" in out

    @pytest.mark.parametrize("scheme", ["shannon", "weighted_coverage", "log_conflict", "min_entropy_uniform"])
    def test_empty_family(self, capsys, scheme):
        code, out, _ = run(capsys, "check", scheme, "empty_family", "--json")
        summary = records(out)[-1]["summary"]
        assert code == 0 and summary["violations"] == 0 and sum(summary["checks"].values()) == 0

    def test_running_example_catalog(self, capsys):
        unsafe = {"log_conflict": 1, "uniform_shannon_gain": 1}
        for name in BUILTIN_WORKSPACES["running-example"]["schemes"]:
            code, _, _ = run(capsys, "check", name, "all")
            assert code == unsafe.get(name, 0), name

    def test_first_and_epsilon(self, capsys):
        code, out, _ = run(capsys, "check", "log_conflict", "all", "--first", "--json")
        assert code == 1 and len(records(out)) == 2
        code, _, _ = run(capsys, "check", "log_conflict", "all", "--epsilon", "10")
        assert code == 0

    def test_serendipitous(self, capsys):
        code, out, _ = run(capsys, "check", "shannon", "all", "--conditions", "serendipitous", "--mode", "qps")
        assert code == 1 and "serendipitous" in out

    def test_deterministic(self, capsys):
        a = run(capsys, "check", "uniform_shannon_gain", "all", "--json")
        b = run(capsys, "check", "uniform_shannon_gain", "all", "--json")
        assert a == b


class TestOther:
    def test_estimate(self, capsys):
        code, out, _ = run(capsys, "estimate", "Q", "--json", "--seed", "3")
        rec = records(out)[0]
        assert code == 0 and rec["estimate"] == 1.0 and rec["exact"] == 1.0 and rec["seed"] == 3

    def test_tradeoff(self, capsys):
        code, out, _ = run(capsys, "tradeoff", "log_conflict", "Q", "--json")
        rec = records(out)[0]
        assert code == 0 and rec["price"] == 1.0 and rec["full_price"] == float(f"{math.log2(3):.12g}") and rec["at_least_half"]

    @pytest.mark.parametrize("name", ["running-example", "min-entropy-violation", "entropy-gain-violation", "tradeoff", "serendipity"])
    def test_demos(self, capsys, name):
        code, out, _ = run(capsys, "demo", name)
        assert code == 0 and out.rstrip().endswith("ALL PASS") and "FAIL " not in out
        code, out, _ = run(capsys, "demo", name, "--json")
        assert records(out)[-1] == {"demo": name, "pass": True}

    def test_running_example_text(self, capsys):
        _, out, _ = run(capsys, "demo", "running-example")
        for s in ("{D10,D11}", "01|23", "012|3", "01|2|3"):
            assert s in out

    def test_min_entropy_text(self, capsys):
        _, out, _ = run(capsys, "demo", "min-entropy-violation")
        assert f"{math.log2(8 / 7):.12g}" in out and f"{math.log2(10 / 7):.12g}" in out
