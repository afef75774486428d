import csv
import io
import json

import pytest

from filtcalc.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), out=buf)
    return code, buf.getvalue()


def test_bch_heisenberg():
    code, text = run("bch", "--file", "heisenberg", "--a", "1,0,0", "--b", "0,1,0")
    assert code == EXIT_OK
    assert json.loads(text)["bch"] == [1, 1, "1/2"]


def test_grouplaw_csv():
    code, text = run("grouplaw", "--file", "heisenberg", "--out", "csv")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert code == EXIT_OK and len(rows) == 3
    assert rows[2]["z"] == "v3 + w3 + 1/2*v1*w2 - 1/2*v2*w1"


def test_princ_sublaplacian_with_drift():
    code, text = run("princ", "--file", "heisenberg", "--frame", "left", "--term=-1@1,1", "--term=-1@2,2",
                     "--term", "x1@3", "--order", "2", "--x", "1/2,0,1")
    assert code == EXIT_OK
    sym = {tuple(r["alpha"]): r["coefficient"] for r in json.loads(text)["symbol"]}
    assert sym == {(2, 0, 0): -1, (0, 2, 0): -1, (0, 0, 1): "1/2"}


def test_princ_order_too_low_is_usage_error():
    code, _ = run("princ", "--file", "heisenberg", "--term", "1@3", "--order", "1", "--x", "0,0,0")
    assert code == EXIT_USAGE


def test_exp_and_log_round_trip():
    code, text = run("exp", "--file", "heisenberg", "--frame", "perturbed", "--x", "0.1,0.2,0",
                     "--v=-0.2,0.3,0.1")
    assert code == EXIT_OK
    y = json.loads(text)["exp"]
    code, text = run("log", "--file", "heisenberg", "--frame", "perturbed", "--x", "0.1,0.2,0",
                     "--y=" + ",".join(repr(t) for t in y))
    assert code == EXIT_OK
    assert json.loads(text)["log"] == pytest.approx([-0.2, 0.3, 0.1], abs=1e-9)


def test_exp_leaving_chart_fails():
    code, _ = run("exp", "--file", "heisenberg", "--frame", "left", "--x", "0,0,0", "--v", "1,2,0")
    assert code == EXIT_FAIL


def test_sweep_long_csv():
    code, text = run("sweep-remainder", "--file", "heisenberg", "--frame", "perturbed", "--x", "0.1,0.2,-0.1",
                     "--v", "0.3,-0.2,0.1", "--w=-0.1,0.25,0.2", "--kmin", "3", "--kmax", "10", "--out", "csv")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert code == EXIT_OK
    assert list(rows[0]) == ["eps", "component", "abs_r", "slope"]
    assert len(rows) == 8 * 3
    third = [r for r in rows if r["component"] == "3"]
    assert float(third[0]["slope"]) >= 2.85


def test_sweep_json_reports_components():
    code, text = run("sweep-remainder", "--file", "heisenberg", "--frame", "left", "--x", "0.1,0.2,-0.1",
                     "--v", "0.3,-0.2,0.1", "--w=-0.1,0.25,0.2", "--kind", "first")
    payload = json.loads(text)
    assert code == EXIT_OK and payload["components"] == ["pass-trivial"] * 3


@pytest.mark.parametrize("suite, extra", [
    ("group-axioms", ["--file", "engel", "--samples", "5"]),
    ("duality", ["--file", "heisenberg"]),
    ("appendix-a", ["--max-n", "2", "--max-k", "3"]),
    ("taylor", ["--file", "heisenberg"]),
    ("invariance", ["--file", "heisenberg", "--frame", "left", "--samples", "5"]),
    ("remainder", ["--file", "heisenberg", "--frame", "perturbed", "--samples", "5"]),
    ("quantize", ["--file", "heisenberg", "--frame", "perturbed", "--samples", "3"]),
])
def test_verify_suites_pass(suite, extra):
    code, text = run("verify", suite, *extra)
    report = json.loads(text)
    assert code == EXIT_OK, [c for c in report["cases"] if c["status"] != "pass"]
    assert report["suite"] == suite and report["cases"] and report["wall_time_ms"] >= 0


def test_verify_csv_lists_cases():
    code, text = run("verify", "appendix-a", "--max-n", "1", "--max-k", "2", "--out", "csv")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert code == EXIT_OK and {r["status"] for r in rows} == {"pass"} and len(rows) == 4


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["bch", "--file", "heisenberg", "--a", "1,0", "--b", "0,1,0"],
    ["bch", "--file", "no_such_algebra", "--a", "1", "--b", "1"],
    ["bch", "--file", "heisenberg", "--a", "1,x,0", "--b", "0,1,0"],
    ["princ", "--file", "heisenberg", "--term", "1@7", "--order", "2", "--x", "0,0,0"],
    ["princ", "--file", "heisenberg", "--term", "x1 +@1", "--order", "2", "--x", "0,0,0"],
    ["verify", "taylor"],
])
def test_usage_errors(argv, capsys):
    code, _ = run(*argv)
    assert code == EXIT_USAGE
