import io
import json
from pathlib import Path

import jsonschema
import pytest

from spa.cli import run_cli
from spa.report import as_text, dumps

SCHEMA = json.loads((Path(__file__).resolve().parents[1] / "docs" / "report-schema.json").read_text())


def cli(*argv, env_threads=None):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def cli_json(*argv):
    code, out, err = cli(*argv, "--json")
    assert not err, err
    report = json.loads(out)
    jsonschema.validate(report, SCHEMA)
    return code, report, out


def test_derive_trivial_yes():
    code, rep, _ = cli_json("derive", "empty.spa", "--goal", "trivial_refl")
    assert code == 0 and rep["result"] == "YES"


def test_derive_negative_is_still_answered():
    code, rep, _ = cli_json("derive", "disje.spa", "--goal", "fresh_ciphers", "--oracle")
    assert code == 0 and rep["result"] == "NO" and rep["oracle"] == "NO"


def test_attack_one_session_none():
    code, rep, _ = cli_json("attack", "example1.spa", "--goal", "secret_m", "--sessions", "1")
    assert code == 0 and rep["result"] == "NONE"


def test_attack_found_with_figure(tmp_path):
    fig = tmp_path / "charts" / "run.png"
    code, rep, _ = cli_json("attack", "example1.spa", "--goal", "secret_m", "--sessions", "3", "--figure", str(fig))
    assert code == 0 and rep["result"] == "FOUND"
    assert fig.exists() and fig.stat().st_size > 0
    assert rep["zap"]["ok"]


def test_budget_exhaustion_exit_code():
    code, rep, _ = cli_json("attack", "example1.spa", "--goal", "secret_m", "--sessions", "3", "--max-nodes", "5")
    assert code == 2 and rep["result"] == "EXHAUSTED"


def test_json_is_byte_identical_across_runs():
    argv = ("attack", "example1.spa", "--goal", "secret_m", "--sessions", "3", "--json")
    a, b = cli(*argv), cli(*argv)
    assert a[1] == b[1]
    c = cli(*argv, "--threads", "3")
    assert c[1] == a[1]


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("SPA_THREADS", "2")
    code, rep, _ = cli_json("attack", "example1.spa", "--goal", "secret_m", "--sessions", "1")
    assert code == 0 and rep["result"] == "NONE"


def test_saturate_then_normalize(tmp_path):
    code, rep, out = cli_json("saturate", "eqderiv.spa", "--goal", "shared_cipher")
    assert code == 0 and rep["result"] == "YES"
    assert rep["iterations"] <= rep["universe"] ** 2
    p = tmp_path / "proof.json"
    p.write_text(out)
    code, rep2, _ = cli_json("normalize", "eqderiv.spa", "--proof", str(p))
    assert code == 0 and rep2["violations"] == []
    assert rep2["proof"] == rep["proof"]  # already normal, so a fixpoint


def test_validate_run_from_attack_report(tmp_path):
    _, rep, out = cli_json("attack", "example1.spa", "--goal", "secret_m", "--sessions", "3")
    r = tmp_path / "run.json"
    r.write_text(out)
    code, rep2, _ = cli_json("validate-run", "example1.spa", "--run", str(r))
    assert code == 0 and rep2["valid"] and rep2["result"] == "YES"


@pytest.mark.parametrize("name", ["example1.spa", "foo.spa", "disje.spa", "eqderiv.spa", "empty.spa"])
def test_check(name):
    code, rep, _ = cli_json("check", name)
    assert code == 0 and rep["round_trip"]


def test_fuzz_small_with_figure(tmp_path):
    fig = tmp_path / "passes.svg"
    code, rep, _ = cli_json("fuzz", "--seed", "1", "--count", "5", "--suite", "eq", "--suite", "dy", "--figure", str(fig))
    assert code == 0 and rep["result"] == "YES"
    assert [s["suite"] for s in rep["suites"]] == ["eq", "dy"]
    assert fig.exists()


def test_text_output_is_tab_delimited():
    code, out, _ = cli("derive", "empty.spa", "--goal", "trivial_refl")
    assert code == 0
    rows = dict(line.split("\t", 1) for line in out.splitlines())
    assert rows["result"] == "YES" and rows["verb"] == "derive"


@pytest.mark.parametrize(
    "argv",
    [
        ["derive", "empty.spa"],  # missing --goal
        ["frobnicate"],
        ["derive", "missing.spa", "--goal", "x"],
        ["derive", "empty.spa", "--goal", "nope"],
        ["attack", "example1.spa", "--goal", "secret_m", "--sessions", "many"],
    ],
)
def test_errors_exit_one(argv):
    code, out, err = cli(*argv)
    assert code == 1 and out == "" and err.startswith("spa:")


def test_parse_errors_pass_through(tmp_path):
    f = tmp_path / "bad.spa"
    f.write_text("mode core;\nagents i;\nintruder j;\n")
    code, _, err = cli("check", str(f))
    assert code == 1 and "3:" in err


def test_as_text_flattens():
    assert as_text({"a": {"b": [1, 2]}, "c": []}) == "a.b.0\t1\na.b.1\t2\nc\t[]\n"
    assert dumps({"b": 1, "a": 2}).index('"a"') < dumps({"b": 1, "a": 2}).index('"b"')
