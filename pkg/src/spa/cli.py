"""Command-line entry point.

Exit codes: 0 when the query was answered (positively or negatively), 1 on any
error, 2 when the search budget ran out before an answer.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from . import report as R
from .assertions import render
from .derive import assert_derives, context_bound, replay_certificate
from .eqproof import NormalizationLog, check_eq_proof, eq_from_json, is_normal, measure, normalize
from .errors import ParseError, SpaError
from .fuzz import SUITES, run_suite
from .insecurity import EXHAUSTED, FOUND, find_attack
from .oracles import brute_witness
from .protocol import run_from_json, validate_run
from .saturation import Saturation
from .speclang import _show, load, parse, parse_assertion, parse_term, pretty_print

OK, ERROR, BUDGET = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spa", description="Symbolic protocol analysis with assertions.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit a JSON report")
    common.add_argument("--threads", type=int, default=None, help="worker cap (default: $SPA_THREADS or 1)")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    d = sub.add_parser("derive", parents=[common], help="decide a derive query")
    d.add_argument("file")
    d.add_argument("--goal", required=True)
    d.add_argument("--mode", choices=("core", "extended"))
    d.add_argument("--oracle", action="store_true", help="cross-check with the brute-force witness search")

    a = sub.add_parser("attack", parents=[common], help="search for a bounded attack")
    a.add_argument("file")
    a.add_argument("--goal", required=True)
    a.add_argument("--sessions", type=int)
    a.add_argument("--budget-ms", type=float)
    a.add_argument("--max-nodes", type=int)
    a.add_argument("--figure", help="write a message sequence chart to this path")

    s = sub.add_parser("saturate", parents=[common], help="saturate a derive query taken as a pure context")
    s.add_argument("file")
    s.add_argument("--goal", required=True)

    n = sub.add_parser("normalize", parents=[common], help="normalize a serialized equality proof")
    n.add_argument("file")
    n.add_argument("--proof", required=True)
    n.add_argument("--goal", help="derive query supplying the context (default: the first)")

    v = sub.add_parser("validate-run", parents=[common], help="replay a serialized run")
    v.add_argument("file")
    v.add_argument("--run", required=True)

    c = sub.add_parser("check", parents=[common], help="parse a spec file and print it back")
    c.add_argument("file")

    f = sub.add_parser("fuzz", parents=[common], help="engine/oracle agreement suites")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--count", type=int, default=100)
    f.add_argument("--suite", action="append", choices=SUITES, help="repeatable; default: all")
    f.add_argument("--figure", help="write the saturation-pass chart to this path")
    return p


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("SPA_THREADS")
    return max(1, int(env)) if env and env.isdigit() else 1


def _query(spec, name: str, kind: str):
    table = spec.derives if kind == "derive" else spec.attacks
    if name not in table:
        raise SpaError(f"no {kind} query named {name}")
    return table[name]


def cmd_derive(args) -> tuple[dict, int]:
    spec = load(args.file)
    q = _query(spec, args.goal, "derive")
    mode = args.mode or spec.mode
    cert = assert_derives(q.terms, q.assumptions, q.goal, mode)
    out = R.base("derive", args.file, q.name)
    out["mode"] = mode
    out["goal"] = render(q.goal)
    out["bound"] = context_bound(q.terms, q.assumptions, q.goal)
    out["result"] = "YES" if cert else "NO"
    if cert is not None:
        replay_certificate(cert, q.terms, q.assumptions)
        out["certificate"] = cert.to_json()
    if args.oracle:
        w = brute_witness(q.terms, q.assumptions, q.goal)
        out["oracle"] = "YES" if w is not None else "NO"
        if w is not None and cert is None:
            raise SpaError("the brute-force oracle found a witness the engine missed")
    return out, OK


def cmd_attack(args) -> tuple[dict, int]:
    spec = load(args.file)
    q = _query(spec, args.goal, "attack")
    protocol = spec.protocol()
    k = args.sessions or q.sessions
    res = find_attack(protocol, q.goal, k, args.budget_ms, args.max_nodes, _threads(args))
    out = R.base("attack", args.file, q.name)
    out.update({"goal": _show(q.goal), "sessions": k, "result": res.status, "nodes": res.nodes})
    if res.status == FOUND:
        run = res.run
        out["run"] = run.to_json()
        out["steps"] = res.report.to_json()["steps"]
        out["certificate"] = res.certificate.to_json()
        out["zap"] = res.zap.to_json()
        out["messages"] = pretty_print(run).splitlines()
        if args.figure:
            out["figure"] = R.sequence_chart(run, protocol.intruder.id, args.figure)
    return out, BUDGET if res.status == EXHAUSTED else OK


def cmd_saturate(args) -> tuple[dict, int]:
    spec = load(args.file)
    q = _query(spec, args.goal, "derive")
    sat = Saturation(q.terms, q.assumptions, [q.goal])
    proof = sat.proof(q.goal)
    out = R.base("saturate", args.file, q.name)
    out.update(
        {
            "goal": render(q.goal),
            "result": "YES" if proof else "NO",
            "universe": len(sat.Z),
            "iterations": sat.iterations,
            "trace": sat.trace(),
        }
    )
    if proof is not None:
        check_eq_proof(proof, q.terms, q.assumptions)
        nf = normalize(proof, q.terms)
        out["proof"] = nf.to_json()
        out["proof_tree"] = pretty_print(nf).splitlines()
    return out, OK


def cmd_normalize(args) -> tuple[dict, int]:
    spec = load(args.file)
    q = _query(spec, args.goal, "derive") if args.goal else next(iter(spec.derives.values()), None)
    if q is None:
        raise SpaError("the input file has no derive query to supply a context")
    with open(args.proof) as fh:
        data = json.load(fh)
    data = data.get("proof", data)
    p = eq_from_json(data, lambda t: parse_term(t, spec), lambda a: parse_assertion(a, spec))
    check_eq_proof(p, q.terms, q.assumptions)
    log = NormalizationLog()
    nf = normalize(p, q.terms, log=log)
    out = R.base("normalize", args.file, q.name)
    out.update(
        {
            "conclusion": render(p.conclusion),
            "input_violations": is_normal(p),
            "violations": is_normal(nf),
            "rewrites": [[r, list(b), list(a)] for r, b, a in log.steps],
            "measure_before": list(measure(p)),
            "measure_after": list(measure(nf)),
            "proof": nf.to_json(),
            "result": "YES",
        }
    )
    return out, OK


def cmd_validate(args) -> tuple[dict, int]:
    spec = load(args.file)
    protocol = spec.protocol()
    with open(args.run) as fh:
        data = json.load(fh)
    run = run_from_json(protocol, data.get("run", data), lambda t: parse_term(t, spec))
    rep = validate_run(protocol, run)
    out = R.base("validate-run", args.file)
    out.update(rep.to_json())
    out["result"] = "YES" if rep.valid else "NO"
    return out, OK


def cmd_check(args) -> tuple[dict, int]:
    spec = load(args.file)
    text = pretty_print(spec)
    again = pretty_print(parse(text))
    out = R.base("check", args.file)
    out.update(
        {
            "mode": spec.mode,
            "roles": sorted(spec.roles),
            "derive_queries": sorted(spec.derives),
            "attack_queries": sorted(spec.attacks),
            "round_trip": text == again,
            "result": "YES" if text == again else "NO",
        }
    )
    return out, OK


def cmd_fuzz(args) -> tuple[dict, int]:
    suites = args.suite or list(SUITES)
    out = R.base("fuzz", "-")
    out.update({"seed": args.seed, "count": args.count, "suites": []})
    bad = 0
    points = []
    for s in suites:
        res = run_suite(s, args.seed, args.count, _threads(args))
        bad += len(res.disagreements)
        j = res.to_json()
        points += j["stats"].pop("points", [])
        out["suites"].append(j)
    out["result"] = "YES" if bad == 0 else "NO"
    if args.figure and points:
        out["figure"] = R.iteration_chart(points, args.figure)
    return out, OK if bad == 0 else ERROR


VERBS = {
    "derive": cmd_derive,
    "attack": cmd_attack,
    "saturate": cmd_saturate,
    "normalize": cmd_normalize,
    "validate-run": cmd_validate,
    "check": cmd_check,
    "fuzz": cmd_fuzz,
}


def run_cli(argv: Optional[list] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        out, code = VERBS[args.verb](args)
    except UsageError as e:
        print(f"spa: {e}", file=stderr)
        return ERROR
    except ParseError as e:
        print(f"spa: {e}", file=stderr)
        return ERROR
    except (SpaError, OSError, ValueError, KeyError) as e:
        print(f"spa: {type(e).__name__}: {e}", file=stderr)
        return ERROR
    stdout.write(R.dumps(out) if args.json else R.as_text(out))
    return code


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
