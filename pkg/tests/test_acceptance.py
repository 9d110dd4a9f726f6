"""Acceptance criteria, one test each.  Every test prints a single PASS/FAIL line.

Run ``python tests/test_acceptance.py`` for the summary lines without pytest's
capture, or ``pytest tests/test_acceptance.py -s``.
"""

import io
import json
import time

from spa.assertions import abstractable_positions, abstractable_positions_term
from spa.cli import run_cli
from spa.derive import assert_derives, replay_certificate
from spa.eqproof import check_eq_proof, check_subterm_property, is_normal, normalize
from spa.fuzz import run_suite
from spa.insecurity import FOUND, NONE, find_attack
from spa.oracles import brute_eq, brute_witness
from spa.saturation import eq_derives
from spa.speclang import load, parse, parse_assertion, parse_term
from spa.terms import pos_str, positions

SEED = 0


def verdict(n: int, title: str, ok: bool, detail: str = "") -> None:
    print(f"AC{n}\t{'PASS' if ok else 'FAIL'}\t{title}\t{detail}")
    assert ok, f"AC{n} {title}: {detail}"


def _cli_json(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli([*argv, "--json"], stdout=out, stderr=err)
    return code, (json.loads(out.getvalue()) if out.getvalue() else None)


def test_ac1_attack_reproduction():
    t0 = time.monotonic()
    code3, rep3 = _cli_json("attack", "examples/example1.spa", "--goal", "secret_m", "--sessions", "3")
    elapsed = time.monotonic() - t0
    code1, rep1 = _cli_json("attack", "examples/example1.spa", "--goal", "secret_m", "--sessions", "1")

    # responder sessions, each as (value of its first received variable, value of its second)
    sigma = rep3["run"]["sigma"] if rep3 and rep3["result"] == FOUND else {}
    tags = sorted({k.rsplit("_", 1)[1] for k in sigma})
    got = sorted((sigma.get(f"?x_{t}"), sigma.get(f"?y_{t}")) for t in tags)
    want = sorted([("pk_i", "(pk_a, {m}pk_b)"), ("pk_i", "m")])
    ok = (
        code3 == 0
        and rep3["result"] == FOUND
        and got == want
        and rep3["zap"]["ok"]
        and elapsed < 60
        and code1 == 0
        and rep1["result"] == NONE
    )
    verdict(1, "three-session attack on example1; none with one session", ok, f"sigma={got} time={elapsed:.2f}s K=1:{rep1['result']}")


def test_ac2_abstractable_positions():
    vocab = parse("mode extended; agents i; intruder i; names m, n, n2; key k, k2;")
    T = lambda s: parse_term(s, vocab)  # noqa: E731
    t = T("({{m}k}k2, (n, n2))")
    fmt = lambda ps: {pos_str(p) or "e" for p in ps}  # noqa: E731
    first = fmt(abstractable_positions_term([T("{m}k"), T("k2"), T("n"), T("n2")], t))
    second = fmt(abstractable_positions_term([T("m"), T("k"), T("k2"), T("(n, n2)")], t))
    third = fmt(abstractable_positions([T("m")], parse_assertion("exists b. {m}b ~ {m}k", vocab)))
    ok = (
        first == {"e", "0", "1", "00", "01", "10", "11"}
        and second == fmt(positions(t))
        and third == {"00", "000", "001"}
    )
    verdict(2, "abstractable position sets", ok, f"{sorted(first)} | all={second == fmt(positions(t))} | {sorted(third)}")


def test_ac3_equality_derivation():
    spec = load("eqderiv.spa")
    q = spec.derives["shared_cipher"]
    p = eq_derives(q.terms, q.assumptions, q.goal)
    ok = p is not None
    detail = "no proof"
    if ok:
        check_eq_proof(p, q.terms, q.assumptions)
        nf = normalize(p, q.terms)
        check_eq_proof(nf, q.terms, q.assumptions)
        viol = is_normal(nf)
        sub = check_subterm_property(nf, q.terms, q.assumptions)
        oracle = brute_eq(q.terms, q.assumptions, q.goal)
        ok = nf.conclusion == q.goal and viol == [] and sub and oracle
        detail = f"rules={sorted({n.rule for n in nf.nodes()})} normal={viol == []} subterm={sub} oracle={oracle}"
    verdict(3, "x ~ {m}k from a shared ciphertext", ok, detail)


def test_ac4_extended_derivation():
    spec = load("disje.spa")
    yes, no = spec.derives["reused_cipher"], spec.derives["fresh_ciphers"]
    c_yes = assert_derives(yes.terms, yes.assumptions, yes.goal)
    if c_yes is not None:
        replay_certificate(c_yes, yes.terms, yes.assumptions)
    c_no = assert_derives(no.terms, no.assumptions, no.goal)
    o_yes = brute_witness(yes.terms, yes.assumptions, yes.goal)
    o_no = brute_witness(no.terms, no.assumptions, no.goal)
    ok = c_yes is not None and o_yes is not None and c_no is None and o_no is None
    verdict(4, "reused ciphertext reveals the vote; independent keys do not", ok, f"engine={c_yes is not None}/{c_no is not None} oracle={o_yes is not None}/{o_no is not None}")


def test_ac5_saturation_and_dy_agreement():
    eq = run_suite("eq", SEED, 200)
    dy = run_suite("dy", SEED, 500)
    big = max(z for z, _ in eq.stats["points"])
    ok = not eq.disagreements and not dy.disagreements and eq.count >= 200 and dy.count >= 500 and big <= 8
    verdict(5, "saturation vs closure and deduction vs closure", ok, f"eq {eq.count} ({eq.stats['atoms']} atoms, |Z|<={big}) dis={len(eq.disagreements)}; dy {dy.count} dis={len(dy.disagreements)}")


def test_ac6_normalization_suite():
    r = run_suite("normalize", SEED, 500)
    ok = r.count >= 500 and not r.disagreements
    verdict(6, "normalization terminates, preserves, normalizes, decreases", ok, f"{r.count} proofs, {r.stats['non_normal_inputs']} non-normal inputs, {r.stats['rewrites']} rewrites, dis={len(r.disagreements)}")


def test_ac7_witness_bound():
    r = run_suite("witness", SEED, 100)
    ok = r.count >= 100 and not r.disagreements and r.stats["skipped"] == 0
    verdict(7, "oracle witness within twice the context bound implies engine witness", ok, f"{r.count} queries, oracle yes {r.stats['oracle_yes']}, engine yes {r.stats['engine_yes']}, dis={len(r.disagreements)}")


def test_ac8_zap_preservation():
    r = run_suite("zap", SEED, 100)
    oversized = (r.count + 3) // 4  # every fourth case is the hand-built oversized run
    ok = r.count >= 100 and not r.disagreements and r.stats["skipped"] == 0 and r.stats["shrunk"] >= oversized
    verdict(8, "zapping preserves validity with universe-bounded substitutions", ok, f"{r.count} runs, {oversized} oversized, {r.stats['shrunk']} shrunk, dis={len(r.disagreements)}")


def test_ac9_polynomial_loop_bound():
    pts = run_suite("eq", SEED + 1, 200).stats["points"]
    spec = load("eqderiv.spa")
    q = spec.derives["shared_cipher"]
    code, rep = _cli_json("saturate", "eqderiv.spa", "--goal", "shared_cipher")
    pts.append([rep["universe"], rep["iterations"]])
    worst = max(i / (z * z) for z, i in pts)
    ok = code == 0 and all(i <= z * z for z, i in pts)
    verdict(9, "fixpoint passes within |Z|^2", ok, f"{len(pts)} instances, worst passes/|Z|^2 = {worst:.3f}")


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_ac"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
