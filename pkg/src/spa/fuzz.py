"""Agreement suites: engine against brute-force oracle on seeded random instances.

Instance ``i`` of suite ``s`` is drawn from its own generator seeded by
``(seed, s, i)``, so results do not depend on thread scheduling.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .assertions import Eq, Member
from .derive import assert_derives, context_bound, replay_certificate
from .dy import derivable
from .eqproof import NormalizationLog, check_eq_proof, check_subterm_property, is_normal, normalize
from .errors import BoundExceeded
from .generators import (
    oversized_run,
    random_dy_instance,
    random_pure_context,
    random_run,
    random_valid_proof,
    random_witness_query,
    rng_for,
)
from .insecurity import verify_zap_preservation
from .oracles import EqClosure, brute_dy, brute_witness
from .saturation import Saturation
from .terms import is_atomic

SUITES = ("dy", "eq", "normalize", "witness", "zap")


@dataclass
class SuiteResult:
    suite: str
    count: int = 0
    disagreements: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "suite": self.suite,
            "count": self.count,
            "disagreements": len(self.disagreements),
            "examples": self.disagreements[:5],
            "stats": dict(sorted(self.stats.items())),
        }


def _rng(seed: int, suite: str, i: int):
    return rng_for(seed * 7919 + zlib.crc32(suite.encode()), i)


def dy_case(seed: int, i: int) -> dict:
    X, t = random_dy_instance(_rng(seed, "dy", i))
    a, b = derivable(X, t), brute_dy(X, t)
    return {"ok": a == b, "engine": a, "what": f"{sorted(map(str, X))} |- {t}"}


def eq_case(seed: int, i: int) -> dict:
    T, E = random_pure_context(_rng(seed, "eq", i))
    sat = Saturation(T, E)
    ref = EqClosure(T, E)
    bad = []
    atoms = 0
    for a in sat.Z:
        for b in sat.Z:
            atoms += 1
            if sat.derives(Eq(a, b)) != ref.derives(Eq(a, b)):
                bad.append(f"{a} ~ {b}")
        if is_atomic(a):
            for l in sorted(sat.lists):
                atoms += 1
                m = Member(a, l)
                if sat.derives(m) != ref.derives(m):
                    bad.append(str(m))
    z = len(sat.Z)
    return {
        "ok": not bad and sat.iterations <= z * z,
        "what": "; ".join(bad[:3]) or f"{sat.iterations} passes for |Z| = {z}",
        "z": z,
        "iterations": sat.iterations,
        "atoms": atoms,
    }


def normalize_case(seed: int, i: int) -> dict:
    T, E, p = random_valid_proof(_rng(seed, "normalize", i))
    log = NormalizationLog()
    q = normalize(p, T, log=log)
    check_eq_proof(q, T, E)
    clauses = is_normal(q)
    ok = q.conclusion == p.conclusion and not clauses and log.non_sym_steps_decrease() and check_subterm_property(q, T, E)
    return {"ok": ok, "what": f"{p.conclusion}: {clauses}", "rewrites": len(log.steps), "was_normal": not is_normal(p)}


def witness_case(seed: int, i: int) -> dict:
    S, A, goal = random_witness_query(_rng(seed, "witness", i))
    M = context_bound(S, A, goal)
    cert = assert_derives(S, A, goal, bound=M)
    if cert is not None:
        replay_certificate(cert, S, A)
    try:
        ref = brute_witness(S, A, goal, size_cap=2 * M)
    except BoundExceeded:
        return {"ok": True, "skipped": True, "what": "oracle bound exceeded", "engine": cert is not None}
    ok = (ref is None) or (cert is not None)
    return {"ok": ok, "engine": cert is not None, "oracle": ref is not None, "what": str(goal)}


def zap_case(seed: int, i: int, protocol=None) -> dict:
    from .speclang import load

    protocol = protocol or load("example1.spa").protocol()
    rng = _rng(seed, "zap", i)
    run = oversized_run(protocol) if i % 4 == 0 else random_run(rng, protocol, oversize=i % 2 == 1)
    if run is None:
        return {"ok": True, "skipped": True, "what": "no run generated"}
    z = verify_zap_preservation(protocol, run)
    return {"ok": z.ok, "what": "; ".join(z.failures), "before": z.size_before, "after": z.size_after, "shrunk": z.size_after < z.size_before}


CASES = {"dy": dy_case, "eq": eq_case, "normalize": normalize_case, "witness": witness_case, "zap": zap_case}


def run_suite(suite: str, seed: int, count: int, threads: int = 1) -> SuiteResult:
    case = CASES[suite]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            outs = list(ex.map(lambda i: case(seed, i), range(count)))
    else:
        outs = [case(seed, i) for i in range(count)]
    res = SuiteResult(suite, count)
    for i, o in enumerate(outs):
        if not o["ok"]:
            res.disagreements.append({"index": i, "detail": o["what"]})
    res.stats["skipped"] = sum(1 for o in outs if o.get("skipped"))
    if suite == "dy":
        res.stats["derivable"] = sum(1 for o in outs if o["engine"])
    elif suite == "eq":
        res.stats["atoms"] = sum(o["atoms"] for o in outs)
        res.stats["max_iterations"] = max((o["iterations"] for o in outs), default=0)
        res.stats["points"] = [[o["z"], o["iterations"]] for o in outs]
    elif suite == "normalize":
        res.stats["rewrites"] = sum(o["rewrites"] for o in outs)
        res.stats["non_normal_inputs"] = sum(1 for o in outs if not o["was_normal"])
    elif suite == "witness":
        res.stats["engine_yes"] = sum(1 for o in outs if o.get("engine"))
        res.stats["oracle_yes"] = sum(1 for o in outs if o.get("oracle"))
    elif suite == "zap":
        res.stats["shrunk"] = sum(1 for o in outs if o.get("shrunk"))
    return res
