"""Bounded attack search and the size-reduction ("zap") machinery behind it.

Given a valid run, the type universe collects every subterm of the knowledge
states before substitution.  Variables whose final value equals no value of a
non-variable universe term are minimal; their values carry no information the
protocol can inspect and are replaced by the spare name.  Replacing those
values keeps runs valid and attacks intact while bounding every substituted
term by the universe size, which is what makes the search below finite.
"""

from __future__ import annotations

import itertools
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .assertions import Assertion, free_vars, st_all, subst
from .derive import DerivationCertificate, WitnessSearch, strip
from .dy import DESTRUCTORS, DyProof
from .eqproof import EqProof
from .protocol import (
    Knowledge,
    Protocol,
    Run,
    RunReport,
    Session,
    Tracker,
    derive_cached,
    fresh_goal,
    instantiate_session,
    is_attack,
    knowledge_vars,
    validate_run,
)
from .terms import Enc, Name, Term, Var, apply, dagsize, inverse, is_atomic, is_ground, resolve, subterms_of, term_key

FOUND, NONE, EXHAUSTED = "FOUND", "NONE", "EXHAUSTED"


@dataclass
class TypeUniverse:
    C: frozenset
    D: frozenset

    @classmethod
    def of_run(cls, report: RunReport) -> "TypeUniverse":
        terms: set = set()
        assertions: list = []
        for k in report.trace:
            for kn in k.values():
                terms |= kn.terms
                assertions.extend(kn.assertions)
        C = frozenset(subterms_of(terms) | st_all(assertions))
        return cls(C, frozenset(t for t in C if not isinstance(t, Var)))


def combined_map(run: Run, report: RunReport) -> dict:
    out = dict(run.sigma)
    for w in report.mus() + report.thetas():
        out.update(w)
    return out


@dataclass
class ZapContext:
    universe: TypeUniverse
    omega_map: dict
    spare: Name
    minimal: frozenset = frozenset()
    targets: frozenset = frozenset()

    def __post_init__(self):
        dvals = {self.omega(t) for t in self.universe.D}
        mins = frozenset(x for x in self.omega_map if self.omega(x) not in dvals)
        self.minimal = mins
        self.targets = frozenset(self.omega(x) for x in mins)

    def omega(self, t: Term) -> Term:
        return resolve(t, self.omega_map)

    def zappable(self, t: Term) -> bool:
        return self.omega(t) in self.targets

    def zap(self, t: Term) -> Term:
        if isinstance(t, Var):
            return t
        if self.zappable(t):
            return self.spare
        if isinstance(t, Name):
            return t
        a, b = t.children
        za, zb = self.zap(a), self.zap(b)
        if isinstance(t, Enc) and not (isinstance(zb, Var) or (isinstance(zb, Name) and zb.is_key)):
            zb = self.spare
        return type(t)(za, zb)


def zap(ctx: ZapContext, t: Term) -> Term:
    return ctx.zap(t)


def small_subst(ctx: ZapContext, lam: dict) -> dict:
    return {x: ctx.zap(t) for x, t in lam.items()}


def zap_context(protocol: Protocol, run: Run, report: RunReport) -> ZapContext:
    return ZapContext(TypeUniverse.of_run(report), combined_map(run, report), protocol.spare)


# -- typed proofs -------------------------------------------------------------------


def typed_check_dy(p: DyProof, sigma: dict, D: Iterable[Term]) -> bool:
    """Every subproof ends in a constructor or concludes a typed term."""
    typed = {apply(t, sigma) for t in D}

    def ok(q: DyProof) -> bool:
        c = q.conclusion
        if q.rule not in ("pair", "enc") and not (c in typed or (isinstance(c, Var) and c.quantified)):
            return False
        return all(ok(r) for r in q.premises)

    return ok(p)


def typed_check_eq(p: EqProof, sigma: dict, ctx: ZapContext) -> bool:
    """Every subproof contains a congruence step, is reflexive, or relates typed terms."""
    typed = {apply(t, sigma) for t in ctx.universe.D} | {ctx.omega(t) for t in ctx.universe.C}

    def has_cons(q: EqProof) -> bool:
        return q.rule == "cons" or any(has_cons(r) for r in q.premises)

    def ok(q: EqProof) -> bool:
        c = q.conclusion
        if hasattr(c, "left") and hasattr(c, "right") and not has_cons(q) and c.left is not c.right:
            for t in (c.left, c.right):
                if not (t in typed or (isinstance(t, Var) and t.quantified)):
                    return False
        return all(ok(r) for r in q.premises)

    return ok(p)


# -- zap preservation ----------------------------------------------------------------


@dataclass
class ZapReport:
    ok: bool
    sigma_star: dict
    mus_star: list
    bounded: bool
    bound: int
    size_before: int
    size_after: int
    failures: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "bounded": self.bounded,
            "bound": self.bound,
            "size_before": self.size_before,
            "size_after": self.size_after,
            "sigma_star": {str(x): str(t) for x, t in sorted(self.sigma_star.items(), key=lambda kv: kv[0].id)},
            "failures": self.failures,
        }


def _witness_holds(k: Knowledge, goal: Assertion, nu: dict, mode: str) -> bool:
    """Check a given witness for ``k |- goal`` without searching."""
    from .assertions import kernel

    K = kernel(k.terms, k.assertions)
    ws = WitnessSearch(K, goal, bound=10**9)
    if set(nu) != set(ws.xs):
        return False
    return ws.check(nu) is not None


def verify_zap_preservation(protocol: Protocol, run: Run, report: Optional[RunReport] = None, goal: Optional[Assertion] = None) -> ZapReport:
    """Zap a valid run and confirm the smaller run is valid step by step."""
    report = report or validate_run(protocol, run)
    if not report.valid:
        raise ValueError("zap preservation needs a valid run")
    ctx = zap_context(protocol, run, report)
    bound = len(ctx.universe.D)
    sigma_star = small_subst(ctx, run.sigma)
    mus_star = [small_subst(ctx, mu) for mu in report.mus()]
    failures = []
    bounded = all(dagsize(t) <= bound for lam in [sigma_star, *mus_star] for t in lam.values())
    if not bounded:
        failures.append("a zapped value exceeds the universe size")
    for idx, (i, j) in enumerate(run.events):
        kI = report.trace[idx].get(protocol.intruder, Knowledge()).subst(sigma_star)
        step = run.sessions[i].steps[j]
        if not _witness_holds(kI, subst(step.recv, sigma_star), mus_star[idx], protocol.mode):
            failures.append(f"event {idx}: zapped witness does not derive the zapped message")
    small = Run(run.sessions, run.events, sigma_star)
    rep2 = validate_run(protocol, small)
    if not rep2.valid:
        failures.append(f"zapped run is invalid: {rep2.failure}")
    if goal is not None and is_attack(protocol, run, goal, report) is not None:
        if is_attack(protocol, small, goal, rep2 if rep2.valid else None) is None:
            failures.append("zapped run no longer attacks the goal")
    before = sum(dagsize(t) for t in run.sigma.values())
    after = sum(dagsize(t) for t in sigma_star.values())
    return ZapReport(not failures, sigma_star, mus_star, bounded, bound, before, after, failures)


# -- attack search --------------------------------------------------------------------


@dataclass
class AttackResult:
    status: str
    run: Optional[Run] = None
    report: Optional[RunReport] = None
    certificate: Optional[DerivationCertificate] = None
    zap: Optional[ZapReport] = None
    nodes: int = 0
    sessions_tried: int = 0
    elapsed_ms: float = 0.0


class _Budget(Exception):
    pass


class _Cancelled(Exception):
    pass


class _Search:
    def __init__(self, protocol: Protocol, goal: Assertion, deadline: float, max_nodes: Optional[int]):
        self.p = protocol
        self.goal = goal
        self.deadline = deadline
        self.max_nodes = max_nodes
        self.nodes = 0
        self._local = threading.local()
        init = protocol.initial.get(protocol.intruder, Knowledge())
        self.inverse_known = {t for t in init.terms if isinstance(t, Name) and t.is_key}

    def tick(self) -> None:
        abort = getattr(self._local, "abort", None)
        if abort is not None and abort():
            raise _Cancelled()
        self._local.count += 1
        self.nodes += 1
        if self.nodes % 64 == 0 and time.monotonic() > self.deadline:
            raise _Budget()
        if self.max_nodes is not None and self.nodes > self.max_nodes:
            raise _Budget()

    def pool(self, sessions: list) -> list:
        terms: set = set()
        assertions: list = []
        for k in self.p.initial.values():
            terms |= k.terms
            assertions.extend(k.assertions)
        for s in sessions:
            for st_ in s.steps:
                assertions.extend(st_.parts())
        C = subterms_of(terms) | st_all(assertions) | {self.p.spare}
        return [t for t in C if not isinstance(t, Var)]

    def candidates(self, pool: list, sigma: dict) -> list:
        out = {apply(t, sigma) for t in pool}
        out = [t for t in out if is_ground(t)]

        def key(t: Term):
            own = 0 if (isinstance(t, Name) and t.is_key and inverse(t) in self.inverse_known) else 1
            return (dagsize(t), own, t is self.p.spare, str(t))

        return sorted(out, key=key)

    def goal_holds(self, tr: Tracker, sigma: dict) -> Optional[DerivationCertificate]:
        kI = tr.get(self.p.intruder).subst(sigma)
        g = fresh_goal(subst(self.goal, sigma), knowledge_vars(kI))
        return derive_cached(kI, g, self.p.mode)

    def run_sessions(self, sessions: list, abort=None) -> Optional[tuple]:
        self._local.abort = abort
        self._local.count = 0
        pool = self.pool(sessions)
        n = len(sessions)
        keyvars = set()
        for sess in sessions:
            for st_ in sess.steps:
                for t in st_all(st_.parts()):
                    if isinstance(t, Enc) and isinstance(t.key, Var):
                        keyvars.add(t.key)
        same_as_prev = [
            i > 0 and (sessions[i].role, sessions[i].actor, tuple(sorted(sessions[i].binding.items(), key=lambda kv: kv[0].id)))
            == (sessions[i - 1].role, sessions[i - 1].actor, tuple(sorted(sessions[i - 1].binding.items(), key=lambda kv: kv[0].id)))
            for i in range(n)
        ]
        seen: set = set()

        def dfs(tr: Tracker, pos: tuple, sigma: dict, events: list):
            self.tick()
            if free_vars(self.goal) <= set(sigma) and self.goal_holds(tr, sigma) is not None:
                return events, sigma
            kI = tr.get(self.p.intruder).subst(sigma)
            state = (pos, kI, frozenset((v, t) for v, t in sigma.items()))
            if state in seen:
                return None
            seen.add(state)
            for i in range(n):
                if pos[i] >= len(sessions[i].steps):
                    continue
                if same_as_prev[i] and pos[i - 1] == 0:
                    continue
                step = sessions[i].steps[pos[i]]
                ku, hcert = tr.honest_step(sessions[i].actor, step)
                if hcert is None:
                    continue
                new = sorted(free_vars(step.recv) - set(sigma), key=lambda v: v.id)
                cands = self.candidates(pool, sigma)
                keys = [t for t in cands if isinstance(t, Name) and t.is_key]
                doms = [keys if v in keyvars else cands for v in new]
                for combo in itertools.product(*doms):
                    s2 = dict(sigma)
                    s2.update(zip(new, combo))
                    try:
                        icert = tr.intruder_step(step, s2)
                    except Exception as e:  # sort clash from a key-position variable
                        from .errors import SortError

                        if isinstance(e, SortError):
                            continue
                        raise
                    self.tick()
                    if icert is None:
                        continue
                    nxt = tr.advance(sessions[i].actor, ku, step)
                    p2 = pos[:i] + (pos[i] + 1,) + pos[i + 1 :]
                    hit = dfs(nxt, p2, s2, events + [(i, pos[i])])
                    if hit is not None:
                        return hit
            return None

        hit = dfs(Tracker(self.p), (0,) * n, {}, [])
        return hit


def _parallel(attempt, combos: list, threads: int) -> list:
    """Run combinations concurrently, keeping the sequential answer.

    Once combination ``i`` succeeds, later ones are cancelled; earlier ones run
    to completion so the first hit in order is the one reported.
    """
    best = [len(combos)]
    lock = threading.Lock()

    def job(idx):
        try:
            out = attempt(combos[idx], lambda: best[0] < idx)
        except _Cancelled:
            return None
        if out[1] is not None:
            with lock:
                best[0] = min(best[0], idx)
        return out

    with ThreadPoolExecutor(max_workers=threads) as ex:
        outs = list(ex.map(job, range(len(combos))))
    return [o for i, o in enumerate(outs) if o is not None and i <= best[0]]


def find_attack(
    protocol: Protocol,
    goal: Assertion,
    max_sessions: int,
    budget_ms: Optional[float] = None,
    max_nodes: Optional[int] = None,
    threads: int = 1,
) -> AttackResult:
    """Search runs of at most ``max_sessions`` sessions for one deriving ``goal``.

    ``NONE`` means no attack exists among the enumerated runs with
    universe-bounded substitutions; ``EXHAUSTED`` means the budget ran out first.
    """
    t0 = time.monotonic()
    deadline = t0 + (budget_ms / 1000.0 if budget_ms is not None else float("inf"))
    insts = protocol.instantiations()
    search = _Search(protocol, goal, deadline, max_nodes)
    tried = 0
    counted = 0  # nodes of the combinations that decide the answer; independent of scheduling

    def attempt(combo, abort=None):
        sessions = [instantiate_session(protocol, *insts[c], tag=j + 1) for j, c in enumerate(combo)]
        hit = search.run_sessions(sessions, abort)
        return sessions, hit, search._local.count

    try:
        for k in range(1, max_sessions + 1):
            combos = list(itertools.combinations_with_replacement(range(len(insts)), k))
            if threads > 1:
                results = _parallel(attempt, combos, threads)
            else:
                results = []
                for c in combos:
                    results.append(attempt(c))
                    if results[-1][1] is not None:
                        break
            tried += len(results)
            counted += sum(r[2] for r in results)
            for sessions, hit, _ in results:
                if hit is None:
                    continue
                events, sigma = hit
                used = sorted({i for i, _ in events})
                remap = {old: new for new, old in enumerate(used)}
                kept = [sessions[i] for i in used]
                run = Run(kept, [(remap[i], j) for i, j in events], dict(sigma))
                report = validate_run(protocol, run)
                cert = is_attack(protocol, run, goal, report)
                if not report.valid or cert is None:
                    raise RuntimeError("attack search produced a run that does not re-validate")
                zrep = verify_zap_preservation(protocol, run, report, goal)
                ms = (time.monotonic() - t0) * 1000
                return AttackResult(FOUND, run, report, cert, zrep, counted, tried, ms)
    except _Budget:
        return AttackResult(EXHAUSTED, nodes=search.nodes, sessions_tried=tried, elapsed_ms=(time.monotonic() - t0) * 1000)
    return AttackResult(NONE, nodes=counted, sessions_tried=tried, elapsed_ms=(time.monotonic() - t0) * 1000)
