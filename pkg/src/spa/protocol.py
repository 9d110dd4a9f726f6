"""Roles, sessions, knowledge states and runs, with run validation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .assertions import (
    Assertion,
    Eq,
    Pred,
    all_vars,
    bound_vars,
    free_vars,
    freshen_bound,
    pubs,
    rename_bound,
    render,
    subst,
)
from .derive import DerivationCertificate, assert_derives
from .dy import dy_derives
from .eqproof import eq_rule
from .errors import InvalidRun, MalformedProtocol
from .terms import INST, KEY, QUANT, Name, Term, Var, apply, is_ground, term_key, term_vars

STAR = Name("*")


def message(t: Term) -> Assertion:
    """A bare term sent or received stands for ``t ~ t``."""
    return Eq(t, t)


@dataclass(frozen=True)
class Step:
    recv: Assertion
    send: Assertion
    guards: tuple = ()
    retracts: tuple = ()
    anon: bool = False

    def parts(self) -> list[Assertion]:
        return [self.recv, *self.guards, self.send, *self.retracts]


@dataclass
class Role:
    name: str
    actors: tuple
    steps: tuple
    choices: dict = field(default_factory=dict)

    def _first_occurrence(self) -> dict:
        first: dict = {}
        for i, s in enumerate(self.steps):
            for where, a in (("recv", s.recv), ("send", s.send), *(("send", g) for g in s.guards)):
                for v in sorted(free_vars(a), key=lambda v: v.id):
                    first.setdefault(v, where)
        return first

    def agent_vars(self) -> list[Var]:
        return sorted((v for v, w in self._first_occurrence().items() if w == "send"), key=lambda v: v.id)

    def intruder_vars(self) -> list[Var]:
        return sorted((v for v, w in self._first_occurrence().items() if w == "recv"), key=lambda v: v.id)


@dataclass(frozen=True)
class Knowledge:
    terms: frozenset = frozenset()
    assertions: tuple = ()

    def update(self, a: Assertion) -> "Knowledge":
        terms = self.terms | pubs(a)
        if a in self.assertions:
            return Knowledge(terms, self.assertions)
        return Knowledge(terms, self.assertions + (a,))

    def retract(self, a: Assertion) -> "Knowledge":
        return Knowledge(self.terms, tuple(b for b in self.assertions if b != a))

    def subst(self, sigma: dict) -> "Knowledge":
        return Knowledge(
            frozenset(apply(t, sigma) for t in self.terms),
            tuple(dict.fromkeys(subst(a, sigma) for a in self.assertions)),
        )

    def to_json(self) -> dict:
        return {
            "terms": sorted(str(t) for t in self.terms),
            "assertions": [render(a) for a in self.assertions],
        }


KnowledgeFunction = dict  # Name -> Knowledge


@dataclass
class Protocol:
    roles: dict
    initial: dict
    intruder: Name
    spare: Name
    mode: str = "extended"
    agent_domain: tuple = ()

    def instantiations(self) -> list[tuple]:
        """Every (role, actor, agent-variable binding) the search may start."""
        out = []
        for name in sorted(self.roles):
            role = self.roles[name]
            avs = role.agent_vars()
            doms = [role.choices.get(v, self.agent_domain) for v in avs]
            for actor in role.actors:
                for combo in itertools.product(*doms):
                    out.append((name, actor, dict(zip(avs, combo))))
        return out


@dataclass
class Session:
    tag: int
    role: str
    actor: Name
    binding: dict
    steps: tuple

    def free_vars(self) -> set:
        out: set = set()
        for s in self.steps:
            for a in s.parts():
                out |= free_vars(a)
        return out

    def bound_vars(self) -> set:
        out: set = set()
        for s in self.steps:
            for a in s.parts():
                out |= bound_vars(a)
        return out

    def to_json(self) -> dict:
        return {
            "tag": self.tag,
            "role": self.role,
            "actor": self.actor.id,
            "binding": {str(v): str(t) for v, t in sorted(self.binding.items(), key=lambda kv: kv[0].id)},
            "length": len(self.steps),
        }


def instantiate_session(
    protocol: Protocol, role_name: str, actor: Name, binding: dict, tag: int, length: Optional[int] = None
) -> Session:
    """Instantiate agent variables and rename every other variable apart by ``tag``."""
    role = protocol.roles.get(role_name)
    if role is None:
        raise MalformedProtocol(f"unknown role {role_name}")
    if actor not in role.actors:
        raise MalformedProtocol(f"{actor.id} does not play role {role_name}")
    missing = set(role.agent_vars()) - set(binding)
    if missing:
        raise MalformedProtocol(f"agent variable {min(missing, key=lambda v: v.id)} is not instantiated")
    steps = role.steps if length is None else role.steps[:length]
    ren = {v: Var(f"{v.id}_{tag}", INST) for v in role.intruder_vars()}
    sub = {**ren, **binding}
    counter = itertools.count(1)

    def fix(a: Assertion) -> Assertion:
        a = subst(a, sub)
        bren = {v: Var(f"{v.id}_{tag}_{next(counter)}", QUANT) for v in sorted(bound_vars(a), key=lambda v: v.id)}
        return rename_bound(a, bren)

    new_steps = tuple(
        Step(fix(s.recv), fix(s.send), tuple(fix(g) for g in s.guards), tuple(subst(r, sub) for r in s.retracts), s.anon)
        for s in steps
    )
    return Session(tag, role_name, actor, dict(binding), new_steps)


@dataclass
class Run:
    sessions: list
    events: list  # (session index, step index)
    sigma: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "sessions": [s.to_json() for s in self.sessions],
            "events": [list(e) for e in self.events],
            "sigma": {str(v): str(t) for v, t in sorted(self.sigma.items(), key=lambda kv: kv[0].id)},
        }


def run_from_json(protocol: Protocol, d: dict, parse_term) -> Run:
    sessions = []
    for s in d["sessions"]:
        actor = _lookup_actor(protocol, s["actor"])
        binding = {}
        role = protocol.roles[s["role"]]
        avs = {str(v): v for v in role.agent_vars()}
        for k, v in s.get("binding", {}).items():
            binding[avs[k]] = parse_term(v)
        sessions.append(instantiate_session(protocol, s["role"], actor, binding, s["tag"], s.get("length")))
    sigma = {}
    for k, v in d.get("sigma", {}).items():
        var = parse_term(k)
        if not isinstance(var, Var):
            raise InvalidRun(f"substitution key {k} is not a variable")
        sigma[var] = parse_term(v)
    return Run(sessions, [tuple(e) for e in d["events"]], sigma)


def _lookup_actor(protocol: Protocol, ident: str) -> Name:
    for r in protocol.roles.values():
        for a in r.actors:
            if a.id == ident:
                return a
    raise InvalidRun(f"unknown actor {ident}")


@dataclass
class StepVerdict:
    index: int
    session: int
    step: int
    actor: str
    honest: bool
    intruder: bool
    honest_cert: Optional[DerivationCertificate] = None
    intruder_cert: Optional[DerivationCertificate] = None

    @property
    def ok(self) -> bool:
        return self.honest and self.intruder

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "session": self.session,
            "step": self.step,
            "actor": self.actor,
            "honest": self.honest,
            "intruder": self.intruder,
            "mu": _wit(self.intruder_cert),
            "theta": _wit(self.honest_cert),
        }


def _wit(c: Optional[DerivationCertificate]) -> dict:
    if c is None:
        return {}
    return {str(x): str(t) for x, t in sorted(c.witness.items(), key=lambda kv: kv[0].id)}


@dataclass
class RunReport:
    valid: bool
    steps: list
    trace: list  # knowledge function after each event (index 0 = initial)
    failure: str = ""

    def mus(self) -> list[dict]:
        return [dict(s.intruder_cert.witness) if s.intruder_cert else {} for s in self.steps]

    def thetas(self) -> list[dict]:
        return [dict(s.honest_cert.witness) if s.honest_cert else {} for s in self.steps]

    def to_json(self) -> dict:
        return {"valid": self.valid, "failure": self.failure, "steps": [s.to_json() for s in self.steps]}


def check_coherent(sessions: Iterable[Session]) -> None:
    seen: set = set()
    for s in sessions:
        vs = s.free_vars() | s.bound_vars()
        clash = vs & seen
        if clash:
            raise InvalidRun(f"sessions share variable {min(clash, key=str)}")
        seen |= vs


def check_interleaving(run: Run) -> None:
    nxt = [0] * len(run.sessions)
    for e in run.events:
        i, j = e
        if not 0 <= i < len(run.sessions):
            raise InvalidRun(f"event {e} names an unknown session")
        if j != nxt[i] or j >= len(run.sessions[i].steps):
            raise InvalidRun(f"event {e} is out of order for its session")
        nxt[i] += 1


def event_vars(run: Run, upto: Optional[int] = None) -> set:
    out: set = set()
    for i, j in run.events[:upto]:
        s = run.sessions[i].steps[j]
        out |= free_vars(s.recv) | free_vars(s.send)
    return out


_CACHE: dict = {}


def derive_cached(k: Knowledge, goal: Assertion, mode: str) -> Optional[DerivationCertificate]:
    """``assert_derives`` on a knowledge state, with a shortcut for plain messages."""
    key = (k, goal, mode)
    if key in _CACHE:
        return _CACHE[key]
    if isinstance(goal, Eq) and goal.left is goal.right:
        T = k.terms
        for a in k.assertions:
            T = T | bound_vars(a)
        dp = dy_derives(T, goal.left)
        out = None
        if dp is not None:
            out = DerivationCertificate(goal, atom_proofs={render(goal): eq_rule(dp)})
    else:
        out = assert_derives(k.terms, k.assertions, goal, mode)
    if len(_CACHE) > 200_000:
        _CACHE.clear()
    _CACHE[key] = out
    return out


class Tracker:
    """Incremental knowledge bookkeeping shared by validation and attack search."""

    def __init__(self, protocol: Protocol, knowledge: Optional[dict] = None):
        self.protocol = protocol
        self.k = dict(knowledge if knowledge is not None else protocol.initial)

    def get(self, a: Name) -> Knowledge:
        return self.k.get(a, Knowledge())

    def honest_step(self, actor: Name, step: Step) -> tuple[Knowledge, Optional[DerivationCertificate]]:
        """Knowledge after receiving, and the certificate for the send (``None`` if blocked)."""
        ku = self.get(actor).update(step.recv)
        for g in step.guards:
            if derive_cached(ku, g, self.protocol.mode) is None:
                return ku, None
        return ku, derive_cached(ku, step.send, self.protocol.mode)

    def intruder_step(self, step: Step, sigma: dict) -> Optional[DerivationCertificate]:
        kI = self.get(self.protocol.intruder).subst(sigma)
        return derive_cached(kI, subst(step.recv, sigma), self.protocol.mode)

    def advance(self, actor: Name, ku: Knowledge, step: Step) -> "Tracker":
        nk = dict(self.k)
        for r in step.retracts:
            ku = ku.retract(r)
        nk[actor] = ku
        I = self.protocol.intruder
        nk[I] = (ku if actor is I else nk.get(I, Knowledge())).update(step.send)
        return Tracker(self.protocol, nk)


def validate_run(protocol: Protocol, run: Run) -> RunReport:
    check_coherent(run.sessions)
    check_interleaving(run)
    needed = event_vars(run)
    for v in needed:
        if v not in run.sigma:
            raise InvalidRun(f"substitution does not cover {v}")
    for v, t in run.sigma.items():
        if not is_ground(t):
            raise InvalidRun(f"substitution maps {v} to the non-ground term {t}")
    tr = Tracker(protocol)
    trace = [tr.k]
    verdicts = []
    for idx, (i, j) in enumerate(run.events):
        sess = run.sessions[i]
        step = sess.steps[j]
        icert = tr.intruder_step(step, run.sigma)
        ku, hcert = tr.honest_step(sess.actor, step)
        v = StepVerdict(idx, i, j, sess.actor.id, hcert is not None, icert is not None, hcert, icert)
        verdicts.append(v)
        if not v.ok:
            who = "honest agent" if hcert is None else "intruder"
            return RunReport(False, verdicts, trace, f"event {idx}: the {who} cannot derive its message")
        tr = tr.advance(sess.actor, ku, step)
        trace.append(tr.k)
    return RunReport(True, verdicts, trace)


def fresh_goal(goal: Assertion, avoid: set) -> Assertion:
    return freshen_bound(goal, avoid, tag="g")


def knowledge_vars(k: Knowledge) -> set:
    out: set = set()
    for t in k.terms:
        out |= term_vars(t)
    for a in k.assertions:
        out |= all_vars(a)
    return out


def is_attack(protocol: Protocol, run: Run, goal: Assertion, report: Optional[RunReport] = None) -> Optional[DerivationCertificate]:
    """Certificate that the intruder derives ``goal`` at the end of ``run``."""
    report = report or validate_run(protocol, run)
    if not report.valid:
        return None
    kI = report.trace[-1].get(protocol.intruder, Knowledge()).subst(run.sigma)
    g = fresh_goal(subst(goal, run.sigma), knowledge_vars(kI))
    return derive_cached(kI, g, protocol.mode)


def default_knowledge(
    agents: Iterable[Name],
    keypairs: Iterable[tuple],
    public: Iterable[Name],
    spare: Name,
    extra: Optional[dict] = None,
    facts: Optional[dict] = None,
) -> dict:
    """Own secret keys, every public key, public names and the spare name."""
    agents = list(agents)
    pub = set(public) | set(agents) | {spare, STAR}
    pub |= {pk for pk, sk, owner in keypairs}
    out = {}
    for a in agents:
        own = {sk for pk, sk, owner in keypairs if owner is a}
        k = Knowledge(frozenset(pub | own | set((extra or {}).get(a, ()))))
        for f in (facts or {}).get(a, ()):
            k = k.update(f)
        out[a] = k
    return out


__all__ = [
    "Step",
    "Role",
    "Knowledge",
    "Protocol",
    "Session",
    "Run",
    "RunReport",
    "StepVerdict",
    "instantiate_session",
    "validate_run",
    "is_attack",
    "run_from_json",
    "default_knowledge",
    "message",
    "STAR",
    "KEY",
    "term_key",
]
