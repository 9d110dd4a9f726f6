"""Reader and writer for ``.spa`` protocol files.

The grammar is documented in ``docs/speclang.md``.  Parsing produces a
:class:`SpecFile`; :func:`pretty_print` writes one back in a form that parses
to an equal value.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .assertions import And, Assertion, Eq, Exists, Member, Pred, Says, render, render_term
from .errors import ParseError, SortError, UnresolvedIdentifier
from .protocol import STAR, Protocol, Role, Step, default_knowledge
from .terms import AGENT, INST, KEY, PLAIN, QUANT, Enc, Name, Pair, Term, Var

TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<ident>[A-Za-z0-9_][A-Za-z0-9_']*)
  | (?P<punct>[(){}\[\],;:.~/*?$])
    """,
    re.VERBOSE,
)

ASSERT_WORDS = {"and", "exists", "says", "member"}


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Tok]:
    out, line, start, pos = [], 1, 0, 0
    while pos < len(src):
        m = TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind in ("ident", "punct"):
            out.append(Tok(kind, m.group(), line, m.start() - start + 1))
        pos = m.end()
    out.append(Tok("eof", "", line, pos - start + 1))
    return out


@dataclass
class DeriveQuery:
    name: str
    terms: list
    assumptions: list
    goal: Assertion


@dataclass
class AttackQuery:
    name: str
    goal: Assertion
    sessions: int = 2


@dataclass
class SpecFile:
    mode: str = "extended"
    names: dict = field(default_factory=dict)  # id -> Name
    public: set = field(default_factory=set)
    agents: list = field(default_factory=list)
    intruder: Optional[Name] = None
    keypairs: list = field(default_factory=list)  # (pk, sk, owner or None)
    preds: dict = field(default_factory=dict)
    knows: dict = field(default_factory=dict)  # agent -> [Term]
    facts: dict = field(default_factory=dict)  # agent -> [Assertion]
    roles: dict = field(default_factory=dict)
    derives: dict = field(default_factory=dict)
    attacks: dict = field(default_factory=dict)
    order: list = field(default_factory=list)  # declaration order of names

    @property
    def spare(self) -> Name:
        ids = set(self.names)
        cand, n = "spare", 0
        while cand in ids:
            n += 1
            cand = f"spare{n}"
        return Name(cand, KEY)

    def protocol(self) -> Protocol:
        if self.intruder is None:
            raise ParseError("no intruder declared")
        agents = list(self.agents)
        if self.intruder not in agents:
            agents.append(self.intruder)
        public = {n for n in self.public}
        init = default_knowledge(agents, self.keypairs, public, self.spare, self.knows, self.facts)
        domain = tuple(sorted((n for n in public if n.kind == PLAIN), key=lambda n: n.id))
        return Protocol(dict(self.roles), init, self.intruder, self.spare, self.mode, domain)

    def goal(self, name: str):
        if name in self.derives:
            return self.derives[name]
        if name in self.attacks:
            return self.attacks[name]
        raise UnresolvedIdentifier(f"no query named {name}")

    def scope(self) -> dict:
        env = dict(self.names)
        env.setdefault(self.spare.id, self.spare)
        return env


class Parser:
    def __init__(self, src: str, spec: Optional[SpecFile] = None):
        self.toks = tokenize(src)
        self.i = 0
        self.spec = spec or SpecFile()
        self.names = self.spec.scope() if spec is not None else {"*": STAR}
        if spec is None:
            self.spec.names["*"] = STAR
            self.spec.public.add(STAR)

    # token helpers
    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[Tok] = None) -> ParseError:
        t = tok or self.tok
        return ParseError(msg, t.line, t.col)

    def take(self, text: Optional[str] = None, kind: Optional[str] = None) -> Tok:
        t = self.tok
        if (text is not None and t.text != text) or (kind is not None and t.kind != kind):
            want = repr(text) if text else kind
            raise self.error(f"expected {want}, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind != "eof"

    def ident(self) -> str:
        return self.take(kind="ident").text

    # declarations
    def declare(self, ident: str, name: Name, tok: Tok) -> Name:
        old = self.spec.names.get(ident)
        if old is not None and old is not name:
            raise ParseError(f"{ident} is already declared", tok.line, tok.col)
        self.spec.names[ident] = name
        self.names[ident] = name
        if ident not in self.spec.order:
            self.spec.order.append(ident)
        return name

    def ident_list(self) -> list[tuple[str, Tok]]:
        out = []
        while True:
            t = self.tok
            out.append((self.ident(), t))
            if not self.at(","):
                return out
            self.take(",")

    def resolve_name(self, ident: str, tok: Tok) -> Name:
        n = self.names.get(ident)
        if not isinstance(n, Name):
            raise UnresolvedIdentifier(f"undeclared name {ident}", tok.line, tok.col)
        return n

    # terms
    def term(self, scope: dict) -> Term:
        t = self.tok
        if t.text == "(":
            self.take("(")
            a = self.term(scope)
            self.take(",")
            b = self.term(scope)
            self.take(")")
            return Pair(a, b)
        if t.text == "{":
            self.take("{")
            a = self.term(scope)
            self.take("}")
            return self._enc(a, self.atom(scope), t)
        if t.text == "enc" and self.peek().text == "(":
            self.take("enc")
            self.take("(")
            a = self.term(scope)
            self.take(",")
            k = self.atom(scope)
            self.take(")")
            return self._enc(a, k, t)
        return self.atom(scope)

    def _enc(self, a: Term, k: Term, tok: Tok) -> Term:
        try:
            return Enc(a, k)
        except SortError as e:
            raise ParseError(str(e), tok.line, tok.col) from None

    def atom(self, scope: dict) -> Term:
        t = self.tok
        if t.text == "*":
            self.take("*")
            return STAR
        if t.text == "?":
            self.take("?")
            return Var(self.ident(), INST)
        if t.text == "$":
            self.take("$")
            return Var(self.ident(), QUANT)
        ident = self.ident()
        if ident in scope:
            return scope[ident]
        return self.resolve_name(ident, t)

    # assertions
    def assertion(self, scope: dict) -> Assertion:
        t = self.tok
        nxt = self.peek().text
        if t.text == "exists" and self.peek().kind == "ident":
            self.take("exists")
            vs = []
            while not self.at("."):
                vs.append(Var(self.ident(), QUANT))
            self.take(".")
            inner = dict(scope)
            for v in vs:
                inner[v.id] = v
            body = self.assertion(inner)
            for v in reversed(vs):
                body = Exists(v, body)
            return body
        if t.text == "and" and nxt == "(":
            self.take("and")
            self.take("(")
            parts = [self.assertion(scope)]
            while self.at(","):
                self.take(",")
                parts.append(self.assertion(scope))
            self.take(")")
            if len(parts) < 2:
                raise self.error("and() needs at least two conjuncts", t)
            out = parts[-1]
            for p in reversed(parts[:-1]):
                out = And(p, out)
            return out
        if t.text == "says" and nxt == "(":
            self.take("says")
            self.take("(")
            k = self.term(scope)
            self.take(",")
            body = self.assertion(scope)
            self.take(")")
            return Says(k, body)
        if t.text == "member" and nxt == "(":
            self.take("member")
            self.take("(")
            s = self.term(scope)
            if not isinstance(s, (Name, Var)):
                raise self.error("a membership subject must be a name or a variable", t)
            self.take(",")
            self.take("[")
            items = [self.resolve_name(i, tk) for i, tk in self.ident_list()]
            self.take("]")
            self.take(")")
            return Member(s, tuple(items))
        if t.kind == "ident" and t.text in self.spec.preds and nxt == "(":
            sym = self.ident()
            self.take("(")
            args = [self.term(scope)]
            while self.at(","):
                self.take(",")
                args.append(self.term(scope))
            self.take(")")
            if len(args) != self.spec.preds[sym]:
                raise self.error(f"{sym} takes {self.spec.preds[sym]} arguments", t)
            if not all(isinstance(a, (Name, Var)) for a in args):
                raise self.error("predicate arguments must be names or variables", t)
            return Pred(sym, tuple(args))
        left = self.term(scope)
        if self.at("~"):
            self.take("~")
            return Eq(left, self.term(scope))
        return Eq(left, left)

    # file
    def parse_file(self) -> SpecFile:
        spec = self.spec
        while self.tok.kind != "eof":
            t = self.tok
            kw = self.ident()
            if kw == "mode":
                m = self.ident()
                if m not in ("core", "extended"):
                    raise self.error("mode is core or extended", t)
                spec.mode = m
            elif kw in ("names", "public"):
                for ident, tk in self.ident_list():
                    n = self.names.get(ident)
                    if n is None:
                        n = self.declare(ident, Name(ident), tk)
                    if kw == "public":
                        spec.public.add(n)
            elif kw == "agents":
                for ident, tk in self.ident_list():
                    n = self.declare(ident, Name(ident, AGENT), tk)
                    if n not in spec.agents:
                        spec.agents.append(n)
                    spec.public.add(n)
            elif kw == "intruder":
                tk = self.tok
                n = self.resolve_name(self.ident(), tk)
                if n.kind != AGENT:
                    raise ParseError("the intruder must be a declared agent", tk.line, tk.col)
                spec.intruder = n
            elif kw == "key":
                for ident, tk in self.ident_list():
                    self.declare(ident, Name(ident, KEY), tk)
            elif kw == "keypair":
                t1, pk = self.tok, self.ident()
                t2, sk = self.tok, self.ident()
                owner = None
                if self.at("of"):
                    self.take("of")
                    to = self.tok
                    owner = self.resolve_name(self.ident(), to)
                p = self.declare(pk, Name(pk, KEY, sk), t1)
                s = self.declare(sk, Name(sk, KEY, pk), t2)
                spec.public.add(p)
                spec.keypairs.append((p, s, owner))
            elif kw == "pred":
                sym = self.ident()
                self.take("/")
                tk = self.tok
                ar = self.ident()
                if not ar.isdigit():
                    raise ParseError("arity must be a number", tk.line, tk.col)
                spec.preds[sym] = int(ar)
            elif kw in ("knows", "fact"):
                tk = self.tok
                who = self.resolve_name(self.ident(), tk)
                self.take(":")
                if kw == "knows":
                    items = [self.term({})]
                    while self.at(","):
                        self.take(",")
                        items.append(self.term({}))
                    spec.knows.setdefault(who, []).extend(items)
                else:
                    spec.facts.setdefault(who, []).append(self.assertion({}))
            elif kw == "role":
                self.role(t)
                continue
            elif kw == "derive":
                self.derive_query(t)
                continue
            elif kw == "attack":
                self.attack_query(t)
                continue
            else:
                raise self.error(f"unknown declaration {kw!r}", t)
            self.take(";")
        return spec

    def role(self, start: Tok) -> None:
        name = self.ident()
        if name in self.spec.roles:
            raise self.error(f"role {name} is defined twice", start)
        self.take("by")
        actors = [self.resolve_name(i, tk) for i, tk in self.ident_list()]
        self.take("{")
        steps: list[Step] = []
        choices: dict = {}
        cur: dict = {}

        def flush():
            if cur:
                steps.append(
                    Step(
                        cur.get("recv", Eq(STAR, STAR)),
                        cur.get("send", Eq(STAR, STAR)),
                        tuple(cur.get("guards", ())),
                        tuple(cur.get("retracts", ())),
                        cur.get("anon", False),
                    )
                )
                cur.clear()

        while not self.at("}"):
            t = self.tok
            kw = self.ident()
            if kw == "recv":
                if "recv" in cur or "send" in cur:
                    flush()
                cur["recv"] = self.assertion({})
            elif kw == "send":
                if "send" in cur:
                    flush()
                if self.at("anon"):
                    self.take("anon")
                    cur["anon"] = True
                cur["send"] = self.assertion({})
            elif kw == "assert":
                if "send" in cur:
                    flush()
                cur.setdefault("guards", []).append(self.assertion({}))
            elif kw == "retract":
                a = self.assertion({})
                if not isinstance(a, Pred):
                    raise self.error("only predicate facts can be retracted", t)
                if "send" not in cur:
                    raise self.error("retract must follow a send", t)
                cur.setdefault("retracts", []).append(a)
            elif kw == "choose":
                self.take("?")
                v = Var(self.ident(), INST)
                self.take("in")
                choices[v] = tuple(self.resolve_name(i, tk) for i, tk in self.ident_list())
            else:
                raise self.error(f"unknown role statement {kw!r}", t)
            self.take(";")
        flush()
        self.take("}")
        self.spec.roles[name] = Role(name, tuple(actors), tuple(steps), choices)

    def derive_query(self, start: Tok) -> None:
        name = self.ident()
        self.take("{")
        terms, assumptions, goal = [], [], None
        while not self.at("}"):
            t = self.tok
            kw = self.ident()
            if kw == "terms":
                terms.append(self.term({}))
                while self.at(","):
                    self.take(",")
                    terms.append(self.term({}))
            elif kw == "assume":
                assumptions.append(self.assertion({}))
            elif kw == "goal":
                goal = self.assertion({})
            else:
                raise self.error(f"unknown derive statement {kw!r}", t)
            self.take(";")
        self.take("}")
        if goal is None:
            raise self.error(f"derive {name} has no goal", start)
        self.spec.derives[name] = DeriveQuery(name, terms, assumptions, goal)

    def attack_query(self, start: Tok) -> None:
        name = self.ident()
        self.take("{")
        goal, sessions = None, 2
        while not self.at("}"):
            t = self.tok
            kw = self.ident()
            if kw == "goal":
                goal = self.assertion({})
            elif kw == "sessions":
                n = self.ident()
                if not n.isdigit():
                    raise self.error("sessions takes a number", t)
                sessions = int(n)
            else:
                raise self.error(f"unknown attack statement {kw!r}", t)
            self.take(";")
        self.take("}")
        if goal is None:
            raise self.error(f"attack {name} has no goal", start)
        self.spec.attacks[name] = AttackQuery(name, goal, sessions)


def parse(src: str) -> SpecFile:
    return Parser(src).parse_file()


def parse_term(text: str, spec: SpecFile) -> Term:
    p = Parser(text, spec)
    t = p.term({})
    p.take(kind="eof")
    return t


def parse_assertion(text: str, spec: SpecFile) -> Assertion:
    p = Parser(text, spec)
    a = p.assertion({})
    p.take(kind="eof")
    return a


CORPUS = ("example1.spa", "eqderiv.spa", "foo.spa", "disje.spa", "empty.spa")


def corpus_path(name: str) -> Path:
    return Path(str(resources.files("spa") / "corpus" / name))


def load(path: str) -> SpecFile:
    """Read a spec file; a bare corpus file name falls back to the bundled copy."""
    p = Path(path)
    if not p.exists() and p.name in CORPUS:
        p = corpus_path(p.name)
    return parse(p.read_text())


# -- writer -----------------------------------------------------------------------


def _show(a: Assertion) -> str:
    if isinstance(a, Eq) and a.left is a.right:
        return render_term(a.left)
    return render(a)


def _pretty_spec(spec: SpecFile) -> str:
    out = [f"mode {spec.mode};"]
    agents = set(spec.agents)
    kp = {n for p, s, _ in spec.keypairs for n in (p, s)}
    plain = [spec.names[i] for i in spec.order if spec.names[i].kind == PLAIN]
    keys = [spec.names[i] for i in spec.order if spec.names[i].kind == KEY and spec.names[i] not in kp]
    if spec.agents:
        out.append(f"agents {', '.join(a.id for a in spec.agents)};")
    if spec.intruder is not None:
        out.append(f"intruder {spec.intruder.id};")
    priv = [n.id for n in plain if n not in spec.public]
    pub = [n.id for n in plain if n in spec.public]
    if priv:
        out.append(f"names {', '.join(priv)};")
    if pub:
        out.append(f"public {', '.join(pub)};")
    if keys:
        out.append(f"key {', '.join(k.id for k in keys)};")
    for p, s, owner in spec.keypairs:
        out.append(f"keypair {p.id} {s.id}" + (f" of {owner.id};" if owner else ";"))
    for sym, ar in spec.preds.items():
        out.append(f"pred {sym}/{ar};")
    for who, ts in spec.knows.items():
        out.append(f"knows {who.id}: {', '.join(str(t) for t in ts)};")
    for who, fs in spec.facts.items():
        for f in fs:
            out.append(f"fact {who.id}: {render(f)};")
    for role in spec.roles.values():
        out.append("")
        out.append(f"role {role.name} by {', '.join(a.id for a in role.actors)} {{")
        for v, ns in role.choices.items():
            out.append(f"  choose {v} in {', '.join(n.id for n in ns)};")
        for s in role.steps:
            out.append(f"  recv {_show(s.recv)};")
            for g in s.guards:
                out.append(f"  assert {render(g)};")
            out.append(f"  send {'anon ' if s.anon else ''}{_show(s.send)};")
            for r in s.retracts:
                out.append(f"  retract {render(r)};")
        out.append("}")
    for q in spec.derives.values():
        out.append("")
        out.append(f"derive {q.name} {{")
        if q.terms:
            out.append(f"  terms {', '.join(str(t) for t in q.terms)};")
        for a in q.assumptions:
            out.append(f"  assume {render(a)};")
        out.append(f"  goal {render(q.goal)};")
        out.append("}")
    for q in spec.attacks.values():
        out.append("")
        out.append(f"attack {q.name} {{")
        out.append(f"  goal {render(q.goal)};")
        out.append(f"  sessions {q.sessions};")
        out.append("}")
    del agents
    return "\n".join(out) + "\n"


def _proof_lines(p, depth: int, out: list) -> None:
    label = p.rule if getattr(p, "index", None) is None else f"{p.rule}{p.index}"
    c = p.conclusion
    shown = str(c) if isinstance(c, Term) else render(c)
    out.append(f"{'  ' * depth}{label}: {shown}")
    for q in getattr(p, "side", ()):
        _proof_lines(q, depth + 1, out)
    for q in p.premises:
        _proof_lines(q, depth + 1, out)


def pretty_print(x) -> str:
    """Render a spec file, term, assertion, proof or run as text.

    Proofs print as indented rule trees with the conclusion at the top and each
    premise one level deeper; side derivations precede the premises.
    """
    from .dy import DyProof
    from .eqproof import EqProof
    from .protocol import Run

    if isinstance(x, SpecFile):
        return _pretty_spec(x)
    if isinstance(x, Term):
        return str(x)
    if isinstance(x, (DyProof, EqProof)):
        out: list = []
        _proof_lines(x, 0, out)
        return "\n".join(out) + "\n"
    if isinstance(x, Run):
        out = []
        for n, (i, j) in enumerate(x.events):
            sess = x.sessions[i]
            st_ = sess.steps[j]
            out.append(f"{n}. [{sess.role}#{sess.tag} {sess.actor.id}] recv {_show(st_.recv)}; send {_show(st_.send)}")
        for v, t in sorted(x.sigma.items(), key=lambda kv: kv[0].id):
            out.append(f"   {v} := {t}")
        return "\n".join(out) + "\n"
    return render(x)
