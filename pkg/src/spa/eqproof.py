"""Equality-derivation proofs: checking, normalization, normality and subterm checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .assertions import Assertion, Eq, Member, Pred, Says, canonical, lists_of, render, st_all, term_occurrences
from .dy import CONSTRUCTORS, DESTRUCTORS, DyProof, check_dy_proof, dy_derives, is_normal_dy, normalize_dy
from .errors import BoundExceeded, InvalidProof
from .terms import Name, Term, inverse, rebuild, same_constructor, subterms_of

EQ_RULES = ("ax", "eq", "sym", "trans", "cons", "proj", "prom", "wk", "int", "subst", "say")


@dataclass(frozen=True)
class EqProof:
    rule: str
    conclusion: Assertion
    premises: tuple["EqProof", ...] = ()
    side: tuple[DyProof, ...] = ()
    index: Optional[int] = None

    def nodes(self):
        yield self
        for p in self.premises:
            yield from p.nodes()

    @property
    def size(self) -> int:
        return 1 + sum(p.size for p in self.premises)

    def to_json(self) -> dict:
        out = {
            "rule": self.rule,
            "conclusion": render(self.conclusion),
            "premises": [p.to_json() for p in self.premises],
            "side": [s.to_json() for s in self.side],
        }
        if self.index is not None:
            out["index"] = self.index
        return out


def dy_from_json(d: dict, parse_term: Callable[[str], Term]) -> DyProof:
    return DyProof(d["rule"], parse_term(d["conclusion"]), tuple(dy_from_json(p, parse_term) for p in d.get("premises", [])))


def eq_from_json(d: dict, parse_term, parse_assertion) -> EqProof:
    return EqProof(
        d["rule"],
        parse_assertion(d["conclusion"]),
        tuple(eq_from_json(p, parse_term, parse_assertion) for p in d.get("premises", [])),
        tuple(dy_from_json(s, parse_term) for s in d.get("side", [])),
        d.get("index"),
    )


# -- constructors used by the engine and the rewriter ----------------------------


def ax(a: Assertion) -> EqProof:
    return EqProof("ax", a)


def eq_rule(dp: DyProof) -> EqProof:
    return EqProof("eq", Eq(dp.conclusion, dp.conclusion), side=(dp,))


def sym(p: EqProof) -> EqProof:
    c = p.conclusion
    return EqProof("sym", Eq(c.right, c.left), (p,))


def trans(ps: Iterable[EqProof]) -> EqProof:
    ps = tuple(ps)
    if len(ps) == 1:
        return ps[0]
    return EqProof("trans", Eq(ps[0].conclusion.left, ps[-1].conclusion.right), ps)


def cons(like: Term, p0: EqProof, p1: EqProof) -> EqProof:
    c0, c1 = p0.conclusion, p1.conclusion
    return EqProof("cons", Eq(rebuild(like, c0.left, c1.left), rebuild(like, c0.right, c1.right)), (p0, p1))


def proj(i: int, p: EqProof, side: tuple) -> EqProof:
    c = p.conclusion
    return EqProof("proj", Eq(c.left.children[i], c.right.children[i]), (p,), side, i)


def proj_side(T: frozenset, l: Term, r: Term) -> Optional[tuple]:
    out = []
    for t in (*l.children, *r.children):
        dp = dy_derives(T, t)
        if dp is None:
            return None
        out.append(dp)
    return tuple(out)


# -- checking --------------------------------------------------------------------


def check_eq_proof(p: EqProof, T: Iterable[Term], E: Iterable[Assertion]) -> None:
    """Raise :class:`InvalidProof` unless ``p`` is a valid proof from ``(T; E)``."""
    T, E = frozenset(T), frozenset(E)
    says = {canonical(a) for a in E if isinstance(a, Says)}
    memo: set = set()

    def go(q: EqProof) -> None:
        if id(q) in memo:
            return
        for r in q.premises:
            go(r)
        c, ps, r = q.conclusion, [x.conclusion for x in q.premises], q.rule
        n = len(ps)
        ok = False
        if r == "ax":
            ok = n == 0 and (c in E or (isinstance(c, Says) and canonical(c) in says))
        elif r == "eq":
            if len(q.side) == 1 and n == 0 and isinstance(c, Eq) and c.left is c.right:
                check_dy_proof(q.side[0], T)
                ok = q.side[0].conclusion is c.left
        elif r == "sym":
            ok = n == 1 and isinstance(c, Eq) and ps[0] == Eq(c.right, c.left)
        elif r == "trans":
            ok = (
                n >= 1
                and all(isinstance(x, Eq) for x in ps)
                and all(ps[i].right is ps[i + 1].left for i in range(n - 1))
                and c == Eq(ps[0].left, ps[-1].right)
            )
        elif r == "cons":
            if n == 2 and isinstance(c, Eq) and same_constructor(c.left, c.right):
                ok = ps[0] == Eq(c.left.children[0], c.right.children[0]) and ps[1] == Eq(
                    c.left.children[1], c.right.children[1]
                )
        elif r == "proj":
            if n == 1 and isinstance(ps[0], Eq) and q.index in (0, 1) and same_constructor(ps[0].left, ps[0].right):
                l, rr = ps[0].left, ps[0].right
                want = (*l.children, *rr.children)
                if len(q.side) == 4 and all(s.conclusion is w for s, w in zip(q.side, want)):
                    for s in q.side:
                        check_dy_proof(s, T)
                    ok = c == Eq(l.children[q.index], rr.children[q.index])
        elif r == "prom":
            ok = n == 1 and isinstance(ps[0], Member) and len(ps[0].items) == 1 and c == Eq(ps[0].subject, ps[0].items[0])
        elif r == "wk":
            ok = (
                n == 1
                and isinstance(ps[0], Eq)
                and isinstance(c, Member)
                and ps[0].left is c.subject
                and ps[0].right in c.items
            )
        elif r == "int":
            if n >= 1 and isinstance(c, Member) and all(isinstance(x, Member) and x.subject is c.subject for x in ps):
                common = set(ps[0].items)
                for x in ps[1:]:
                    common &= set(x.items)
                ok = common == set(c.items)
        elif r == "subst":
            ok = (
                n == 2
                and isinstance(ps[0], Member)
                and isinstance(ps[1], Eq)
                and ps[1].left is ps[0].subject
                and c == Member(ps[1].right, ps[0].items)
            )
        elif r == "say":
            if n == 1 and isinstance(c, Says) and c.body == ps[0] and len(q.side) == 1:
                check_dy_proof(q.side[0], T)
                ok = q.side[0].conclusion is inverse(c.key)
        if not ok:
            raise InvalidProof(f"bad {r} step concluding {render(c)}")
        memo.add(id(q))

    go(p)


# -- measure -----------------------------------------------------------------------


def measure(p: EqProof) -> tuple[int, int, int]:
    """(size of dy premises of eq/say steps, number of cons steps, proof size)."""
    d1 = d2 = d3 = 0
    for q in p.nodes():
        d3 += 1
        if q.rule == "cons":
            d2 += 1
        if q.rule in ("eq", "say"):
            d1 += sum(s.size for s in q.side)
    return (d1, d2, d3)


# -- rewriting -----------------------------------------------------------------------


# rewrites that only move sym steps; the measure need not drop for these
SYM_RULES = ("sym-eq", "sym-sym", "push-sym")


def _refl(p: EqProof) -> bool:
    c = p.conclusion
    return isinstance(c, Eq) and c.left is c.right


def _sym_rules(p: EqProof, ctx) -> Optional[tuple[str, EqProof]]:
    if p.rule != "sym":
        return None
    q = p.premises[0]
    if q.rule == "eq":
        return "sym-eq", q
    if q.rule == "sym":
        return "sym-sym", q.premises[0]
    if q.rule == "trans":
        return "push-sym", trans(sym(x) for x in reversed(q.premises))
    if q.rule == "cons":
        return "push-sym", cons(q.conclusion.left, sym(q.premises[0]), sym(q.premises[1]))
    if q.rule == "proj":
        s = q.side
        return "push-sym", proj(q.index, sym(q.premises[0]), (s[2], s[3], s[0], s[1]))
    return None


def _rest(p: EqProof, T) -> Optional[tuple[str, EqProof]]:
    r = p.rule
    if r == "eq" and p.side[0].rule in CONSTRUCTORS:
        d = p.side[0]
        return "split-eq", cons(d.conclusion, eq_rule(d.premises[0]), eq_rule(d.premises[1]))
    if r == "trans":
        ps = p.premises
        if len(ps) == 1:
            return "trim-trans", ps[0]
        if any(_refl(x) for x in ps):
            keep = [x for x in ps if not _refl(x)]
            return "trim-trans", trans(keep or [ps[0]])
        if any(x.rule == "trans" for x in ps):
            flat = []
            for x in ps:
                flat.extend(x.premises if x.rule == "trans" else (x,))
            return "flatten-trans", trans(flat)
        for i in range(1, len(ps)):
            a, b = ps[i - 1], ps[i]
            if a.rule == "cons" and b.rule == "cons":
                merged = cons(
                    a.conclusion.left,
                    trans((a.premises[0], b.premises[0])),
                    trans((a.premises[1], b.premises[1])),
                )
                return "merge-cons", trans(ps[: i - 1] + (merged,) + ps[i + 1 :])
    if r == "proj":
        j, q = p.index, p.premises[0]
        if q.rule == "cons":
            return "proj-cons", q.premises[j]
        if q.rule == "trans":
            ps = q.premises
            for i, x in enumerate(ps):
                if x.rule != "cons":
                    continue
                parts = []
                if i > 0:
                    pre = trans(ps[:i])
                    side = proj_side(T, pre.conclusion.left, pre.conclusion.right)
                    if side is None:
                        break
                    parts.append(proj(j, pre, side))
                parts.append(x.premises[j])
                if i < len(ps) - 1:
                    suf = trans(ps[i + 1 :])
                    side = proj_side(T, suf.conclusion.left, suf.conclusion.right)
                    if side is None:
                        break
                    parts.append(proj(j, suf, side))
                return "proj-trans", trans(parts)
    if r == "int":
        ps = p.premises
        if any(x.rule == "int" for x in ps):
            flat = []
            for x in ps:
                flat.extend(x.premises if x.rule == "int" else (x,))
            return "flatten-int", EqProof("int", p.conclusion, tuple(flat))
        for x in ps:
            if x.rule == "wk" and x.premises[0].conclusion.right in p.conclusion.items:
                return "int-wk", EqProof("wk", p.conclusion, x.premises)
        if len(ps) == 1 and ps[0].conclusion == p.conclusion:
            return "flatten-int", ps[0]
    return None


def _rewrite_once(p: EqProof, rule, T) -> Optional[tuple[str, EqProof]]:
    hit = rule(p, T)
    if hit is not None:
        return hit
    for i, q in enumerate(p.premises):
        hit = _rewrite_once(q, rule, T)
        if hit is not None:
            name, new = hit
            ps = p.premises[:i] + (new,) + p.premises[i + 1 :]
            return name, EqProof(p.rule, p.conclusion, ps, p.side, p.index)
    return None


def _normalize_sides(p: EqProof) -> EqProof:
    ps = tuple(_normalize_sides(q) for q in p.premises)
    side = tuple(normalize_dy(s) for s in p.side)
    if ps == p.premises and side == p.side:
        return p
    return EqProof(p.rule, p.conclusion, ps, side, p.index)


@dataclass
class NormalizationLog:
    steps: list = field(default_factory=list)  # (rule, measure before, measure after)

    def non_sym_steps_decrease(self) -> bool:
        return all(after < before for rule, before, after in self.steps if rule not in SYM_RULES)


def normalize(p: EqProof, T: Iterable[Term], max_steps: int = 10**6, log: Optional[NormalizationLog] = None) -> EqProof:
    """Rewrite ``p`` into a normal proof of the same conclusion.

    ``T`` is the term set of the context; it supplies the side derivations that
    new projection steps need.
    """
    T = frozenset(T)
    steps = 0

    def record(rule: str, old: EqProof, new: EqProof) -> None:
        if log is not None:
            log.steps.append((rule, measure(old), measure(new)))

    new = _normalize_sides(p)
    if new is not p:
        record("normalize-side", p, new)
        p = new
    for rule in (_sym_rules, _rest):
        while True:
            hit = _rewrite_once(p, rule, T)
            if hit is None:
                break
            steps += 1
            if steps > max_steps:
                raise BoundExceeded(f"normalization exceeded {max_steps} steps")
            name, new = hit
            record(name, p, new)
            p = new
    return p


# -- normality ------------------------------------------------------------------------

CLAUSES = {
    "C1": "every Dolev-Yao subproof is normal",
    "C2": "a symmetry step only follows an axiom or a promotion",
    "C3": "a reflexivity step rests on an axiom or a destructor",
    "C4": "no transitivity premise is reflexive",
    "C5": "no transitivity premise is itself a transitivity step",
    "C6": "adjacent transitivity premises are not both congruence steps",
    "C7": "no projection subproof contains a congruence step",
    "C8": "no intersection premise is an intersection or a weakening",
}


def _has_cons(p: EqProof) -> bool:
    return any(q.rule == "cons" for q in p.nodes())


def is_normal(p: EqProof) -> list[str]:
    """Violated normality clauses (empty when ``p`` is normal)."""
    bad: set = set()
    for q in p.nodes():
        if any(not is_normal_dy(s) for s in q.side):
            bad.add("C1")
        if q.rule == "sym" and q.premises[0].rule not in ("ax", "prom"):
            bad.add("C2")
        if q.rule == "eq" and q.side[0].rule in CONSTRUCTORS:
            bad.add("C3")
        if q.rule == "trans":
            if any(_refl(x) for x in q.premises):
                bad.add("C4")
            if any(x.rule == "trans" for x in q.premises):
                bad.add("C5")
            if any(a.rule == "cons" and b.rule == "cons" for a, b in zip(q.premises, q.premises[1:])):
                bad.add("C6")
        if q.rule == "proj" and _has_cons(q.premises[0]):
            bad.add("C7")
        if q.rule == "int" and any(x.rule in ("int", "wk") for x in q.premises):
            bad.add("C8")
    return sorted(bad)


# -- subterm property -------------------------------------------------------------------


def _atom_terms(a: Assertion) -> list:
    if isinstance(a, (Eq, Member, Pred, Says)):
        return list(term_occurrences(a))
    return []


def proof_terms(p: EqProof) -> set:
    out: set = set()
    for q in p.nodes():
        out.update(_atom_terms(q.conclusion))
        for s in q.side:
            out |= s.terms()
    return out


def proof_lists(p: EqProof) -> set:
    return {q.conclusion.items for q in p.nodes() if isinstance(q.conclusion, Member)}


def check_subterm_property(p: EqProof, T: Iterable[Term], E: Iterable[Assertion]) -> bool:
    """Terms and lists of ``p`` stay inside the subterms of context and conclusion."""
    T, E = set(T), list(E)
    goal = p.conclusion
    base = subterms_of(T) | st_all(E)
    allowed = base if not _has_cons(p) else base | st_all([goal])
    if not proof_terms(p) <= allowed:
        return False
    lists = set()
    for a in E + [goal]:
        lists |= lists_of(a)
    return all(l in lists or len(l) == 1 for l in proof_lists(p))
