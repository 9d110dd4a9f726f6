"""Deciding equality derivations by saturating a finite universe of atoms.

Derivable equalities over the universe form an equivalence relation on the
"active" terms (derivable terms plus those mentioned by the context), closed
under congruence and under projection when all four components are derivable.
The engine keeps equivalence classes in a union-find structure and records
every merge as a forest edge with its justification; proofs are read back from
forest paths, so each justification only refers to merges made before it.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional

from . import eqproof as P
from .assertions import ATOMIC, Assertion, Eq, Member, Pred, Says, canonical, lists_of, render, st_all, subformulas
from .dy import analysis
from .errors import MalformedAtom
from .terms import Enc, Name, Pair, Term, Var, inverse, is_atomic, same_constructor, subterms_of, term_key


@dataclass(frozen=True)
class Edge:
    a: Term
    b: Term
    reason: tuple
    time: int


class Saturation:
    """Saturated state for a pure context ``(T; E)`` and a set of goal atoms."""

    def __init__(self, T: Iterable[Term], E: Iterable[Assertion], goals: Iterable[Assertion] = ()):
        self.T = frozenset(T)
        self.E = frozenset(E)
        self.says = {canonical(a) for a in self.E if isinstance(a, Says)}  # received says atoms, up to renaming
        for a in self.E:
            if not isinstance(a, ATOMIC):
                raise MalformedAtom(f"context atom expected, got {render(a)}")
        goals = list(goals)
        self.an = analysis(self.T)
        zs = subterms_of(self.T) | st_all(self.E) | st_all(goals)
        self.Z = sorted(zs, key=term_key)
        self.lists = set()
        for a in list(self.E) + goals:
            self.lists |= lists_of(a)
        self.lists |= {(n,) for n in self.Z if isinstance(n, Name)}
        self.parent = {t: t for t in self.Z}
        self.members = {t: [t] for t in self.Z}
        self.adj: dict = defaultdict(list)
        self.edges: list[Edge] = []
        self.active = {t for t in self.Z if self.an.derives(t)}
        self.mem_atoms = sorted((a for a in self.E if isinstance(a, Member)), key=render)
        self._explained: dict = {}
        self.iterations = 0
        self._run()

    # union-find
    def find(self, t: Term) -> Term:
        while self.parent[t] is not t:
            self.parent[t] = self.parent[self.parent[t]]
            t = self.parent[t]
        return t

    def same(self, a: Term, b: Term) -> bool:
        return a in self.parent and b in self.parent and self.find(a) is self.find(b)

    def _union(self, a: Term, b: Term, reason: tuple) -> bool:
        ra, rb = self.find(a), self.find(b)
        self.active.add(a)
        self.active.add(b)
        if ra is rb:
            return False
        if len(self.members[ra]) < len(self.members[rb]):
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.members[ra].extend(self.members.pop(rb))
        e = Edge(a, b, reason, len(self.edges))
        self.edges.append(e)
        self.adj[a].append((b, e))
        self.adj[b].append((a, e))
        return True

    def related(self, a: Term, b: Term) -> bool:
        return a in self.active and b in self.active and self.same(a, b)

    # saturation
    def _run(self) -> None:
        for a in sorted((a for a in self.E if isinstance(a, Eq)), key=render):
            self._union(a.left, a.right, ("ax", a))
        comps = [t for t in self.Z if not is_atomic(t)]
        while True:
            self.iterations += 1
            changed = False
            for i, r in enumerate(comps):
                for s in comps[i + 1 :]:
                    if not same_constructor(r, s) or self.same(r, s):
                        continue
                    if self.related(r.children[0], s.children[0]) and self.related(r.children[1], s.children[1]):
                        changed |= self._union(r, s, ("cons",))
            for root in sorted({self.find(t) for t in comps}, key=term_key):
                if root not in self.members:  # merged earlier in this pass
                    continue
                cls = [t for t in sorted(self.members[root], key=term_key) if not is_atomic(t)]
                if len(cls) < 2:
                    continue
                for i, r in enumerate(cls):
                    if not all(self.an.derives(c) for c in r.children):
                        continue
                    for s in cls[i + 1 :]:
                        if not same_constructor(r, s) or not all(self.an.derives(c) for c in s.children):
                            continue
                        for j in (0, 1):
                            if not self.same(r.children[j], s.children[j]):
                                changed |= self._union(r.children[j], s.children[j], ("proj", j, r, s))
            if self.mem_atoms:
                changed |= self._promote()
            if not changed:
                break

    def _member_family(self, t: Term, l: tuple) -> Optional[list]:
        """Premises whose intersection is exactly ``l`` for ``t``, or ``None``."""
        want = set(l)
        fam = []
        for a in self.mem_atoms:
            s = a.subject
            if (s is t or self.related(s, t)) and want <= set(a.items):
                fam.append(("ax", a))
        if t in self.active and t in self.parent:
            names = [n for n in self.members[self.find(t)] if isinstance(n, Name) and n in self.active]
            for m in sorted(self.lists):
                if want <= set(m):
                    for n in names:
                        if n in m:
                            fam.append(("wk", n, m))
                            break
        if not fam:
            return None
        common = None
        for f in fam:
            items = set(f[1].items) if f[0] == "ax" else set(f[2])
            common = items if common is None else common & items
        if common != want:
            return None
        for f in fam:  # a single premise that already matches is enough
            items = f[1].items if f[0] == "ax" else f[2]
            if set(items) == want:
                return [f]
        return fam

    def _subjects(self) -> list:
        subs = {a.subject for a in self.mem_atoms if a.subject in self.parent}
        return sorted(subs, key=term_key)

    def _promote(self) -> bool:
        changed = False
        for t in self._subjects():
            for n in sorted({m for l in self.lists for m in l if m in self.parent}, key=term_key):
                if self.same(t, n) and t in self.active and n in self.active:
                    continue
                fam = self._member_family(t, (n,))
                if fam is not None:
                    changed |= self._union(t, n, ("prom", t, n, tuple(fam)))
        return changed

    # queries
    def derives(self, a: Assertion) -> bool:
        if isinstance(a, Eq):
            return self.related(a.left, a.right)
        if isinstance(a, Member):
            return a in self.E or (a.subject in self.parent and self._member_family(a.subject, a.items) is not None)
        if isinstance(a, Pred):
            return a in self.E
        if isinstance(a, Says):
            if a in self.E or canonical(a) in self.says:
                return True
            k = inverse(a.key)
            return isinstance(a.body, ATOMIC) and k is not None and self.an.derives(k) and self.derives(a.body)
        raise MalformedAtom(f"atom expected, got {render(a)}")

    def derived_atoms(self) -> set:
        """All derivable equalities over the universe, plus memberships of subjects."""
        out = set()
        for root, ms in self.members.items():
            act = [t for t in ms if t in self.active]
            for a in act:
                for b in act:
                    out.add(Eq(a, b))
        for t in self.Z:
            if is_atomic(t):
                for l in self.lists:
                    if self._member_family(t, l) is not None:
                        out.add(Member(t, l))
        return out

    # proofs
    def _path(self, a: Term, b: Term) -> list:
        prev = {a: None}
        todo = [a]
        while todo:
            u = todo.pop()
            if u is b:
                break
            for v, e in self.adj[u]:
                if v not in prev:
                    prev[v] = (u, e)
                    todo.append(v)
        hops = []
        v = b
        while prev[v] is not None:
            u, e = prev[v]
            hops.append((u, v, e))
            v = u
        return hops[::-1]

    def explain(self, a: Term, b: Term) -> P.EqProof:
        key = (a, b)
        hit = self._explained.get(key)
        if hit is not None:
            return hit
        if a is b:
            dp = self.an.proof(a)
            if dp is not None:
                out = P.eq_rule(dp)
            else:
                v, _ = self.adj[a][0]
                there = self.explain(a, v)
                out = P.trans((there, P.sym(there)))
        else:
            out = P.trans([self._hop(u, v, e) for u, v, e in self._path(a, b)])
        self._explained[key] = out
        return out

    def _hop(self, u: Term, v: Term, e: Edge) -> P.EqProof:
        kind = e.reason[0]
        if kind == "ax":
            p = P.ax(e.reason[1])
            return p if (u, v) == (e.a, e.b) else P.sym(p)
        if kind == "cons":
            return P.cons(u, self.explain(u.children[0], v.children[0]), self.explain(u.children[1], v.children[1]))
        if kind == "proj":
            _, j, r, s = e.reason
            if u is not r.children[j] or v is not s.children[j]:
                r, s = s, r
            return P.proj(j, self.explain(r, s), P.proj_side(self.T, r, s))
        _, t, n, fam = e.reason
        p = P.EqProof("prom", Eq(t, n), (self._member_proof(t, (n,), fam),))
        return p if (u, v) == (t, n) else P.sym(p)

    def _member_proof(self, t: Term, l: tuple, fam: Iterable) -> P.EqProof:
        prems = []
        for f in fam:
            if f[0] == "ax":
                a = f[1]
                p = P.ax(a)
                if a.subject is not t:
                    p = P.EqProof("subst", Member(t, a.items), (p, self.explain(a.subject, t)))
                prems.append(p)
            else:
                _, n, m = f
                prems.append(P.EqProof("wk", Member(t, m), (self.explain(t, n),)))
        if len(prems) == 1:
            return prems[0]
        return P.EqProof("int", Member(t, l), tuple(prems))

    def proof(self, a: Assertion) -> Optional[P.EqProof]:
        if not self.derives(a):
            return None
        if isinstance(a, Eq):
            return self.explain(a.left, a.right)
        if a in self.E or (isinstance(a, Says) and canonical(a) in self.says):
            return P.ax(a)
        if isinstance(a, Member):
            return self._member_proof(a.subject, a.items, self._member_family(a.subject, a.items))
        body = self.proof(a.body)
        return P.EqProof("say", a, (body,), (self.an.proof(inverse(a.key)),))

    def trace(self) -> list[dict]:
        out = []
        for e in self.edges:
            r = e.reason
            if r[0] == "ax":
                why = {"rule": "ax", "premises": [render(r[1])]}
            elif r[0] == "cons":
                why = {
                    "rule": "cons",
                    "premises": [render(Eq(x, y)) for x, y in zip(e.a.children, e.b.children)],
                }
            elif r[0] == "proj":
                why = {"rule": f"proj{r[1]}", "premises": [render(Eq(r[2], r[3]))]}
            else:
                why = {"rule": "prom", "premises": [render(Member(r[1], (r[2],)))]}
            out.append({"atom": render(Eq(e.a, e.b)), **why})
        return out


def saturate(T: Iterable[Term], E: Iterable[Assertion], goals: Iterable[Assertion] = ()) -> Saturation:
    return Saturation(T, E, goals)


def eq_derives(T: Iterable[Term], E: Iterable[Assertion], goal: Assertion) -> Optional[P.EqProof]:
    """A proof of the atomic ``goal`` from the pure context ``(T; E)``, or ``None``."""
    if not isinstance(goal, ATOMIC):
        raise MalformedAtom(f"equality derivations conclude atoms, got {render(goal)}")
    return Saturation(T, E, [goal]).proof(goal)
