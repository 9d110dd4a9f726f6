"""Dolev-Yao derivability with normal proof objects."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

from .errors import InvalidProof
from .terms import Enc, Name, Pair, Term, Var, inverse, subterms_of

CONSTRUCTORS = ("pair", "enc")
DESTRUCTORS = ("fst", "snd", "dec")


@dataclass(frozen=True)
class DyProof:
    rule: str
    conclusion: Term
    premises: tuple["DyProof", ...] = ()

    @property
    def size(self) -> int:
        return 1 + sum(p.size for p in self.premises)

    def terms(self) -> set:
        out = {self.conclusion}
        for p in self.premises:
            out |= p.terms()
        return out

    def to_json(self) -> dict:
        return {
            "rule": self.rule,
            "conclusion": str(self.conclusion),
            "premises": [p.to_json() for p in self.premises],
        }


class Analysis:
    """Closure of a term set under destructors, with synthesis on top."""

    def __init__(self, axioms: Iterable[Term]):
        self.axioms = frozenset(axioms)
        self.closure: dict[Term, DyProof] = {}
        self._synth: dict[Term, Optional[DyProof]] = {}
        pending: dict[Name, list[Enc]] = {}
        work = sorted(self.axioms, key=str)
        for t in work:
            self.closure.setdefault(t, DyProof("ax", t))
        i = 0
        while i < len(work):
            u = work[i]
            i += 1
            pu = self.closure[u]
            new: list[tuple[Term, DyProof]] = []
            if isinstance(u, Pair):
                new.append((u.left, DyProof("fst", u.left, (pu,))))
                new.append((u.right, DyProof("snd", u.right, (pu,))))
            elif isinstance(u, Enc):
                k = inverse(u.key)
                if k is not None:
                    if k in self.closure:
                        new.append((u.payload, DyProof("dec", u.payload, (pu, self.closure[k]))))
                    else:
                        pending.setdefault(k, []).append(u)
            if isinstance(u, Name) and u in pending:
                for e in pending.pop(u):
                    new.append((e.payload, DyProof("dec", e.payload, (self.closure[e], pu))))
            for t, p in new:
                if t not in self.closure:
                    self.closure[t] = p
                    work.append(t)

    def proof(self, t: Term) -> Optional[DyProof]:
        p = self.closure.get(t)
        if p is not None:
            return p
        if t in self._synth:
            return self._synth[t]
        out = None
        if isinstance(t, (Pair, Enc)):
            a, b = t.children
            pa = self.proof(a)
            if pa is not None:
                pb = self.proof(b)
                if pb is not None:
                    out = DyProof("pair" if isinstance(t, Pair) else "enc", t, (pa, pb))
        self._synth[t] = out
        return out

    def derives(self, t: Term) -> bool:
        return self.proof(t) is not None


@lru_cache(maxsize=8192)
def analysis(axioms: frozenset) -> Analysis:
    return Analysis(axioms)


def dy_derives(X: Iterable[Term], t: Term) -> Optional[DyProof]:
    """A normal proof of ``X |- t``, or ``None`` when ``t`` is not derivable."""
    X = X if isinstance(X, frozenset) else frozenset(X)
    return analysis(X).proof(t)


def derivable(X: Iterable[Term], t: Term) -> bool:
    return dy_derives(X, t) is not None


def check_dy_proof(p: DyProof, X: Iterable[Term]) -> None:
    """Raise :class:`InvalidProof` unless ``p`` is a well-formed proof from ``X``."""
    X = frozenset(X)
    c, ps = p.conclusion, p.premises
    for q in ps:
        check_dy_proof(q, X)
    cs = [q.conclusion for q in ps]
    ok = False
    if p.rule == "ax":
        ok = not ps and c in X
    elif p.rule == "pair":
        ok = len(ps) == 2 and isinstance(c, Pair) and (c.left, c.right) == tuple(cs)
    elif p.rule == "enc":
        ok = len(ps) == 2 and isinstance(c, Enc) and (c.payload, c.key) == tuple(cs)
    elif p.rule in ("fst", "snd"):
        ok = len(ps) == 1 and isinstance(cs[0], Pair) and cs[0].children[p.rule == "snd"] is c
    elif p.rule == "dec":
        ok = (
            len(ps) == 2
            and isinstance(cs[0], Enc)
            and cs[0].payload is c
            and inverse(cs[0].key) is not None
            and inverse(cs[0].key) is cs[1]
        )
    if not ok:
        raise InvalidProof(f"bad {p.rule} step concluding {c}")


def is_normal_dy(p: DyProof) -> bool:
    """No constructor conclusion is the major premise of a destructor."""
    if p.rule in DESTRUCTORS and p.premises[0].rule in CONSTRUCTORS:
        return False
    return all(is_normal_dy(q) for q in p.premises)


def normalize_dy(p: DyProof) -> DyProof:
    """Remove constructor/destructor detours; strictly shrinks non-normal proofs."""
    ps = tuple(normalize_dy(q) for q in p.premises)
    if p.rule in DESTRUCTORS and ps[0].rule in CONSTRUCTORS:
        major = ps[0]
        return major.premises[1] if p.rule == "snd" else major.premises[0]
    if ps == p.premises:
        return p
    return DyProof(p.rule, p.conclusion, ps)


def dy_terms_within(p: DyProof, X: Iterable[Term], goal: Term) -> bool:
    """Subterm property of normal proofs."""
    allowed = subterms_of(X)
    if p.rule not in DESTRUCTORS and p.rule != "ax":
        allowed |= subterms_of([goal])
    return p.terms() <= allowed


__all__ = [
    "DyProof",
    "Analysis",
    "analysis",
    "dy_derives",
    "derivable",
    "check_dy_proof",
    "is_normal_dy",
    "normalize_dy",
    "dy_terms_within",
]
