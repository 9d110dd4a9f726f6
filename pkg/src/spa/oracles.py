"""Brute-force reference deciders.

These share only the term and assertion data types with the engine.  Every
closure here is a naive fixpoint over an explicitly enumerated universe, so
agreement with the engine is meaningful evidence rather than a tautology.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

from .assertions import (
    And,
    Assertion,
    Eq,
    Exists,
    Member,
    Pred,
    Says,
    abstractable_positions,
    all_vars,
    canonical,
    bound_vars,
    consistent,
    kernel,
    lists_of,
    separate_bound,
    st,
    st_all,
    subformulas,
    subst,
    var_positions,
)
from .errors import BoundExceeded, SortError
from .terms import Enc, Name, Pair, Term, Var, dagsize, inverse, subterms_of, term_key


@dataclass(frozen=True)
class OracleConfig:
    max_proof_depth: int = 10_000
    max_term_dagsize: int = 64
    instance_seed: int = 0
    instance_count: int = 100
    max_universe: int = 60
    max_candidates: int = 400

    def __post_init__(self):
        for f in ("max_proof_depth", "max_term_dagsize", "instance_count", "max_universe", "max_candidates"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be positive")


DEFAULT = OracleConfig()


# -- Dolev-Yao ----------------------------------------------------------------------


def dy_closure(X: Iterable[Term], universe: Iterable[Term], cfg: OracleConfig = DEFAULT) -> frozenset:
    """Everything derivable from ``X`` that lies in ``universe``."""
    U = set(universe)
    known = set(X)
    for _ in range(cfg.max_proof_depth):
        new = set()
        for t in known:
            if isinstance(t, Pair):
                new.update(t.children)
            elif isinstance(t, Enc):
                k = inverse(t.key) if isinstance(t.key, Name) else None
                if k is not None and k in known:
                    new.add(t.payload)
        for u in U:
            if isinstance(u, (Pair, Enc)) and u.children[0] in known and u.children[1] in known:
                new.add(u)
        new -= known
        if not new:
            return frozenset(known)
        known |= new
    raise BoundExceeded("Dolev-Yao closure did not converge within the round bound")


def brute_dy(X: Iterable[Term], t: Term, cfg: OracleConfig = DEFAULT) -> bool:
    X = set(X)
    U = subterms_of(X | {t})
    U |= {inverse(k) for k in U if isinstance(k, Name) and k.is_key}
    if len(U) > cfg.max_universe:
        raise BoundExceeded(f"universe of {len(U)} terms exceeds {cfg.max_universe}")
    return t in dy_closure(X, U, cfg)


# -- equality derivations -----------------------------------------------------------


class EqClosure:
    """All derivable equality and membership atoms over a finite universe."""

    def __init__(self, T: Iterable[Term], E: Iterable[Assertion], goals: Iterable[Assertion] = (), cfg: OracleConfig = DEFAULT):
        self.T = frozenset(T)
        self.E = frozenset(E)
        goals = list(goals)
        self.Z = frozenset(subterms_of(self.T) | st_all(self.E) | st_all(goals))
        if len(self.Z) > cfg.max_universe:
            raise BoundExceeded(f"universe of {len(self.Z)} terms exceeds {cfg.max_universe}")
        U = set(self.Z) | {inverse(k) for k in self.Z if isinstance(k, Name) and k.is_key}
        self.dy = dy_closure(self.T, U, cfg)
        base = set()
        for a in list(self.E) + goals:
            base |= {frozenset(l) for l in lists_of(a)}
        base |= {frozenset([n]) for n in self.Z if isinstance(n, Name)}
        self.L = self._intersections(base)
        self.eqs: set = set()
        self.mems: set = set()
        self.says = {canonical(a) for a in self.E if isinstance(a, Says)}
        self._fix(cfg)

    @staticmethod
    def _intersections(base: set) -> set:
        out = set(base)
        while True:
            new = {a & b for a in out for b in out if a & b} - out
            if not new:
                return out
            out |= new

    def _fix(self, cfg: OracleConfig) -> None:
        eqs, mems = self.eqs, self.mems
        for a in self.E:
            if isinstance(a, Eq):
                eqs.add((a.left, a.right))
            elif isinstance(a, Member):
                mems.add((a.subject, frozenset(a.items)))
        eqs |= {(t, t) for t in self.Z if t in self.dy}
        comps = [t for t in self.Z if isinstance(t, (Pair, Enc))]
        for _ in range(cfg.max_proof_depth):
            new_e, new_m = set(), set()
            for a, b in eqs:
                new_e.add((b, a))
                for c, d in eqs:
                    if c is b:
                        new_e.add((a, d))
                if type(a) is type(b) and isinstance(a, (Pair, Enc)):
                    if all(c in self.dy for c in a.children + b.children):
                        new_e.add((a.children[0], b.children[0]))
                        new_e.add((a.children[1], b.children[1]))
                if isinstance(b, Name):
                    for l in self.L:
                        if b in l:
                            new_m.add((a, l))
            for r in comps:
                for s in comps:
                    if type(r) is type(s) and (r.children[0], s.children[0]) in eqs and (r.children[1], s.children[1]) in eqs:
                        new_e.add((r, s))
            for t, l in mems:
                for u, l2 in mems:
                    if u is t and l & l2:
                        new_m.add((t, l & l2))
                for a, b in eqs:
                    if a is t:
                        new_m.add((b, l))
                if len(l) == 1:
                    new_e.add((t, next(iter(l))))
            new_e -= eqs
            new_m -= mems
            if not new_e and not new_m:
                return
            eqs |= new_e
            mems |= new_m
        raise BoundExceeded("equality closure did not converge within the round bound")

    def derives(self, a: Assertion) -> bool:
        if isinstance(a, Eq):
            return (a.left, a.right) in self.eqs
        if isinstance(a, Member):
            return (a.subject, frozenset(a.items)) in self.mems
        if isinstance(a, Pred):
            return a in self.E
        if isinstance(a, Says):
            if canonical(a) in self.says:
                return True
            k = inverse(a.key) if isinstance(a.key, Name) else None
            return k is not None and k in self.dy and isinstance(a.body, (Eq, Member, Pred, Says)) and self.derives(a.body)
        raise SortError("atomic assertion expected")


def brute_eq(T: Iterable[Term], E: Iterable[Assertion], goal: Assertion, cfg: OracleConfig = DEFAULT) -> bool:
    return EqClosure(T, E, [goal], cfg).derives(goal)


# -- witnesses ----------------------------------------------------------------------


def _binders(goal: Assertion) -> list:
    out = []
    for f in subformulas(goal):
        if isinstance(f, Exists) and f.var not in out:
            out.append(f.var)
    return out


def _open(a: Assertion) -> Assertion:
    if isinstance(a, Exists):
        return _open(a.body)
    if isinstance(a, And):
        return And(_open(a.left), _open(a.right))
    if isinstance(a, Says):
        return Says(a.key, _open(a.body))
    return a


def _leaves(a: Assertion) -> list:
    if isinstance(a, And):
        return _leaves(a.left) + _leaves(a.right)
    if isinstance(a, Says):
        return [a] + _leaves(a.body)
    return [a]


def _intro(cl: EqClosure, a: Assertion, nu: dict) -> bool:
    """Introduction-only derivation; binders are opened with ``nu`` on the way down."""
    if isinstance(a, Exists):
        return _intro(cl, subst(a.body, {a.var: nu[a.var]}), nu)
    if isinstance(a, And):
        return _intro(cl, a.left, nu) and _intro(cl, a.right, nu)
    if isinstance(a, Says):
        if cl.derives(a):
            return True
        k = inverse(a.key) if isinstance(a.key, Name) else None
        return k is not None and k in cl.dy and _intro(cl, a.body, nu)
    return cl.derives(a)


def witness_pool(T: frozenset, base: Iterable[Term], cap: int, limit: int, cfg: OracleConfig = DEFAULT) -> tuple[list, bool]:
    """Derivable candidates: base terms closed under pairing and encryption.

    Layers are added while the pool stays within ``limit``; the flag reports
    whether the closure up to ``cap`` was reached.
    """
    U = set(base) | subterms_of(T)
    U |= {inverse(k) for k in U if isinstance(k, Name) and k.is_key}
    known = dy_closure(T, U, cfg)
    pool = {t for t in base if t in known and dagsize(t) <= cap}
    keys = sorted((k for k in known if isinstance(k, Name) and k.is_key), key=term_key)
    while True:
        cur = sorted(pool, key=term_key)
        layer: set = set()
        for a in cur:
            made = [Enc(a, k) for k in keys] + [p for b in cur for p in (Pair(a, b),)]
            layer.update(t for t in made if dagsize(t) <= cap and t not in pool)
            if len(pool) + len(layer) > limit:
                return cur, False
        if not layer:
            return cur, True
        pool |= layer


def _must(a: Assertion) -> list:
    if isinstance(a, Eq):
        return [a]
    if isinstance(a, And):
        return _must(a.left) + _must(a.right)
    return []


def brute_witness(
    S: Iterable[Term],
    A: Iterable[Assertion],
    goal: Assertion,
    size_cap: Optional[int] = None,
    cfg: OracleConfig = DEFAULT,
    max_assignments: int = 3_000,
) -> Optional[dict]:
    """First joint assignment of the goal's binders satisfying every witness condition.

    The default cap is twice the context bound.  Candidates are the derivable
    subterms of the query closed under constructors, as far as the assignment
    budget allows.
    """
    S, A = frozenset(S), list(A)
    goal_bv = bound_vars(goal)
    A = separate_bound(A, avoid=goal_bv | all_vars(goal))
    K = kernel(S, A)
    T = K.terms
    xs = _binders(goal)
    M = len(subterms_of(S) | st_all(list(A) + [goal]))
    cap = size_cap if size_cap is not None else 2 * M
    TB = frozenset(T) | goal_bv
    for f in subformulas(goal):
        if isinstance(f, Exists) and not var_positions(f.var, f.body) <= abstractable_positions(TB, f.body):
            return None
    body = _open(goal)
    if not xs:
        return {} if _intro(EqClosure(T, K.atoms, _leaves(body), cfg), goal, {}) else None
    base = [t for t in subterms_of(T) | st_all(K.atoms) | st(goal) if t not in set(xs)]
    limit = max(2, int(max_assignments ** (1.0 / len(xs))))
    pool, _ = witness_pool(T, base, cap, limit, cfg)
    must = _must(body)
    prune = consistent(list(K.atoms)) is not None  # an inconsistent context rules nothing out
    for combo in itertools.product(pool, repeat=len(xs)):
        nu = dict(zip(xs, combo))
        try:
            inst = subst(body, nu)
            if prune and consistent(list(K.atoms) + [subst(a, nu) for a in must]) is None:
                continue
        except SortError:
            continue
        try:
            if _intro(EqClosure(T, K.atoms, _leaves(inst), cfg), goal, nu):
                return nu
        except SortError:
            continue
    return None
