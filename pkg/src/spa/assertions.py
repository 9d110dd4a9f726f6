"""Assertions over terms: syntax, public parts, abstractable positions, kernels.

Assertion positions use one numbering for both modes.  Equality sides and
conjuncts are children 0 and 1, an existential body is child 0, a ``says``
formula has its key at 0 and its body at 1, predicate argument ``i`` sits at
position ``i`` (1-based) and a membership exposes its subject at 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union

from .dy import analysis
from .errors import Inconsistent, MalformedAtom, NotSanitized, SortError
from .terms import (
    KEY,
    QUANT,
    Enc,
    Name,
    Position,
    Term,
    Var,
    apply,
    is_atomic,
    positions_of,
    subterms,
    subterms_of,
    term_vars,
)


@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term


@dataclass(frozen=True)
class Member:
    """``subject`` is one of ``items``; items are kept sorted and unique."""

    subject: Term
    items: tuple

    def __post_init__(self):
        items = tuple(sorted(set(self.items), key=lambda n: n.id))
        if not items or not all(isinstance(n, Name) for n in items):
            raise SortError("membership lists are non-empty lists of names")
        object.__setattr__(self, "items", items)


@dataclass(frozen=True)
class Pred:
    symbol: str
    args: tuple


@dataclass(frozen=True)
class And:
    left: "Assertion"
    right: "Assertion"


@dataclass(frozen=True)
class Exists:
    var: Var
    body: "Assertion"

    def __post_init__(self):
        if not (isinstance(self.var, Var) and self.var.sort == QUANT):
            raise SortError(f"binder must be a quantification variable: {self.var}")


@dataclass(frozen=True)
class Says:
    key: Term
    body: "Assertion"


Assertion = Union[Eq, Member, Pred, And, Exists, Says]
ATOMIC = (Eq, Member, Pred, Says)


def exists(vs: Iterable[Var], body: Assertion) -> Assertion:
    for v in reversed(list(vs)):
        body = Exists(v, body)
    return body


def strip_exists(a: Assertion) -> tuple[list[Var], Assertion]:
    vs = []
    while isinstance(a, Exists):
        vs.append(a.var)
        a = a.body
    return vs, a


def is_core(a: Assertion) -> bool:
    return isinstance(strip_exists(a)[1], Eq)


# -- rendering ---------------------------------------------------------------


def render_term(t: Term, scope: frozenset = frozenset()) -> str:
    if isinstance(t, Var) and t in scope:
        return t.id
    if is_atomic(t) or not (term_vars(t) & scope):
        return str(t)
    from .terms import Pair

    a, b = t.children
    if isinstance(t, Pair):
        return f"({render_term(a, scope)}, {render_term(b, scope)})"
    return f"{{{render_term(a, scope)}}}{render_term(b, scope)}"


def render(a: Assertion, scope: frozenset = frozenset()) -> str:
    if isinstance(a, Eq):
        return f"{render_term(a.left, scope)} ~ {render_term(a.right, scope)}"
    if isinstance(a, Member):
        items = ", ".join(n.id for n in a.items)
        return f"member({render_term(a.subject, scope)}, [{items}])"
    if isinstance(a, Pred):
        return f"{a.symbol}({', '.join(render_term(u, scope) for u in a.args)})"
    if isinstance(a, And):
        return f"and({render(a.left, scope)}, {render(a.right, scope)})"
    if isinstance(a, Exists):
        vs, body = strip_exists(a)
        inner = scope | frozenset(vs)
        return f"exists {' '.join(v.id for v in vs)}. {render(body, inner)}"
    return f"says({render_term(a.key, scope)}, {render(a.body, scope)})"


def text(a: Assertion) -> str:
    return render(a)


def assertion_key(a: Assertion) -> str:
    return render(a)


# -- structure ---------------------------------------------------------------


def term_occurrences(a: Assertion) -> Iterator[Term]:
    """Every top-level term occurring in ``a``."""
    if isinstance(a, Eq):
        yield a.left
        yield a.right
    elif isinstance(a, Member):
        yield a.subject
        yield from a.items
    elif isinstance(a, Pred):
        yield from a.args
    elif isinstance(a, And):
        yield from term_occurrences(a.left)
        yield from term_occurrences(a.right)
    elif isinstance(a, Exists):
        yield a.var
        yield from term_occurrences(a.body)
    else:
        yield a.key
        yield from term_occurrences(a.body)


def st(a: Assertion) -> set:
    return subterms_of(term_occurrences(a))


def st_all(assertions: Iterable[Assertion]) -> set:
    out: set = set()
    for a in assertions:
        out |= st(a)
    return out


def bound_vars(a: Assertion) -> set:
    if isinstance(a, Exists):
        return {a.var} | bound_vars(a.body)
    if isinstance(a, (And,)):
        return bound_vars(a.left) | bound_vars(a.right)
    if isinstance(a, Says):
        return bound_vars(a.body)
    return set()


def free_vars(a: Assertion) -> set:
    if isinstance(a, Exists):
        return free_vars(a.body) - {a.var}
    if isinstance(a, And):
        return free_vars(a.left) | free_vars(a.right)
    if isinstance(a, Says):
        return set(term_vars(a.key)) | free_vars(a.body)
    out: set = set()
    for t in term_occurrences(a):
        out |= term_vars(t)
    return out


def all_vars(a: Assertion) -> set:
    out: set = set()
    for t in term_occurrences(a):
        out |= term_vars(t)
    return out


def subformulas(a: Assertion) -> Iterator[Assertion]:
    yield a
    if isinstance(a, And):
        yield from subformulas(a.left)
        yield from subformulas(a.right)
    elif isinstance(a, (Exists, Says)):
        yield from subformulas(a.body)


def atoms(a: Assertion) -> set:
    """Atomic pieces of a goal: what an introduction-only proof bottoms out in."""
    if isinstance(a, And):
        return atoms(a.left) | atoms(a.right)
    if isinstance(a, Exists):
        return atoms(a.body)
    if isinstance(a, Says):
        return {a} | atoms(a.body)
    return {a}


def lists_of(a: Assertion) -> set:
    return {f.items for f in subformulas(a) if isinstance(f, Member)}


def subst(a: Assertion, sub) -> Assertion:
    """Apply a substitution to the free variables of ``a``."""
    if not sub:
        return a
    if isinstance(a, Eq):
        return Eq(apply(a.left, sub), apply(a.right, sub))
    if isinstance(a, Member):
        return Member(apply(a.subject, sub), a.items)
    if isinstance(a, Pred):
        return Pred(a.symbol, tuple(apply(u, sub) for u in a.args))
    if isinstance(a, And):
        return And(subst(a.left, sub), subst(a.right, sub))
    if isinstance(a, Exists):
        inner = {x: t for x, t in sub.items() if x is not a.var}
        return Exists(a.var, subst(a.body, inner))
    return Says(apply(a.key, sub), subst(a.body, sub))


def rename_bound(a: Assertion, ren: dict) -> Assertion:
    """Rename binders (and their occurrences) according to ``ren``."""
    if isinstance(a, Exists):
        v = ren.get(a.var, a.var)
        return Exists(v, rename_bound(subst(a.body, {a.var: v}) if v is not a.var else a.body, ren))
    if isinstance(a, And):
        return And(rename_bound(a.left, ren), rename_bound(a.right, ren))
    if isinstance(a, Says):
        return Says(a.key, rename_bound(a.body, ren))
    return a


def canonical(a: Assertion, depth: int = 0) -> Assertion:
    """Representative of ``a`` up to renaming of bound variables.

    Binders are renamed by nesting depth to ids no parsed variable can have.
    """
    if isinstance(a, Exists):
        v = Var(f"%{depth}", QUANT)
        return Exists(v, canonical(subst(a.body, {a.var: v}), depth + 1))
    if isinstance(a, And):
        return And(canonical(a.left, depth), canonical(a.right, depth))
    if isinstance(a, Says):
        return Says(a.key, canonical(a.body, depth))
    return a


def alpha_equal(a: Assertion, b: Assertion) -> bool:
    return a == b or canonical(a) == canonical(b)


def freshen_bound(a: Assertion, avoid: set, tag: str = "") -> Assertion:
    """Alpha-rename every binder of ``a`` that clashes with ``avoid``."""
    ren = {}
    taken = {v.id for v in avoid} | {v.id for v in all_vars(a)}
    for v in sorted(bound_vars(a), key=lambda v: v.id):
        if v in avoid:
            n = 1
            while f"{v.id}{tag}_{n}" in taken:
                n += 1
            new = Var(f"{v.id}{tag}_{n}", QUANT)
            taken.add(new.id)
            ren[v] = new
    return rename_bound(a, ren) if ren else a


# -- positions ---------------------------------------------------------------


def assertion_positions(a: Assertion) -> list[Position]:
    from .terms import positions

    out: list[Position] = [()]
    if isinstance(a, Eq):
        for i, t in enumerate((a.left, a.right)):
            out.extend((i,) + p for p in positions(t))
    elif isinstance(a, Member):
        out.append((0,))
    elif isinstance(a, Pred):
        out.extend((i,) for i in range(1, len(a.args) + 1))
    elif isinstance(a, And):
        for i, b in enumerate((a.left, a.right)):
            out.extend((i,) + p for p in assertion_positions(b))
    elif isinstance(a, Exists):
        out.extend((0,) + p for p in assertion_positions(a.body))
    else:
        out.extend((0,) + p for p in positions(a.key))
        out.extend((1,) + p for p in assertion_positions(a.body))
    return out


def var_positions(x: Var, a: Assertion) -> set:
    """Positions of the variable ``x`` inside ``a``."""
    out: set = set()
    if isinstance(a, Eq):
        for i, t in enumerate((a.left, a.right)):
            out |= {(i,) + p for p in positions_of(x, t)}
    elif isinstance(a, Member):
        if a.subject is x:
            out.add((0,))
    elif isinstance(a, Pred):
        out |= {(i,) for i, u in enumerate(a.args, 1) if u is x}
    elif isinstance(a, And):
        for i, b in enumerate((a.left, a.right)):
            out |= {(i,) + p for p in var_positions(x, b)}
    elif isinstance(a, Exists):
        if a.var is not x:
            out |= {(0,) + p for p in var_positions(x, a.body)}
    else:
        out |= {(0,) + p for p in positions_of(x, a.key)}
        out |= {(1,) + p for p in var_positions(x, a.body)}
    return out


# -- public parts and abstractability -----------------------------------------


def _has_qvar(t: Term) -> bool:
    return any(v.sort == QUANT for v in term_vars(t))


def pubs(a: Assertion) -> set:
    """Maximal subterms of ``a`` free of quantification variables."""
    cands: set = set()

    def walk(t: Term) -> None:
        if not _has_qvar(t):
            cands.add(t)
        elif not is_atomic(t):
            for c in t.children:
                walk(c)

    for t in term_occurrences(a):
        walk(t)
    return {c for c in cands if not any(c is not d and c in subterms(d) for d in cands)}


def abstractable_positions_term(S: Iterable[Term], t: Term) -> set:
    """Positions ``p`` of ``t`` such that every sibling-or-ancestor of ``p`` is derivable."""
    an = analysis(frozenset(S))

    def go(u: Term) -> set:
        if not an.derives(u):
            return set()
        out = {()}
        if not is_atomic(u):
            a, b = u.children
            if an.derives(a) and an.derives(b):
                out |= {(0,) + p for p in go(a)}
                out |= {(1,) + p for p in go(b)}
        return out

    return go(t)


def abstractable_positions(S: Iterable[Term], a: Assertion, mode: str = "extended") -> set:
    S = frozenset(S)
    if mode == "core" and not is_core(a):
        raise SortError("core mode only admits existentially quantified equalities")
    if isinstance(a, Eq):
        out = set()
        for i, t in enumerate((a.left, a.right)):
            out |= {(i,) + p for p in abstractable_positions_term(S, t)}
        return out
    if isinstance(a, Pred):
        an = analysis(S)
        return {(i,) for i, u in enumerate(a.args, 1) if an.derives(u)}
    if isinstance(a, Member):
        return {(0,)}
    if isinstance(a, And):
        return {(0,) + p for p in abstractable_positions(S, a.left)} | {
            (1,) + p for p in abstractable_positions(S, a.right)
        }
    if isinstance(a, Exists):
        return {(0,) + p for p in abstractable_positions(S | {a.var}, a.body)}
    return {(0,)} | {(1,) + p for p in abstractable_positions(S, a.body)}


# -- knowledge pairs ------------------------------------------------------------


@dataclass(frozen=True)
class Kernel:
    """Bound variables promoted to terms, assertions flattened to atoms."""

    terms: frozenset
    atoms: frozenset

    def eqs(self) -> list[Eq]:
        return [a for a in self.atoms if isinstance(a, Eq)]


def check_sanitized(S: Iterable[Term], A: Iterable[Assertion]) -> None:
    S = set(S)
    for t in S:
        if _has_qvar(t):
            raise NotSanitized(f"term {t} contains a quantification variable")
    for a in A:
        bad = [v for v in free_vars(a) if v.sort == QUANT]
        if bad:
            raise NotSanitized(f"free quantification variable {bad[0]} in {text(a)}")
        missing = pubs(a) - S
        if missing:
            m = min(missing, key=str)
            raise NotSanitized(f"public part {m} of {text(a)} is not in the term set")


def separate_bound(A: Iterable[Assertion], avoid: Iterable[Var] = ()) -> list[Assertion]:
    """Rename binders so no two assertions (nor ``avoid``) share a bound variable."""
    used: set = set(avoid)
    out = []
    for a in A:
        b = freshen_bound(a, used)
        used |= bound_vars(b) | free_vars(b)
        out.append(b)
    return out


def kernel(S: Iterable[Term], A: Iterable[Assertion], check: bool = True) -> Kernel:
    S = frozenset(S)
    A = list(A)
    if check:
        check_sanitized(S, A)
    A = separate_bound(A, avoid=set().union(*(term_vars(t) for t in S)) if S else set())
    T = set(S)
    E = set()
    for a in A:
        T |= bound_vars(a)
        for f in subformulas(a):
            if isinstance(f, ATOMIC):
                E.add(f)
    return Kernel(frozenset(T), frozenset(E))


SINK = Name("_", KEY)  # a symmetric key, so it also fits key positions


def consistent(E: Iterable[Assertion]) -> Optional[dict]:
    """A ground substitution satisfying all equalities and memberships, or ``None``.

    Predicates and ``says`` atoms impose no constraint on terms and are ignored.
    """
    eqs, mems = [], []
    for a in E:
        if isinstance(a, Eq):
            eqs.append((a.left, a.right))
        elif isinstance(a, Member):
            mems.append(a)
        elif not isinstance(a, (Pred, Says)):
            raise MalformedAtom(f"not an atom: {text(a)}")
    mgu = unify_or_none(eqs)
    if mgu is None:
        return None
    allowed: dict = {}
    for m in mems:
        s = apply(m.subject, mgu)
        if isinstance(s, Name):
            if s not in m.items:
                return None
        elif isinstance(s, Var):
            cur = allowed.get(s, set(m.items))
            allowed[s] = cur & set(m.items)
            if not allowed[s]:
                return None
        else:
            return None
    vs: set = set()
    for l, r in eqs:
        vs |= term_vars(l) | term_vars(r)
    for m in mems:
        vs |= term_vars(m.subject)
    keyed = set()
    for l, r in eqs:
        for t in subterms(apply(l, mgu)) | subterms(apply(r, mgu)):
            if isinstance(t, Enc) and isinstance(t.key, Var):
                keyed.add(t.key)
    ground: dict = {}
    for v in sorted(vs - mgu.keys(), key=str):
        if v in allowed:
            opts = [n for n in allowed[v] if n.is_key or v not in keyed]
            if not opts:
                return None
            ground[v] = min(opts, key=lambda n: n.id)
        else:
            ground[v] = SINK
    witness = {v: apply(mgu.get(v, v), ground) for v in vs}
    return witness


def require_consistent(E: Iterable[Assertion]) -> dict:
    w = consistent(E)
    if w is None:
        raise Inconsistent("the equalities and memberships have no common solution")
    return w


def unify_or_none(eqs):
    from .terms import unify

    return unify(eqs)


def holds(a: Assertion, ground: dict) -> bool:
    """Truth of a quantifier-free atom under a ground substitution."""
    if isinstance(a, Eq):
        return apply(a.left, ground) is apply(a.right, ground)
    if isinstance(a, Member):
        return apply(a.subject, ground) in a.items
    return True
