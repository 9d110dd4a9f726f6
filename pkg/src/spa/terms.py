"""Hash-consed message terms, positions, substitution and unification.

Terms are interned: two structurally equal terms are the same Python object,
so equality and hashing are identity based and cheap.  Deterministic ordering
(for output and search) goes through :func:`term_key`.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Optional, Union

from .errors import InvalidPosition, SortError

PLAIN = "plain"
KEY = "key"
AGENT = "agent"

INST = "inst"
QUANT = "quant"

Position = tuple[int, ...]

_TABLE: dict[tuple, "Term"] = {}


class Term:
    __slots__ = ("_st", "_vars", "_text")

    def __repr__(self) -> str:
        return f"{type(self).__name__}<{self}>"

    def __str__(self) -> str:
        text = self._text
        if text is None:
            text = self._text = _render(self)
        return text

    def __lt__(self, other: "Term") -> bool:
        return term_key(self) < term_key(other)

    def __reduce__(self):
        raise TypeError("terms are interned and not picklable")


class Name(Term):
    """An atomic name.  Keys carry the id of their inverse key."""

    __slots__ = ("id", "kind", "inv")

    def __new__(cls, id: str, kind: str = PLAIN, inv: Optional[str] = None):
        if kind not in (PLAIN, KEY, AGENT):
            raise SortError(f"unknown name kind {kind!r}")
        if kind == KEY and inv is None:
            inv = id
        if kind != KEY and inv is not None:
            raise SortError(f"only keys have an inverse: {id}")
        k = ("N", id, kind, inv)
        hit = _TABLE.get(k)
        if hit is not None:
            return hit
        self = object.__new__(cls)
        self.id, self.kind, self.inv = id, kind, inv
        self._st = self._vars = self._text = None
        return _TABLE.setdefault(k, self)

    @property
    def is_key(self) -> bool:
        return self.kind == KEY


class Var(Term):
    """A variable of sort ``inst`` (instantiation) or ``quant`` (quantification)."""

    __slots__ = ("id", "sort")

    def __new__(cls, id: str, sort: str = INST):
        if sort not in (INST, QUANT):
            raise SortError(f"unknown variable sort {sort!r}")
        k = ("V", id, sort)
        hit = _TABLE.get(k)
        if hit is not None:
            return hit
        self = object.__new__(cls)
        self.id, self.sort = id, sort
        self._st = self._vars = self._text = None
        return _TABLE.setdefault(k, self)

    @property
    def quantified(self) -> bool:
        return self.sort == QUANT


class Pair(Term):
    __slots__ = ("left", "right")

    def __new__(cls, left: Term, right: Term):
        k = ("P", left, right)
        hit = _TABLE.get(k)
        if hit is not None:
            return hit
        self = object.__new__(cls)
        self.left, self.right = left, right
        self._st = self._vars = self._text = None
        return _TABLE.setdefault(k, self)

    @property
    def children(self) -> tuple[Term, Term]:
        return (self.left, self.right)


class Enc(Term):
    """Encryption of ``payload`` under ``key`` (a key name or a variable)."""

    __slots__ = ("payload", "key")

    def __new__(cls, payload: Term, key: Term):
        if not (isinstance(key, Var) or (isinstance(key, Name) and key.kind == KEY)):
            raise SortError(f"encryption key must be a key name or a variable, got {key}")
        k = ("E", payload, key)
        hit = _TABLE.get(k)
        if hit is not None:
            return hit
        self = object.__new__(cls)
        self.payload, self.key = payload, key
        self._st = self._vars = self._text = None
        return _TABLE.setdefault(k, self)

    @property
    def children(self) -> tuple[Term, Term]:
        return (self.payload, self.key)


Compound = Union[Pair, Enc]


def is_atomic(t: Term) -> bool:
    return isinstance(t, (Name, Var))


def rebuild(t: Compound, left: Term, right: Term) -> Term:
    """Same constructor as ``t`` applied to new children."""
    return Pair(left, right) if isinstance(t, Pair) else Enc(left, right)


def same_constructor(a: Term, b: Term) -> bool:
    return (isinstance(a, Pair) and isinstance(b, Pair)) or (
        isinstance(a, Enc) and isinstance(b, Enc)
    )


def inverse(k: Term) -> Optional[Name]:
    """Inverse of a key name; ``None`` for anything without a declared inverse."""
    if isinstance(k, Name) and k.kind == KEY:
        return Name(k.inv, KEY, k.id)
    return None


def _render(t: Term) -> str:
    if isinstance(t, Name):
        return t.id
    if isinstance(t, Var):
        return ("?" if t.sort == INST else "$") + t.id
    if isinstance(t, Pair):
        return f"({t.left}, {t.right})"
    return f"{{{t.payload}}}{t.key}"


def term_key(t: Term) -> tuple[int, str]:
    """Total order used wherever determinism matters: (dagsize, text)."""
    return (dagsize(t), str(t))


def subterms(t: Term) -> frozenset:
    st = t._st
    if st is None:
        if isinstance(t, (Name, Var)):
            st = frozenset((t,))
        else:
            a, b = t.children
            st = subterms(a) | subterms(b) | {t}
        t._st = st
    return st


def subterms_of(ts: Iterable[Term]) -> set:
    out: set = set()
    for t in ts:
        out |= subterms(t)
    return out


def dagsize(t: Term) -> int:
    return len(subterms(t))


def term_vars(t: Term) -> frozenset:
    vs = t._vars
    if vs is None:
        if isinstance(t, Var):
            vs = frozenset((t,))
        elif isinstance(t, Name):
            vs = frozenset()
        else:
            a, b = t.children
            vs = term_vars(a) | term_vars(b)
        t._vars = vs
    return vs


def is_ground(t: Term) -> bool:
    return not term_vars(t)


def names_of(t: Term) -> set:
    return {s for s in subterms(t) if isinstance(s, Name)}


# -- positions ---------------------------------------------------------------


def pos_str(p: Position) -> str:
    if all(d < 10 for d in p):
        return "".join(map(str, p))
    return ".".join(map(str, p))


def parse_pos(s: str) -> Position:
    if "." in s:
        return tuple(int(x) for x in s.split("."))
    return tuple(int(c) for c in s)


def positions(t: Term) -> list[Position]:
    """All positions of ``t`` in prefix order."""
    out: list[Position] = [()]
    if not is_atomic(t):
        for i, c in enumerate(t.children):
            out.extend((i,) + p for p in positions(c))
    return out


def subterm_at(t: Term, p: Position) -> Term:
    for d in p:
        if is_atomic(t) or d not in (0, 1):
            raise InvalidPosition(f"{pos_str(p)} is not a position of {t}")
        t = t.children[d]
    return t


def replace_at(t: Term, p: Position, u: Term) -> Term:
    if not p:
        return u
    if is_atomic(t) or p[0] not in (0, 1):
        raise InvalidPosition(f"{pos_str(p)} is not a position of {t}")
    a, b = t.children
    if p[0] == 0:
        return rebuild(t, replace_at(a, p[1:], u), b)
    return rebuild(t, a, replace_at(b, p[1:], u))


def positions_of(x: Term, t: Term) -> list[Position]:
    """Positions at which ``x`` occurs in ``t``."""
    if x not in subterms(t):
        return []
    if t is x:
        return [()]
    if is_atomic(t):
        return []
    out = []
    for i, c in enumerate(t.children):
        out.extend((i,) + p for p in positions_of(x, c))
    return out


# -- substitution -------------------------------------------------------------

Subst = Mapping[Var, Term]


def apply(t: Term, sub: Subst) -> Term:
    """Apply ``sub`` once (not iterated) to ``t``."""
    if not sub or not (term_vars(t) & sub.keys()):
        return t
    if isinstance(t, Var):
        return sub.get(t, t)
    a, b = t.children
    return rebuild(t, apply(a, sub), apply(b, sub))


def resolve(t: Term, sub: Subst, _depth: int = 0) -> Term:
    """Apply ``sub`` until no variable of its domain remains (acyclic maps only)."""
    seen = 0
    while term_vars(t) & sub.keys():
        t = apply(t, sub)
        seen += 1
        if seen > len(sub) + 1:
            raise ValueError("cyclic substitution")
    return t


def compose(first: Subst, then: Subst) -> dict:
    """Substitution equal to applying ``first`` and then ``then``."""
    out = {x: apply(t, then) for x, t in first.items()}
    for x, t in then.items():
        out.setdefault(x, t)
    return {x: t for x, t in out.items() if t is not x}


def unify(pairs: Iterable[tuple[Term, Term]]) -> Optional[dict]:
    """Idempotent most general unifier of the given equations, or ``None``.

    Bindings that would put a non-key term into a key position fail.
    """
    pairs = list(pairs)
    todo = list(pairs)
    sub: dict = {}
    try:
        while todo:
            a, b = todo.pop()
            a, b = apply(a, sub), apply(b, sub)
            if a is b:
                continue
            if not isinstance(a, Var) and isinstance(b, Var):
                a, b = b, a
            if isinstance(a, Var):
                if a in term_vars(b):
                    return None
                step = {a: b}
                sub = {x: apply(t, step) for x, t in sub.items()}
                sub[a] = b
                continue
            if isinstance(a, Name) or isinstance(b, Name) or not same_constructor(a, b):
                return None
            todo.extend(zip(a.children, b.children))
        for a, b in pairs:  # a binding may land in a key position elsewhere
            apply(a, sub), apply(b, sub)
    except SortError:
        return None
    return sub
