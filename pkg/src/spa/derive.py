"""Deciding ``(S; A) |- goal`` through bounded witnesses for the goal's binders.

A witness maps every bound variable of the goal to a term.  Candidates are the
subterms of the context and goal (bound variables excluded), composed with one
another when a candidate mentions a different binder; this covers every shape a
minimal-size witness can take.  Each candidate is checked for derivability of
the witness terms, abstractability of the binders and equality-derivability of
the goal's atoms, after which an introduction-only decomposition of the goal is
attempted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .assertions import (
    And,
    Assertion,
    Eq,
    Exists,
    Kernel,
    Member,
    Pred,
    Says,
    abstractable_positions,
    all_vars,
    bound_vars,
    canonical,
    consistent,
    free_vars,
    is_core,
    kernel,
    render,
    separate_bound,
    st,
    st_all,
    subformulas,
    subst,
    var_positions,
)
from .dy import DyProof, analysis, check_dy_proof
from .eqproof import EqProof, check_eq_proof, eq_rule
from .errors import InvalidProof, SortError, VariableCapture
from .saturation import Saturation
from .terms import Enc, Name, Pair, Term, Var, apply, dagsize, inverse, resolve, subterms_of, term_key, term_vars, unify


@dataclass
class DerivationCertificate:
    goal: Assertion
    witness: dict = field(default_factory=dict)
    dy_proofs: dict = field(default_factory=dict)
    atom_proofs: dict = field(default_factory=dict)
    key_proofs: dict = field(default_factory=dict)
    by_axiom: bool = False

    def to_json(self) -> dict:
        return {
            "goal": render(self.goal),
            "by_axiom": self.by_axiom,
            "witness": {str(x): str(t) for x, t in sorted(self.witness.items(), key=lambda kv: kv[0].id)},
            "dy_proofs": {str(x): p.to_json() for x, p in sorted(self.dy_proofs.items(), key=lambda kv: kv[0].id)},
            "atom_proofs": {k: self.atom_proofs[k].to_json() for k in sorted(self.atom_proofs)},
            "key_proofs": {k: self.key_proofs[k].to_json() for k in sorted(self.key_proofs)},
        }


def binders(a: Assertion) -> list[Var]:
    """Bound variables in order of their binder's first appearance."""
    out = []
    for f in subformulas(a):
        if isinstance(f, Exists) and f.var not in out:
            out.append(f.var)
    return out


def strip(a: Assertion) -> Assertion:
    """Drop every binder, keeping the bound variables free."""
    if isinstance(a, Exists):
        return strip(a.body)
    if isinstance(a, And):
        return And(strip(a.left), strip(a.right))
    if isinstance(a, Says):
        return Says(a.key, strip(a.body))
    return a


def _intro_atoms(a: Assertion) -> list[Assertion]:
    if isinstance(a, And):
        return _intro_atoms(a.left) + _intro_atoms(a.right)
    if isinstance(a, Says):
        return [a] + _intro_atoms(a.body)
    return [a]


def check_abstractability_conditions(T: Iterable[Term], goal: Assertion) -> dict:
    """For each binder of ``goal``: its positions and whether all are abstractable."""
    T = frozenset(T) | set(bound_vars(goal))
    out = {}
    for f in subformulas(goal):
        if isinstance(f, Exists):
            pos = var_positions(f.var, f.body)
            ok = pos <= abstractable_positions(T, f.body)
            out[f.var] = (pos, ok)
    return out


def _abstractable(T, goal) -> bool:
    return all(ok for _, ok in check_abstractability_conditions(T, goal).values())


def _refined_mgu(E) -> Optional[dict]:
    """Most general solution of the equalities, with forced memberships applied.

    Only meaningful for consistent contexts; returns ``None`` otherwise so that
    callers skip pruning.
    """
    E = list(E)
    if consistent(E) is None:
        return None
    eqs = [(a.left, a.right) for a in E if isinstance(a, Eq)]
    mems = [a for a in E if isinstance(a, Member)]
    sub = unify(eqs)
    while sub is not None:
        allowed: dict = {}
        for m in mems:
            s = apply(m.subject, sub)
            if isinstance(s, Var):
                allowed[s] = allowed.get(s, set(m.items)) & set(m.items)
        forced = [(v, next(iter(ns))) for v, ns in sorted(allowed.items(), key=lambda kv: kv[0].id) if len(ns) == 1]
        if not forced:
            break
        sub = unify([(x, t) for x, t in sub.items()] + forced)
    return sub


def _match_term(p: Term, t: Term, xs: set, sub: dict) -> bool:
    """Extend ``sub`` so the binders in ``p`` make it equal to ``t``."""
    if p in xs:
        if p in sub:
            return sub[p] is t
        sub[p] = t
        return True
    if p is t:
        return True
    if isinstance(p, (Pair, Enc)) and type(p) is type(t):
        return all(_match_term(a, b, xs, sub) for a, b in zip(p.children, t.children))
    return False


def _match(p: Assertion, a: Assertion, xs: set, sub: dict) -> bool:
    """Structural matching of canonical assertions; only ``xs`` may be bound."""
    if type(p) is not type(a):
        return False
    if isinstance(p, Eq):
        return _match_term(p.left, a.left, xs, sub) and _match_term(p.right, a.right, xs, sub)
    if isinstance(p, Member):
        return p.items == a.items and _match_term(p.subject, a.subject, xs, sub)
    if isinstance(p, Pred):
        return (
            p.symbol == a.symbol
            and len(p.args) == len(a.args)
            and all(_match_term(u, v, xs, sub) for u, v in zip(p.args, a.args))
        )
    if isinstance(p, And):
        return _match(p.left, a.left, xs, sub) and _match(p.right, a.right, xs, sub)
    if isinstance(p, Exists):
        return p.var is a.var and _match(p.body, a.body, xs, sub)
    return _match_term(p.key, a.key, xs, sub) and _match(p.body, a.body, xs, sub)


@dataclass
class Route:
    """One way of taking the goal apart: atoms read off the context, the rest introduced."""

    matched: list  # (goal atom, context atom) pairs
    eqs: list  # equalities that must become derivable
    open_parts: list  # remaining atoms and says keys whose binders matter


def routes(goal: Assertion, says: list, preds: list) -> list[Route]:
    if isinstance(goal, Exists):
        return routes(goal.body, says, preds)
    if isinstance(goal, And):
        return [
            Route(l.matched + r.matched, l.eqs + r.eqs, l.open_parts + r.open_parts)
            for l in routes(goal.left, says, preds)
            for r in routes(goal.right, says, preds)
        ]
    if isinstance(goal, Says):
        out = [Route([(goal, e)], [], []) for e in says]
        for r in routes(goal.body, says, preds):
            out.append(Route(r.matched, r.eqs, r.open_parts + [Eq(goal.key, goal.key)]))
        return out
    if isinstance(goal, Pred):
        return [Route([(goal, e)], [], []) for e in preds if e.symbol == goal.symbol]
    if isinstance(goal, Eq):
        return [Route([], [goal], [])]
    return [Route([], [], [goal])]


def decompose_intro(sat: Saturation, an, goal: Assertion, nu: dict, cert: DerivationCertificate) -> bool:
    """Derive ``goal`` with introduction steps, opening binders with ``nu``.

    A ``says`` atom is first looked up as a whole (its body stays closed);
    only when that fails is the signing key used to build it from its body.
    """
    if isinstance(goal, Exists):
        return decompose_intro(sat, an, subst(goal.body, {goal.var: nu[goal.var]}), nu, cert)
    if isinstance(goal, And):
        return decompose_intro(sat, an, goal.left, nu, cert) and decompose_intro(sat, an, goal.right, nu, cert)
    if isinstance(goal, Says):
        p = sat.proof(goal)
        if p is not None:
            cert.atom_proofs[render(goal)] = p
            return True
        k = inverse(goal.key)
        if k is None or not an.derives(k):
            return False
        if decompose_intro(sat, an, goal.body, nu, cert):
            cert.key_proofs[str(goal.key)] = an.proof(k)
            return True
        return False
    if isinstance(goal, Eq) and goal.left is goal.right and an.derives(goal.left):
        cert.atom_proofs[render(goal)] = eq_rule(an.proof(goal.left))
        return True
    p = sat.proof(goal)
    if p is None:
        return False
    cert.atom_proofs[render(goal)] = p
    return True


def _key_binders(goal: Assertion, xs: set) -> set:
    out = set()
    for t in st(goal):
        if isinstance(t, Enc) and t.key in xs:
            out.add(t.key)
    for f in subformulas(goal):
        if isinstance(f, Says) and f.key in xs:
            out.add(f.key)
    return out


class WitnessSearch:
    def __init__(self, K: Kernel, goal: Assertion, bound: int):
        self.K = K
        self.T = K.terms
        self.goal = goal
        self.xs = binders(goal)
        self.body = strip(goal)
        self.bound = bound
        xs = set(self.xs)
        pool = subterms_of(self.T) | st_all(K.atoms) | st(goal)
        self.cands = sorted((t for t in pool if t not in xs), key=term_key)
        self.an = analysis(self.T)
        self.theta = _refined_mgu(K.atoms)
        self.keyed = _key_binders(goal, xs)
        says = sorted((a for a in K.atoms if isinstance(a, Says)), key=render)
        preds = sorted((a for a in K.atoms if isinstance(a, Pred)), key=render)
        self.routes = routes(goal, says, preds)

    def _consistent_with(self, nu: dict, eqs_: list) -> bool:
        if self.theta is None:
            return True
        eqs = []
        for a in eqs_:
            try:
                l = apply(resolve(a.left, nu), self.theta)
                r = apply(resolve(a.right, nu), self.theta)
            except (SortError, ValueError):
                return False
            eqs.append((l, r))
        return unify(eqs) is not None

    def _resolved(self, assign: dict) -> Optional[dict]:
        try:
            return {x: resolve(t, assign) for x, t in assign.items()}
        except (SortError, ValueError):
            return None

    def _forced(self, route: Route) -> Optional[dict]:
        xs = set(self.xs)
        sub: dict = {}
        for g, e in route.matched:
            if not _match(canonical(g), canonical(e), xs, sub):
                return None
        for x, t in sub.items():
            if not self.an.derives(t) or dagsize(t) > self.bound or (x in self.keyed and not _is_key(t)):
                return None
        return sub

    def _default(self, x: Var) -> Optional[Term]:
        for t in self.cands:
            if not (term_vars(t) & set(self.xs)) and self.an.derives(t) and (x not in self.keyed or _is_key(t)):
                return t
        return None

    def run(self):
        """Yield complete, resolved witnesses in search order."""
        seen: set = set()
        for route in self.routes:
            forced = self._forced(route)
            if forced is None:
                continue
            live: set = set()
            for a in route.eqs + route.open_parts:
                live |= free_vars(a)
            free = [x for x in self.xs if x not in forced and x in live]
            fixed = dict(forced)
            for x in self.xs:
                if x not in forced and x not in live:
                    d = self._default(x)
                    if d is None:
                        break
                    fixed[x] = d
            else:
                for nu in self._enumerate(free, fixed, route.eqs):
                    k = frozenset(nu.items())
                    if k not in seen:
                        seen.add(k)
                        yield nu

    def _enumerate(self, xs: list, base: dict, eqs: list):
        n = len(xs)
        all_xs = set(self.xs)
        if not self._consistent_with(base, eqs):
            return

        def go(i: int, assign: dict):
            if i == n:
                nu = self._resolved(assign)
                if nu is not None:
                    yield nu
                return
            x = xs[i]
            for u in self.cands:
                if x in term_vars(u):
                    continue
                assign[x] = u
                nu = self._resolved(assign)
                if nu is not None:
                    done = [y for y in nu if not (term_vars(nu[y]) & all_xs)]
                    if all(self.an.derives(nu[y]) and dagsize(nu[y]) <= self.bound for y in done):
                        if self._consistent_with(nu, eqs):
                            yield from go(i + 1, assign)
                del assign[x]

        yield from go(0, dict(base))

    def check(self, nu: dict) -> Optional[DerivationCertificate]:
        for x in self.xs:
            t = nu[x]
            if term_vars(t) & set(self.xs) or not self.an.derives(t):
                return None
        try:
            opened = subst(self.body, nu)
        except SortError:
            return None
        cert = DerivationCertificate(self.goal, dict(nu))
        for x in self.xs:
            cert.dy_proofs[x] = self.an.proof(nu[x])
        sat = Saturation(self.T, self.K.atoms, _intro_atoms(opened))
        try:
            if decompose_intro(sat, self.an, self.goal, nu, cert):
                return cert
        except SortError:
            return None
        return None


def _is_key(t: Term) -> bool:
    return isinstance(t, Var) or (isinstance(t, Name) and t.is_key)


def _ctx_vars(S, A) -> set:
    out = set().union(*(term_vars(t) for t in S)) if S else set()
    for a in A:
        out |= free_vars(a)
    return out


def context_bound(S: Iterable[Term], A: Iterable[Assertion], goal: Assertion) -> int:
    return len(subterms_of(S) | st_all(list(A) + [goal]))


def assert_derives(
    S: Iterable[Term],
    A: Iterable[Assertion],
    goal: Assertion,
    mode: str = "extended",
    bound: Optional[int] = None,
) -> Optional[DerivationCertificate]:
    """Certificate for ``(S; A) |- goal``, or ``None`` when it is not derivable."""
    S, A = frozenset(S), list(A)
    if mode == "core":
        for a in A + [goal]:
            if not is_core(a):
                raise SortError(f"core mode only admits quantified equalities: {render(a)}")
    if goal in A:
        return DerivationCertificate(goal, by_axiom=True)
    ctx_vars = set().union(*(term_vars(t) for t in S)) if S else set()
    for a in A:
        ctx_vars |= free_vars(a)
    clash = bound_vars(goal) & ctx_vars
    if clash:
        raise VariableCapture(f"bound variable {min(clash, key=str)} of the goal also occurs in the context")
    A = separate_bound(A, avoid=ctx_vars | bound_vars(goal) | all_vars(goal))
    K = kernel(S, A)
    if not _abstractable(K.terms, goal):
        return None
    M = bound if bound is not None else context_bound(S, A, goal)
    search = WitnessSearch(K, goal, M)
    if not search.xs:
        return search.check({})
    for nu in search.run():
        cert = search.check(nu)
        if cert is not None:
            return cert
    return None


def find_witness(S, A, goal, mode: str = "extended", bound: Optional[int] = None) -> Optional[dict]:
    cert = assert_derives(S, A, goal, mode, bound)
    return None if cert is None else cert.witness


def replay_certificate(cert: DerivationCertificate, S: Iterable[Term], A: Iterable[Assertion]) -> None:
    """Re-check a certificate from scratch; raise :class:`InvalidProof` on any flaw."""
    S, A = frozenset(S), list(A)
    goal = cert.goal
    if cert.by_axiom:
        if goal not in A:
            raise InvalidProof("axiom certificate for a goal outside the context")
        return
    A = separate_bound(A, avoid=_ctx_vars(S, A) | bound_vars(goal) | all_vars(goal))
    K = kernel(S, A)
    T = K.terms
    xs = binders(goal)
    if set(cert.witness) != set(xs):
        raise InvalidProof("witness domain differs from the goal's binders")
    for x in xs:
        p = cert.dy_proofs.get(x)
        if p is None or p.conclusion is not cert.witness[x]:
            raise InvalidProof(f"no derivation for the witness of {x}")
        check_dy_proof(p, T)
    if not _abstractable(T, goal):
        raise InvalidProof("a binder occurs at a non-abstractable position")

    nu = cert.witness

    def intro(g: Assertion) -> None:
        if isinstance(g, Exists):
            intro(subst(g.body, {g.var: nu[g.var]}))
            return
        if isinstance(g, And):
            intro(g.left)
            intro(g.right)
            return
        key = render(g)
        p = cert.atom_proofs.get(key)
        if p is not None:
            if p.conclusion != g:
                raise InvalidProof(f"proof for {key} concludes something else")
            check_eq_proof(p, T, K.atoms)
            return
        if isinstance(g, Says):
            kp = cert.key_proofs.get(str(g.key))
            if kp is None or kp.conclusion is not inverse(g.key):
                raise InvalidProof(f"missing key derivation for {key}")
            check_dy_proof(kp, T)
            intro(g.body)
            return
        raise InvalidProof(f"no proof for atom {key}")

    try:
        intro(goal)
    except SortError as e:
        raise InvalidProof(f"ill-sorted witness: {e}") from e
