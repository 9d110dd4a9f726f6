"""Seeded random instances for fuzzing: terms, contexts, proofs and runs."""

from __future__ import annotations

import random
from typing import Optional

from . import eqproof as P
from .assertions import And, Assertion, Eq, Exists, Member, all_vars, consistent, free_vars, kernel, pubs, st_all
from .dy import DyProof, dy_derives
from .eqproof import EqProof, check_eq_proof
from .errors import InvalidProof, SortError
from .protocol import Knowledge, Protocol, Run, Tracker, instantiate_session, validate_run
from .saturation import Saturation
from .terms import KEY, QUANT, Enc, Name, Pair, Term, Var, subterms_of, term_key

PLAIN_NAMES = tuple(Name(f"n{i}") for i in range(3))
SYM_KEYS = (Name("k0", KEY), Name("k1", KEY))
PK, SK = Name("pk0", KEY, "sk0"), Name("sk0", KEY, "pk0")
KEYS = SYM_KEYS + (PK, SK)
QVARS = tuple(Var(v, QUANT) for v in ("x", "y", "z"))


def rng_for(seed: int, index: int = 0) -> random.Random:
    return random.Random(seed * 1_000_003 + index)


def random_term(rng: random.Random, depth: int, leaves=PLAIN_NAMES + KEYS, keys=KEYS) -> Term:
    if depth <= 0 or rng.random() < 0.35:
        return rng.choice(leaves)
    a = random_term(rng, depth - 1, leaves, keys)
    if rng.random() < 0.5:
        return Pair(a, random_term(rng, depth - 1, leaves, keys))
    return Enc(a, rng.choice(keys))


# -- Dolev-Yao instances ------------------------------------------------------------


def random_dy_instance(rng: random.Random, max_st: int = 12) -> tuple[frozenset, Term]:
    """``(X, t)`` with at most six terms of depth three and ``|st(X + t)| <= max_st``."""
    while True:
        X = frozenset(random_term(rng, 3) for _ in range(rng.randint(1, 6)))
        pool = sorted(subterms_of(X), key=term_key)
        if rng.random() < 0.6:
            t = rng.choice(pool)
        else:
            t = random_term(rng, 2, leaves=tuple(pool[:8]) + PLAIN_NAMES)
        if len(subterms_of(X | {t})) <= max_st:
            return X, t


# -- pure contexts ------------------------------------------------------------------


def _open_term(rng: random.Random, depth: int, vs) -> Term:
    leaves = PLAIN_NAMES + SYM_KEYS + tuple(vs)
    if depth <= 0 or rng.random() < 0.4:
        return rng.choice(leaves)
    a = _open_term(rng, depth - 1, vs)
    if rng.random() < 0.5:
        return Pair(a, _open_term(rng, depth - 1, vs))
    keys = SYM_KEYS + tuple(vs)
    return Enc(a, rng.choice(keys))


def random_assertion(rng: random.Random, vs=QVARS[:2], depth: int = 2, members: bool = True) -> Assertion:
    """A closed assertion: binders over a conjunction of equalities and memberships."""
    while True:
        try:
            parts = [Eq(_open_term(rng, depth, vs), _open_term(rng, depth, vs)) for _ in range(rng.randint(1, 2))]
        except SortError:
            continue
        if members and rng.random() < 0.5:
            parts.append(Member(rng.choice(vs), tuple(rng.sample(PLAIN_NAMES, rng.randint(1, 3)))))
        body = parts[0]
        for p in parts[1:]:
            body = And(body, p)
        used = [v for v in vs if v in all_vars(body)]
        a = body
        for v in reversed(used):
            a = Exists(v, a)
        return a


def random_sanitized(rng: random.Random, n_assertions: int = 1, depth: int = 2, members: bool = True):
    """``(S, A)`` with the public parts of every assertion added to ``S``."""
    A = []
    for i in range(n_assertions):
        vs = QVARS[:2] if i == 0 else tuple(Var(f"{v.id}{i}", QUANT) for v in QVARS[:2])
        A.append(random_assertion(rng, vs, depth, members))
    S = set(rng.sample(PLAIN_NAMES + SYM_KEYS, rng.randint(0, 3)))
    for a in A:
        S |= pubs(a)
    return frozenset(S), A


def random_pure_context(rng: random.Random, max_z: int = 8, tries: int = 10_000) -> tuple[frozenset, frozenset]:
    """Kernel of a random sanitized pair; consistent, with ``|Z| <= max_z``."""
    for _ in range(tries):
        S, A = random_sanitized(rng, rng.randint(1, 2), depth=rng.randint(1, 2))
        K = kernel(S, A)
        if len(subterms_of(K.terms) | st_all(K.atoms)) > max_z:
            continue
        if consistent(K.atoms) is None:
            continue
        return K.terms, K.atoms
    raise RuntimeError("no consistent context found")


# -- non-normal proofs -----------------------------------------------------------------


def _detour(dp: DyProof, T: frozenset) -> DyProof:
    """Wrap a dy proof in a constructor/destructor detour."""
    other = dy_derives(T, dp.conclusion)
    if other is None:
        return dp
    pair = DyProof("pair", Pair(dp.conclusion, dp.conclusion), (dp, other))
    return DyProof("fst", dp.conclusion, (pair,))


def roughen(rng: random.Random, p: EqProof, T: frozenset, steps: int = 3) -> EqProof:
    """Apply random inverse rewrites; the result is valid but usually not normal."""
    for _ in range(steps):
        c = p.conclusion
        moves = ["symsym"]
        if isinstance(c, Eq):
            moves += ["refl_left", "refl_right", "symtrans"]
            if dy_derives(T, c.left) is not None and dy_derives(T, c.right) is not None:
                moves.append("projcons")
        if p.rule == "trans" and len(p.premises) >= 3:
            moves.append("nest")
        if p.rule == "int" and len(p.premises) >= 3:
            moves.append("nest_int")
        m = rng.choice(moves)
        if m == "symsym" and isinstance(c, Eq):
            p = P.sym(P.sym(p))
        elif m in ("refl_left", "refl_right"):
            t = c.left if m == "refl_left" else c.right
            dp = dy_derives(T, t)
            if dp is None:
                continue
            if rng.random() < 0.5:
                dp = _detour(dp, T)
            r = P.eq_rule(dp)
            p = P.trans((r, p)) if m == "refl_left" else P.trans((p, r))
        elif m == "symtrans" and p.rule == "trans":
            p = P.sym(P.trans(tuple(P.sym(q) for q in reversed(p.premises))))
        elif m == "projcons":
            other = rng.choice(sorted(T, key=term_key))
            if dy_derives(T, other) is None:
                continue
            side_p = P.eq_rule(dy_derives(T, other))
            j = rng.randint(0, 1)
            pieces = (p, side_p) if j == 0 else (side_p, p)
            like = Pair(c.left, other)
            cp = P.cons(like, *pieces)
            side = P.proj_side(T, cp.conclusion.left, cp.conclusion.right)
            if side is None:
                continue
            p = P.proj(j, cp, side)
        elif m == "nest":
            ps = p.premises
            i = rng.randint(0, len(ps) - 2)
            p = P.trans(ps[:i] + (P.trans(ps[i : i + 2]),) + ps[i + 2 :])
        elif m == "nest_int":
            ps = p.premises
            inner = ps[:2]
            items = set(inner[0].conclusion.items) & set(inner[1].conclusion.items)
            sub = EqProof("int", Member(c.subject, tuple(sorted(items, key=lambda n: n.id))), inner)
            p = EqProof("int", c, (sub,) + ps[2:])
    return p


def random_valid_proof(rng: random.Random, max_z: int = 8) -> tuple[frozenset, frozenset, EqProof]:
    """A valid, usually non-normal proof over a random pure consistent context."""
    while True:
        T, E = random_pure_context(rng, max_z)
        sat = Saturation(T, E)
        atoms = sorted(
            (a for a in sat.derived_atoms() if not (isinstance(a, Eq) and a.left is a.right)),
            key=lambda a: (type(a).__name__, str(a)),
        )
        if not atoms:
            continue
        a = rng.choice(atoms)
        p = sat.proof(a)
        if p is None:
            continue
        q = roughen(rng, p, T, rng.randint(1, 5))
        try:
            check_eq_proof(q, T, E)
        except InvalidProof:
            continue
        return T, E, q


# -- runs ---------------------------------------------------------------------------------


def _candidates(rng: random.Random, kI: Knowledge, oversize: bool) -> list:
    from .dy import analysis

    an = analysis(frozenset(kI.terms))
    base = sorted((t for t in an.closure if not isinstance(t, Var)), key=term_key)
    extra = []
    if oversize and base:
        for _ in range(4):
            a, b = rng.choice(base), rng.choice(base)
            t = Pair(Pair(a, b), Pair(a, b))
            extra.append(t)
    return base + extra


def random_run(rng: random.Random, protocol: Protocol, max_sessions: int = 3, oversize: bool = False, tries: int = 200) -> Optional[Run]:
    """A validated run with random sessions, interleaving and substitution."""
    insts = protocol.instantiations()
    for _ in range(tries):
        k = rng.randint(1, max_sessions)
        sessions = [instantiate_session(protocol, *rng.choice(insts), tag=j + 1) for j in range(k)]
        lengths = [rng.randint(1, len(s.steps)) for s in sessions]
        order = [i for i, n in enumerate(lengths) for _ in range(n)]
        rng.shuffle(order)
        pos = [0] * k
        events = []
        for i in order:
            events.append((i, pos[i]))
            pos[i] += 1
        sigma: dict = {}
        tr = Tracker(protocol)
        ok = True
        for i, j in events:
            step = sessions[i].steps[j]
            new = sorted(free_vars(step.recv) - set(sigma), key=lambda v: v.id)
            kI = tr.get(protocol.intruder).subst(sigma)
            cands = _candidates(rng, kI, oversize)
            keys = [t for t in cands if isinstance(t, Name) and t.is_key]
            found = False
            for _ in range(30):
                trial = dict(sigma)
                try:
                    for v in new:
                        key_pos = any(isinstance(t, Enc) and t.key is v for s in sessions for st_ in s.steps for t in st_all(st_.parts()))
                        trial[v] = rng.choice(keys if key_pos else cands)
                    if tr.intruder_step(step, trial) is not None:
                        found = True
                        break
                except SortError:
                    continue
            if not found:
                ok = False
                break
            sigma = trial
            ku, hc = tr.honest_step(sessions[i].actor, step)
            if hc is None:
                ok = False
                break
            tr = tr.advance(sessions[i].actor, ku, step)
        if not ok:
            continue
        run = Run(sessions, events, sigma)
        try:
            if validate_run(protocol, run).valid:
                return run
        except SortError:
            continue
    return None


def oversized_run(protocol: Protocol, responder_role: str = "eta2") -> Run:
    """One responder session whose payload variable carries a large unmatched term."""
    insts = [i for i in protocol.instantiations() if i[0] == responder_role]
    sess = instantiate_session(protocol, *insts[0], tag=1)
    pk_i = Name("pk_i", KEY, "sk_i")
    pk_a = Name("pk_a", KEY, "sk_a")
    big = Pair(Pair(pk_i, pk_a), Pair(pk_i, pk_a))
    xs = sorted({v for st_ in sess.steps for v in all_vars(st_.recv)}, key=lambda v: v.id)
    sigma = {xs[0]: pk_i, xs[1]: big}
    return Run([sess], [(0, 0)], sigma)


# -- witness queries ----------------------------------------------------------------------

GOAL_VARS = (Var("u", QUANT), Var("w", QUANT))


def random_witness_query(rng: random.Random, max_st: int = 7, tries: int = 10_000):
    """``(S, A, goal)``: sanitized, consistent, ``|st(S) + st(A + goal)| <= max_st``."""
    from .assertions import bound_vars, rename_bound, strip_exists
    from .derive import context_bound

    for _ in range(tries):
        S, A = random_sanitized(rng, rng.randint(1, 2), depth=rng.randint(1, 2), members=rng.random() < 0.4)
        K = kernel(S, A)
        if consistent(K.atoms) is None:
            continue
        n = rng.randint(1, 2)
        gv = GOAL_VARS[:n]
        if rng.random() < 0.5:
            # reuse an assumption's shape under fresh binders
            a = rng.choice(A)
            ren = dict(zip(sorted(bound_vars(a), key=lambda v: v.id), GOAL_VARS))
            goal = rename_bound(a, ren)
            if rng.random() < 0.5:
                _, body = strip_exists(goal)
                goal = body if not (all_vars(body) & set(GOAL_VARS)) else goal
        else:
            try:
                body = Eq(_open_term(rng, rng.randint(0, 2), gv), _open_term(rng, rng.randint(0, 2), gv))
            except SortError:
                continue
            if rng.random() < 0.3:
                body = And(body, Eq(rng.choice(gv), rng.choice(PLAIN_NAMES + tuple(S))))
            goal = body
            for v in reversed([v for v in gv if v in all_vars(body)]):
                goal = Exists(v, goal)
        if any(v.quantified for v in all_vars(goal) - bound_vars(goal)):
            continue
        if context_bound(S, A, goal) > max_st:
            continue
        return S, A, goal
    raise RuntimeError("no query found")
