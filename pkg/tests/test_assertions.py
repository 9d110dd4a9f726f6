import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spa.assertions import (
    Eq,
    Member,
    abstractable_positions,
    bound_vars,
    check_sanitized,
    consistent,
    free_vars,
    holds,
    kernel,
    pubs,
    render,
    require_consistent,
    separate_bound,
    subst,
)
from spa.errors import Inconsistent, NotSanitized, SortError
from spa.generators import random_pure_context, random_sanitized, rng_for
from spa.terms import pos_str

from conftest import A, T


def test_render_parse_round_trip():
    for s in [
        "exists x. {x}k ~ {m}k",
        "and(el(a), member(?y, [c0, c1]))",
        "says(pk, exists x r. and({x}r ~ ?c, member(x, [c0, c1])))",
    ]:
        assert render(A(s)) == s
        assert A(render(A(s))) == A(s)


def test_free_and_bound_vars():
    a = A("exists x. ({x}k, ?y) ~ ?z")
    assert {v.id for v in bound_vars(a)} == {"x"}
    assert {v.id for v in free_vars(a)} == {"y", "z"}


def test_pubs_are_maximal_quantifier_free_parts():
    a = A("exists x. ({x}k, (m, n)) ~ ?y")
    assert pubs(a) == {T("k"), T("(m, n)"), T("?y")}


def test_abstractable_positions_core_mode_rejects_extended():
    with pytest.raises(SortError):
        abstractable_positions([T("m")], A("and(m ~ m, n ~ n)"), mode="core")


def test_abstractable_positions_under_and():
    a = A("and(el(a), {m}k ~ n)")
    got = {pos_str(p) for p in abstractable_positions([T("a"), T("m"), T("k"), T("n")], a)}
    assert got == {"01", "10", "100", "101", "11"}  # predicate arguments count from 1


def test_sanitized_requires_pubs_in_terms():
    with pytest.raises(NotSanitized):
        check_sanitized([T("m")], [A("exists x. {x}k ~ {m}k")])
    check_sanitized([T("k"), T("{m}k")], [A("exists x. {x}k ~ {m}k")])
    with pytest.raises(NotSanitized):
        check_sanitized([T("$x")], [])


def test_kernel_promotes_binders():
    K = kernel([T("k"), T("{m}k")], [A("exists x. {x}k ~ {m}k")])
    assert T("$x") in K.terms
    assert K.atoms == {A("exists x. {x}k ~ {m}k").body}


def test_separate_bound_renames_clashes():
    a = A("exists x. {x}k ~ {m}k")
    out = separate_bound([a, a])
    assert bound_vars(out[0]).isdisjoint(bound_vars(out[1]))


def test_consistency():
    assert consistent([Eq(T("?x"), T("m")), Member(T("?x"), (T("m"), T("n")))]) is not None
    assert consistent([Eq(T("?x"), T("m")), Member(T("?x"), (T("c0"), T("c1")))]) is None
    assert consistent([Eq(T("{m}?k"), T("{?y}k"))]) == {T("?k"): T("k"), T("?y"): T("m")}
    with pytest.raises(Inconsistent):
        require_consistent([Eq(T("m"), T("n"))])


def test_consistent_keeps_key_positions_sorted():
    w = consistent([Eq(T("?x"), T("{m}?y"))])
    assert w is not None
    assert w[T("?y")].is_key


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_consistency_witness_satisfies_atoms(seed):
    T_, E = random_pure_context(rng_for(seed))
    w = consistent(E)
    assert w is not None
    assert all(holds(a, w) for a in E)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_random_sanitized_pairs_are_sanitized(seed):
    S, As = random_sanitized(rng_for(seed))
    check_sanitized(S, As)
    K = kernel(S, As)
    assert K.terms >= frozenset(S)


def test_subst_avoids_bound():
    a = A("exists x. {x}k ~ ?y")
    b = subst(a, {T("?y"): T("m")})
    assert render(b) == "exists x. {x}k ~ m"
