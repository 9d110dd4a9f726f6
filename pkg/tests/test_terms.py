import pytest
from hypothesis import given
from hypothesis import strategies as st

from spa.errors import InvalidPosition, SortError
from spa.terms import (
    KEY,
    Enc,
    Name,
    Pair,
    Var,
    apply,
    compose,
    dagsize,
    inverse,
    parse_pos,
    pos_str,
    positions,
    positions_of,
    replace_at,
    subterm_at,
    subterms,
    term_vars,
    unify,
)

from strategies import NAMES, VARS, ground_terms, open_terms

m, n, k = Name("m"), Name("n"), Name("k", KEY)
x, y = Var("x"), Var("y")


def test_hash_consing_shares_nodes():
    assert Pair(m, Enc(n, k)) is Pair(m, Enc(n, k))
    assert Name("m") is m


def test_enc_rejects_non_key():
    with pytest.raises(SortError):
        Enc(m, n)
    with pytest.raises(SortError):
        Enc(m, Pair(k, k))
    assert Enc(m, x).key is x


def test_inverse():
    pk = Name("pk", KEY, "sk")
    assert inverse(pk) is Name("sk", KEY, "pk")
    assert inverse(k) is k


def test_dagsize_counts_distinct_subterms():
    t = Pair(Enc(m, k), Enc(m, k))
    assert dagsize(t) == 4  # pair, enc, m, k
    assert subterms(t) == {t, Enc(m, k), m, k}


def test_positions_and_lookup():
    t = Pair(Enc(m, k), n)
    assert sorted(pos_str(p) for p in positions(t)) == ["", "0", "00", "01", "1"]
    assert subterm_at(t, parse_pos("01")) is k
    assert replace_at(t, parse_pos("00"), n) is Pair(Enc(n, k), n)
    with pytest.raises(InvalidPosition):
        subterm_at(t, parse_pos("10"))


def test_unify_basic():
    s = unify([(Pair(x, n), Pair(m, y))])
    assert s == {x: m, y: n}
    assert unify([(x, Pair(x, m))]) is None  # occurs check
    assert unify([(Pair(m, n), Enc(m, k))]) is None


def test_unify_respects_key_sort():
    # x would have to be both a key and a pair
    assert unify([(Enc(m, x), Enc(m, k)), (x, Pair(m, n))]) is None


@given(open_terms, open_terms)
def test_unifier_is_a_unifier(a, b):
    try:
        s = unify([(a, b)])
    except SortError:
        return
    if s is not None:
        assert apply(a, s) is apply(b, s)
        # idempotent
        assert all(apply(t, s) is t for t in s.values())


@given(open_terms)
def test_unify_with_self_is_empty(t):
    assert unify([(t, t)]) == {}


@given(ground_terms)
def test_positions_cover_subterms(t):
    assert {subterm_at(t, p) for p in positions(t)} == subterms(t)
    for u in subterms(t):
        for p in positions_of(u, t):
            assert subterm_at(t, p) is u


@given(ground_terms, st.sampled_from(NAMES))
def test_replace_then_read(t, c):
    for p in positions(t):
        try:
            r = replace_at(t, p, c)
        except SortError:
            continue
        assert subterm_at(r, p) is c


@given(open_terms)
def test_compose_matches_sequential_apply(t):
    first = {VARS[0]: Pair(VARS[1], NAMES[0])}
    then = {VARS[1]: NAMES[1]}
    assert apply(t, compose(first, then)) is apply(apply(t, first), then)


@given(ground_terms)
def test_ground_terms_have_no_vars(t):
    assert term_vars(t) == frozenset()
