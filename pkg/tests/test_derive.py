import dataclasses

import pytest

from spa.derive import assert_derives, context_bound, find_witness, replay_certificate
from spa.errors import InvalidProof, NotSanitized, SortError, VariableCapture
from spa.generators import random_witness_query, rng_for
from spa.oracles import brute_witness
from spa.terms import Name

from conftest import A, T


def test_axiom_goal():
    cert = assert_derives([T("k"), T("{m}k")], [A("exists x. {x}k ~ {m}k")], A("exists x. {x}k ~ {m}k"))
    assert cert.by_axiom


def test_simple_witness():
    S = [T("m"), T("k"), T("{m}k")]
    cert = assert_derives(S, [], A("exists x. {x}k ~ {m}k"))
    assert cert is not None
    assert {v.id: str(t) for v, t in cert.witness.items()} == {"x": "m"}
    replay_certificate(cert, S, [])


def test_underivable_witness():
    # m is not known, and nothing equates {m}k with a known ciphertext
    assert assert_derives([T("{m}k"), T("n")], [], A("exists x. {x}k ~ {n}k")) is None


def test_hidden_position_blocks_abstraction():
    # the key k is underivable, so the payload position is not abstractable
    assert assert_derives([T("{m}k")], [], A("exists x. {x}k ~ {m}k")) is None


def test_forwarding_an_assertion_through_equalities():
    S = [T("k"), T("{m}k"), T("?c")]
    As = [A("exists x. {x}k ~ ?c"), A("?c ~ {m}k")]
    cert = assert_derives(S, As, A("exists y. {y}k ~ {m}k"))
    assert cert is not None
    replay_certificate(cert, S, As)


def test_says_needs_the_signing_key():
    S = [T("sk"), T("m")]
    assert assert_derives(S, [], A("says(pk, m ~ m)")) is not None
    assert assert_derives([T("pk"), T("m")], [], A("says(pk, m ~ m)")) is None


def test_core_mode_rejects_and():
    with pytest.raises(SortError):
        assert_derives([T("m")], [], A("and(m ~ m, m ~ m)"), mode="core")


def test_unsanitized_context():
    with pytest.raises(NotSanitized):
        assert_derives([], [A("exists x. {x}k ~ {m}k")], A("m ~ m"))


def test_goal_binder_clashing_with_context():
    with pytest.raises(VariableCapture):
        assert_derives([T("$x")], [], A("exists x. x ~ x"))


def test_tampered_certificate_is_rejected():
    S = [T("m"), T("n"), T("k"), T("{m}k")]
    cert = assert_derives(S, [], A("exists x. {x}k ~ {m}k"))
    bad = dataclasses.replace(cert, witness={v: Name("n") for v in cert.witness})
    with pytest.raises(InvalidProof):
        replay_certificate(bad, S, [])


def test_find_witness_wraps_certificate():
    S = [T("m"), T("k"), T("{m}k")]
    assert find_witness(S, [], A("exists x. {x}k ~ {m}k")) == {T("$x"): T("m")}


def test_distinct_public_names_never_equal():
    assert assert_derives([T("m"), T("n")], [], A("m ~ n")) is None
    assert brute_witness([T("m"), T("n")], [], A("m ~ n")) is None


@pytest.mark.parametrize("seed", range(25))
def test_engine_complete_against_oracle(seed):
    S, As, goal = random_witness_query(rng_for(seed))
    M = context_bound(S, As, goal)
    cert = assert_derives(S, As, goal, bound=M)
    if cert is not None:
        replay_certificate(cert, S, As)
    if brute_witness(S, As, goal, size_cap=2 * M) is not None:
        assert cert is not None


def test_forwarding_says_up_to_renaming():
    ctx = A("says(pk, exists x r. and({x}r ~ ?c, member(x, [c0, c1])))")
    S = [T("pk"), T("?c"), T("c0"), T("c1")]
    goal = A("exists u. says(u, exists y s. and({y}s ~ ?c, member(y, [c0, c1])))")
    cert = assert_derives(S, [ctx], goal)
    assert cert is not None
    assert cert.witness[T("$u")] is T("pk")
    replay_certificate(cert, S, [ctx])
    assert brute_witness(S, [ctx], goal) is not None


def test_says_body_is_not_opened_without_the_key():
    # changing the list breaks the match, and sk is unknown, so the body cannot be rebuilt
    ctx = A("says(pk, exists x r. and({x}r ~ ?c, member(x, [c0, c1])))")
    S = [T("pk"), T("?c"), T("c0"), T("c1")]
    goal = A("exists u. says(u, exists y s. and({y}s ~ ?c, member(y, [c0])))")
    assert assert_derives(S, [ctx], goal) is None
    assert brute_witness(S, [ctx], goal) is None


def test_says_built_with_signing_key():
    S = [T("sk"), T("m"), T("k"), T("{m}k")]
    goal = A("says(pk, exists x. {x}k ~ {m}k)")
    cert = assert_derives(S, [], goal)
    assert cert is not None and str(T("pk")) in cert.key_proofs
    replay_certificate(cert, S, [])
