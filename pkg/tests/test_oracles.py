import pytest

from spa.errors import BoundExceeded
from spa.oracles import EqClosure, OracleConfig, brute_dy, brute_eq, brute_witness, dy_closure, witness_pool

from conftest import A, T


def test_config_validates():
    with pytest.raises(ValueError):
        OracleConfig(max_universe=0)


def test_dy_closure_basics():
    X = {T("{m}k"), T("k")}
    U = {T("{m}k"), T("k"), T("m"), T("(m, k)")}
    assert dy_closure(X, U) == frozenset(U)


def test_universe_cap():
    with pytest.raises(BoundExceeded):
        brute_dy({T("((m, n), (n2, v))")}, T("m"), OracleConfig(max_universe=3))


def test_eq_closure_rules():
    S = [T("?x"), T("?y"), T("c0"), T("c1")]
    E = [A("?x ~ ?y"), A("member(?y, [c0])")]
    cl = EqClosure(S, E)
    assert cl.derives(A("?y ~ ?x"))
    assert cl.derives(A("?x ~ c0"))  # subst then prom
    assert not cl.derives(A("?x ~ c1"))


def test_projection_needs_derivable_components():
    # k is not derivable, so {?x}k ~ {m}k cannot be split
    S = [T("?x"), T("m"), T("{?x}k"), T("{m}k")]
    assert not brute_eq(S, [A("{?x}k ~ {m}k")], A("?x ~ m"))
    assert brute_eq(S + [T("k")], [A("{?x}k ~ {m}k")], A("?x ~ m"))


def test_witness_pool_grows_by_constructors():
    pool, complete = witness_pool(frozenset({T("m"), T("k")}), [T("m"), T("k")], cap=3, limit=100)
    assert complete
    assert T("{m}k") in pool and T("(m, k)") in pool


def test_brute_witness_trivial_no():
    assert brute_witness([T("m"), T("n")], [], A("m ~ n")) is None


def test_brute_witness_finds_plaintext():
    nu = brute_witness([T("m"), T("k"), T("{m}k")], [], A("exists x. {x}k ~ {m}k"))
    assert nu == {T("$x"): T("m")}
