import pytest

from spa.errors import ParseError, UnresolvedIdentifier
from spa.speclang import CORPUS, load, parse, parse_term, pretty_print
from spa.terms import KEY, Name, Pair, Var


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_round_trip(name):
    spec = load(name)
    text = pretty_print(spec)
    again = parse(text)
    assert pretty_print(again) == text
    assert sorted(again.derives) == sorted(spec.derives)
    assert sorted(again.attacks) == sorted(spec.attacks)
    assert again.roles.keys() == spec.roles.keys()


def test_example1_shape():
    spec = load("example1.spa")
    assert spec.mode == "core"
    assert spec.intruder is Name("i", "agent")
    assert set(spec.roles) == {"eta1", "eta2"}
    assert spec.attacks["secret_m"].sessions == 3
    pk_b = spec.names["pk_b"]
    assert pk_b.is_key and pk_b.inv == "sk_b"


def test_terms_resolve_names_and_variables():
    spec = load("example1.spa")
    t = parse_term("(?x, {m}pk_b)", spec)
    assert isinstance(t, Pair) and t.left is Var("x")
    assert t.right.key is Name("pk_b", KEY, "sk_b")


def test_unknown_name_is_located():
    with pytest.raises(UnresolvedIdentifier) as e:
        parse("mode core; agents i; intruder i;\nderive d { terms zz; goal zz ~ zz; }")
    assert e.value.line == 2


def test_syntax_error_is_located():
    with pytest.raises(ParseError) as e:
        parse("mode core;\nagents i\nintruder i;")
    assert e.value.line >= 2


def test_bad_character():
    with pytest.raises(ParseError):
        parse("mode core; @")


def test_encryption_under_plain_name_is_rejected():
    with pytest.raises(Exception):
        parse("mode core; agents i; intruder i; names m, n; derive d { terms {m}n; goal m ~ m; }")


def test_pretty_print_dispatch():
    spec = load("eqderiv.spa")
    assert pretty_print(spec.derives["shared_cipher"].goal) == "?x ~ {m}k"
    assert pretty_print(parse_term("{m}k", spec)) == "{m}k"
