import pytest

from spa.speclang import load, parse, parse_assertion, parse_term

VOCAB = parse(
    "mode extended; agents a, b, i; intruder i; public c0, c1; names m, n, n2, v;"
    " key k, k2; keypair pk sk of a; pred el/1;"
)


def T(text):
    return parse_term(text, VOCAB)


def A(text):
    return parse_assertion(text, VOCAB)


@pytest.fixture(scope="session")
def example1():
    return load("example1.spa")


@pytest.fixture(scope="session")
def protocol1(example1):
    return example1.protocol()

# names used by spa.generators
GEN_VOCAB = parse("mode extended; agents i; intruder i; names n0, n1, n2; key k0, k1; keypair pk0 sk0;")
