from hypothesis import strategies as st

from spa.terms import KEY, QUANT, Enc, Name, Pair, Var

NAMES = [Name("n0"), Name("n1"), Name("k0", KEY), Name("pk0", KEY, "sk0"), Name("sk0", KEY, "pk0")]
KEYS = [n for n in NAMES if n.is_key]
VARS = [Var("x"), Var("y"), Var("z", QUANT)]

atoms = st.sampled_from(NAMES)
keys = st.sampled_from(KEYS)


def terms(leaves=atoms, max_leaves=8):
    return st.recursive(
        leaves,
        lambda kids: st.one_of(
            st.builds(Pair, kids, kids),
            st.builds(Enc, kids, keys),
        ),
        max_leaves=max_leaves,
    )


ground_terms = terms()
open_terms = terms(st.one_of(atoms, st.sampled_from(VARS)))
