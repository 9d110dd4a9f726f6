import copy

import pytest

from spa.errors import InvalidRun, MalformedProtocol
from spa.generators import oversized_run, random_run, rng_for
from spa.insecurity import verify_zap_preservation
from spa.protocol import instantiate_session, is_attack, run_from_json, validate_run
from spa.speclang import parse_assertion, parse_term
from spa.terms import Name

# the three-session attack on example1, written by hand
FIG1 = {
    "sessions": [
        {"tag": 1, "role": "eta1", "actor": "a"},
        {"tag": 2, "role": "eta2", "actor": "b"},
        {"tag": 3, "role": "eta2", "actor": "b"},
    ],
    "events": [[0, 0], [1, 0], [2, 0]],
    "sigma": {"?x_2": "pk_i", "?y_2": "(pk_a, {m}pk_b)", "?x_3": "pk_i", "?y_3": "m"},
}


def load_run(spec, protocol, d):
    return run_from_json(protocol, d, lambda s: parse_term(s, spec))


def test_hand_built_attack_is_valid(example1, protocol1):
    run = load_run(example1, protocol1, FIG1)
    rep = validate_run(protocol1, run)
    assert rep.valid, rep.failure
    goal = example1.attacks["secret_m"].goal
    assert is_attack(protocol1, run, goal, rep) is not None
    assert len(rep.trace) == 4


def test_prefix_is_not_an_attack(example1, protocol1):
    d = copy.deepcopy(FIG1)
    d["events"] = d["events"][:2]
    d["sigma"] = {k: v for k, v in d["sigma"].items() if k.endswith("_2")}
    run = load_run(example1, protocol1, d)
    assert validate_run(protocol1, run).valid
    assert is_attack(protocol1, run, example1.attacks["secret_m"].goal) is None


def test_underivable_message_invalidates_run(example1, protocol1):
    d = copy.deepcopy(FIG1)
    d["sigma"]["?y_3"] = "sk_b"  # the intruder cannot build {(pk_i, {sk_b}pk_b)}pk_b
    rep = validate_run(protocol1, load_run(example1, protocol1, d))
    assert not rep.valid and rep.failure


def test_out_of_order_events(example1, protocol1):
    d = copy.deepcopy(FIG1)
    d["events"] = [[0, 1]]
    with pytest.raises(InvalidRun):
        validate_run(protocol1, load_run(example1, protocol1, d))


def test_actor_must_play_role(protocol1):
    with pytest.raises(MalformedProtocol):
        instantiate_session(protocol1, "eta2", Name("a", "agent"), {}, 1)


def test_sessions_are_renamed_apart(protocol1):
    s1 = instantiate_session(protocol1, "eta2", Name("b", "agent"), {}, 1)
    s2 = instantiate_session(protocol1, "eta2", Name("b", "agent"), {}, 2)
    assert s1.free_vars().isdisjoint(s2.free_vars())


def test_run_json_round_trip(example1, protocol1):
    run = load_run(example1, protocol1, FIG1)
    again = load_run(example1, protocol1, run.to_json())
    assert again.to_json() == run.to_json()


def test_oversized_run_zaps_to_spare(protocol1):
    run = oversized_run(protocol1)
    z = verify_zap_preservation(protocol1, run)
    assert z.ok, z.failures
    assert z.bounded
    assert z.size_after < z.size_before
    assert protocol1.spare in z.sigma_star.values()


def test_fig1_run_survives_zapping(example1, protocol1):
    run = load_run(example1, protocol1, FIG1)
    goal = example1.attacks["secret_m"].goal
    z = verify_zap_preservation(protocol1, run, goal=goal)
    assert z.ok, z.failures


@pytest.mark.parametrize("seed", range(15))
def test_random_runs_validate(protocol1, seed):
    run = random_run(rng_for(seed), protocol1, oversize=seed % 2 == 1)
    if run is None:
        pytest.skip("generator produced no run")
    assert validate_run(protocol1, run).valid
    assert verify_zap_preservation(protocol1, run).ok
