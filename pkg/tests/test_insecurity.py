from spa.insecurity import EXHAUSTED, FOUND, NONE, TypeUniverse, find_attack, zap_context, small_subst
from spa.protocol import is_attack, validate_run
from spa.speclang import load
from spa.terms import dagsize


def test_one_session_is_safe(example1, protocol1):
    r = find_attack(protocol1, example1.attacks["secret_m"].goal, 1)
    assert r.status == NONE and r.run is None


def test_node_budget_reports_exhaustion(example1, protocol1):
    r = find_attack(protocol1, example1.attacks["secret_m"].goal, 3, max_nodes=10)
    assert r.status == EXHAUSTED


def test_found_attack_is_self_consistent(example1, protocol1):
    goal = example1.attacks["secret_m"].goal
    r = find_attack(protocol1, goal, 3)
    assert r.status == FOUND
    rep = validate_run(protocol1, r.run)
    assert rep.valid
    assert is_attack(protocol1, r.run, goal, rep) is not None
    assert r.zap.ok and r.zap.bounded


def test_zapping_respects_universe_bound(example1, protocol1):
    r = find_attack(protocol1, example1.attacks["secret_m"].goal, 3)
    ctx = zap_context(protocol1, r.run, r.report)
    lam = small_subst(ctx, r.run.sigma)
    assert all(dagsize(t) <= len(ctx.universe.D) for t in lam.values())
    assert isinstance(ctx.universe, TypeUniverse)


def test_reused_ciphertext_leaks_vote():
    spec = load("disje.spa")
    r = find_attack(spec.protocol(), spec.attacks["vote_revealed"].goal, 1)
    assert r.status == FOUND
    assert len(r.run.events) == 2


def test_foo_keeps_vote_secret_for_two_sessions():
    spec = load("foo.spa")
    r = find_attack(spec.protocol(), spec.attacks["vote_secrecy"].goal, 2)
    assert r.status == NONE


def test_threads_do_not_change_the_answer(example1, protocol1):
    goal = example1.attacks["secret_m"].goal
    a = find_attack(protocol1, goal, 3, threads=1)
    b = find_attack(protocol1, goal, 3, threads=4)
    assert a.status == b.status == FOUND
    assert a.run.to_json() == b.run.to_json()
