import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from cdpta.generators import gen_oneclock, gen_robot, lin
from cdpta.graph import SELF_LOOP, ValidationRequired, build, explore, stats
from cdpta.model import CdPta, Clock, Location, Outcome, ProbEdge, atom, conj, valuation
from cdpta.regions import corners, eval_template_at_corner, region_satisfies

from random_models import random_cdpta


@pytest.fixture(scope="module")
def oneclock():
    return gen_oneclock()


def test_oneclock_k1_stats(oneclock):
    mdp = build(oneclock, 1, [oneclock.location_id("D")])
    assert stats(mdp) == {"numStates": 10, "numActions": 20, "numTransitions": 21}


def test_targets_do_not_change_state_count(oneclock):
    plain = explore(oneclock, 2)
    with_target = build(oneclock, 2, [oneclock.location_id("D")])
    assert len(plain.states) == len(with_target.states)
    assert [s for s in plain.states] == [s for s in with_target.states]


def test_initial_state_actions_k1(oneclock):
    """From (A, x=0): delay to x=0 or 0<x<1, take the A-edge at a corner."""
    mdp = build(oneclock, 1)
    A = oneclock.location_id("A")
    a_edge = oneclock.edges_by_source[A][0]
    got = {(mdp.states[a.delay_target].region.format(["x"]), a.edge, a.corner) for a, _ in mdp.actions(0)}
    assert got == {
        ("k=1;h=x:0;classes=[{x}]", a_edge, valuation(0)),
        ("k=1;h=x:0;classes=[{}|{x}]", a_edge, valuation(0)),
        ("k=1;h=x:0;classes=[{}|{x}]", a_edge, valuation(1)),
    }


def test_k2_half_corner_action(oneclock):
    mdp = build(oneclock, 2)
    names = {mdp.state_label(s): s for s in range(len(mdp.states))}
    dists = [
        {mdp.state_label(t): p for t, p in dist}
        for a, dist in mdp.actions(0)
        if mdp.state_label(a.delay_target) == "A k=2;h=x:0;classes=[{}|{x}]" and a.corner == valuation(F(1, 2))
    ]
    assert dists == [{"B k=2;h=x:0;classes=[{}|{x}]": F(1, 2), "E k=2;h=x:0;classes=[{}|{x}]": F(1, 2)}]
    assert "B k=2;h=x:0;classes=[{}|{x}]" in names


def test_degenerate_single_location():
    m = CdPta((Clock(0, "x"),), (Location(0, "only", conj(atom(0, "<=", 1))),), 0, ())
    mdp = build(m, 1)
    assert len(mdp.states) == 3
    assert mdp.deadlocks()
    acts = mdp.actions(0)
    assert len(acts) == 1 and acts[0][0].edge == SELF_LOOP and acts[0][1] == ((0, 1),)


def test_single_state_when_time_cannot_pass():
    m = CdPta((Clock(0, "x"),), (Location(0, "only", conj(atom(0, "<=", 0))),), 0, ())
    mdp = build(m, 3)
    assert mdp.stats() == {"numStates": 1, "numActions": 1, "numTransitions": 1}


def test_invalid_model_refused():
    locs = (Location(0, "a", conj(atom(0, "<", 1))), Location(1, "b", conj(atom(0, "<", 1))))
    edge = ProbEdge(0, conj(atom(0, "<", 1)), (Outcome(frozenset(), 1, ((0, lin(0, 1, 0, 1)),)),))
    m = CdPta((Clock(0, "x"),), locs, 0, (edge,))
    with pytest.raises(ValidationRequired):
        build(m, 1)


def test_bad_granularity(oneclock):
    with pytest.raises(ValueError):
        build(oneclock, 0)


def test_deterministic_build():
    m = gen_robot(6)
    a, b = build(m, 2, [m.location_id("OK")]), build(m, 2, [m.location_id("OK")])
    assert a.states == b.states and a.succ == b.succ and a.edge_actions == b.edge_actions


def check_mdp(model, mdp):
    for s, st_ in enumerate(mdp.states):
        assert region_satisfies(st_.region, model.locations[st_.location].invariant)
        acts = mdp.actions(s)
        assert acts
        for a, dist in acts:
            assert sum(p for _, p in dist) == 1
            assert all(p > 0 for _, p in dist)
            if a.edge == SELF_LOOP:
                assert mdp.is_absorbing(s)
                continue
            # the composite action's probabilities come from the corner template
            t = mdp.states[a.delay_target]
            assert a.corner in corners(t.region)
            assert region_satisfies(t.region, model.guards[a.edge])
            probs = eval_template_at_corner(model.edges[a.edge], a.corner)
            assert sum(probs.values()) == 1


@pytest.mark.parametrize("k", [1, 2, 4])
def test_distributions_and_invariants_oneclock(oneclock, k):
    check_mdp(oneclock, build(oneclock, k, [oneclock.location_id("D")]))


def test_distributions_and_invariants_robot():
    m = gen_robot(5)
    check_mdp(m, build(m, 1, [m.location_id("OK")]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 2))
def test_distributions_random_models(seed, k):
    m = random_cdpta(random.Random(seed))
    check_mdp(m, build(m, k, [len(m.locations) - 1]))
