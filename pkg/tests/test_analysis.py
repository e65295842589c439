import random

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from cpsvuln.analysis import (
    AttackChain,
    Degradation,
    ImpactResult,
    actuation_endpoints,
    attack_surface,
    can_follow,
    enumerate_chains,
    find_chains,
    impact,
    improves,
)
from cpsvuln.graph import GraphLookupError, to_graph
from cpsvuln.matcher import Evidence, QueryTerm, match_model
from cpsvuln.modelfmt import ConnectionKind, load_example_fcs
from cpsvuln.schema import Category, is_attack_surface
from cpsvuln.vulndb import AttackVector, Effect, Privilege, load_fixture_store, lookup

from generators import random_model, random_vector, seeds
from oracles import brute_force_chains, chain_rule

SERVOS = {"servo_aileron", "servo_elevator", "servo_rudder", "servo_throttle"}


@pytest.fixture(scope="module")
def fcs():
    return load_example_fcs()


@pytest.fixture(scope="module")
def graph(fcs):
    return to_graph(fcs)


@pytest.fixture(scope="module")
def store():
    return load_fixture_store()


@pytest.fixture(scope="module")
def evidence(fcs, store):
    return match_model(fcs, store)


def ev(component: str, vector: AttackVector) -> Evidence:
    term = QueryTerm("placeholder", component, Category.HARDWARE, "placeholder")
    return Evidence(component, vector, term, "summary", frozenset(vector.weakness_ids), frozenset(vector.pattern_ids))


def vec(ident, effect=Effect.PRIVILEGE_GAIN, required="none", gained="user", ui=False):
    return AttackVector(ident, "text", required_privilege=required, gained_privilege=gained,
                        requires_user_interaction=ui, effect=effect)


def test_gps_chain(evidence, graph):
    chains = find_chains(evidence["gps"], graph)
    assert [c.vector_ids for c in chains] == [("CVE-2016-3801", "CVE-2016-6788")]
    first, second = chains[0].steps
    assert first.vector.requires_user_interaction and not second.vector.requires_user_interaction
    assert chains[0].entry_component == "gps"
    assert len(chains[0].narrative) == 2


def test_whole_model_chains(evidence, graph):
    flat = [e for ev_ in evidence.values() for e in ev_]
    assert [c.vector_ids for c in find_chains(flat, graph)] == [("CVE-2016-3801", "CVE-2016-6788")]


def test_single_item_has_no_chain(evidence, graph):
    assert find_chains(evidence["gps"][:1], graph) == []


def test_chain_needs_two_steps(evidence):
    with pytest.raises(ValueError):
        AttackChain(tuple(evidence["gps"][:1]))


def test_equal_vectors_never_chain(graph):
    items = [ev("gps", vec(f"CVE-2000-{i:04d}")) for i in range(5)]
    assert find_chains(items, graph) == []


def test_non_adjacent_components_do_not_chain(graph):
    a = ev("gps", vec("CVE-2000-0001", ui=True))
    b = ev("safety_switch", vec("CVE-2000-0002", gained="system"))
    assert not graph.adjacent("gps", "safety_switch")
    assert find_chains([a, b], graph) == []
    c = ev("primary_processor", vec("CVE-2000-0002", gained="system"))
    assert [ch.vector_ids for ch in find_chains([a, c], graph)] == [("CVE-2000-0001", "CVE-2000-0002")]


def test_required_privilege_blocks(graph):
    a = ev("gps", vec("CVE-2000-0001", gained="user"))
    b = ev("gps", vec("CVE-2000-0002", required="system", gained="system"))
    assert not can_follow(a, b, graph)


def test_improves_axes():
    base = vec("CVE-2000-0001", ui=True)
    assert improves(base, vec("CVE-2000-0002", ui=False))
    assert improves(base, vec("CVE-2000-0003", gained="system", ui=True))
    assert improves(base, vec("CVE-2000-0004", effect=Effect.CODE_EXECUTION, ui=True))
    assert not improves(base, vec("CVE-2000-0005", ui=True))


def test_cyclic_follow_relation_is_bounded(graph):
    # a <-> b improve on each other via different axes; simple paths stop the cycle
    a = ev("gps", vec("CVE-2000-0001", gained="system", ui=True))
    b = ev("gps", vec("CVE-2000-0002", effect=Effect.CODE_EXECUTION, gained="user", ui=False))
    chains = find_chains([a, b], graph)
    assert all(len(set(c.vector_ids)) == len(c.vector_ids) for c in chains)


def _random_evidence(rng: random.Random, n_items: int):
    while True:
        model = random_model(rng, 8, awkward=False)
        if model.components:
            break
    graph = to_graph(model)
    ids = [c.id for c in model.components]
    items = [ev(rng.choice(ids), random_vector(rng, i)) for i in range(n_items)]
    return graph, items


@settings(max_examples=40, deadline=None)
@given(seeds(), st.integers(0, 9))
def test_chains_equal_brute_force(rng, n_items):
    graph, items = _random_evidence(rng, n_items)
    found = [tuple((s.component, s.vector_id) for s in c.steps) for c in find_chains(items, graph, max_steps=3)]
    assert found == brute_force_chains(items, graph.adjacent, 3)


@settings(max_examples=25, deadline=None)
@given(seeds(), st.integers(10, 20))
def test_pairs_equal_brute_force_up_to_20_items(rng, n_items):
    graph, items = _random_evidence(rng, n_items)
    found = [tuple((s.component, s.vector_id) for s in c.steps) for c in find_chains(items, graph, max_steps=2)]
    assert found == brute_force_chains(items, graph.adjacent, 2)


@settings(max_examples=40, deadline=None)
@given(seeds(), st.integers(2, 12))
def test_every_chain_is_sound(rng, n_items):
    graph, items = _random_evidence(rng, n_items)
    for chain in find_chains(items, graph):
        for a, b in zip(chain.steps, chain.steps[1:]):
            assert chain_rule(a, b, graph.adjacent)


@settings(max_examples=25, deadline=None)
@given(seeds(), st.integers(5, 30), st.integers(1, 50))
def test_truncation_keeps_canonical_prefix(rng, n_items, cap):
    graph, items = _random_evidence(rng, n_items)
    full, full_cut = enumerate_chains(items, graph, max_steps=3, max_chains=None)
    some, cut = enumerate_chains(items, graph, max_steps=3, max_chains=cap)
    assert not full_cut
    assert some == full[:cap]
    assert cut == (len(full) > cap)


def test_processor_code_execution_full(graph, store):
    result = impact(graph, ev("primary_processor", lookup(store, "CVE-2016-6788")))
    assert result.degradation is Degradation.FULL
    assert SERVOS <= result.violated
    assert result.actuation_endpoints == SERVOS
    assert ("primary_processor", "safety_switch") in {(s, t) for _, s, t in result.tainted_links}
    assert all(s in result.violated for _, s, _ in result.tainted_links)


def test_radio_dos_partial(graph, evidence):
    for e in evidence["radio"]:
        result = impact(graph, e)
        assert result.violated == {"radio"}
        assert result.degradation is Degradation.PARTIAL
        severed = {(s, t) for _, s, t in result.severed_links}
        assert {("radio", "ground_station"), ("ground_station", "radio")} <= severed
        assert ("power_system", "radio") not in severed


def test_information_disclosure_isolated(graph):
    result = impact(graph, ev("magnetometer", vec("CVE-2000-0001", effect=Effect.INFORMATION_DISCLOSURE, gained="none")))
    assert result.violated == {"magnetometer"}
    assert result.degradation is Degradation.NONE


def test_unknown_component(graph):
    with pytest.raises(GraphLookupError):
        impact(graph, ev("ghost", vec("CVE-2000-0001")))


def test_actuation_endpoints_are_servos(graph):
    assert actuation_endpoints(graph) == SERVOS


def test_impact_dict_round_trip(graph, evidence):
    for e in evidence["gps"] + evidence["radio"]:
        r = impact(graph, e)
        assert ImpactResult.from_dict(r.to_dict()) == r


@settings(max_examples=60, deadline=None)
@given(seeds())
def test_impact_matches_bfs_oracle(rng):
    graph, items = _random_evidence(rng, 6)
    g = nx.MultiDiGraph()
    g.add_nodes_from(graph.V)
    g.add_edges_from((graph.src[p], graph.tgt[p]) for p in graph.P)
    endpoints = actuation_endpoints(graph)
    for e in items:
        r = impact(graph, e)
        v = e.vector
        control = v.effect is Effect.CODE_EXECUTION or (
            v.effect is Effect.PRIVILEGE_GAIN and v.gained_privilege is Privilege.SYSTEM)
        expected = (nx.descendants(g, e.component) | {e.component}) if control else {e.component}
        assert r.violated == expected
        assert e.component in r.violated
        assert (r.degradation is Degradation.FULL) == (bool(endpoints) and endpoints <= r.violated)
        if v.effect is Effect.DENIAL_OF_SERVICE:
            for port, s, t in r.severed_links:
                assert e.component in (s, t)
                assert graph.A_p[port].kind is not ConnectionKind.PHYSICAL


def test_attack_surface_fixture(fcs):
    assert attack_surface(fcs) == ["gps", "radio"]


@settings(max_examples=80, deadline=None)
@given(seeds())
def test_attack_surface_equals_filter(rng):
    model = random_model(rng)
    assert attack_surface(model) == [c.id for c in model.components if is_attack_surface(c)]
    assert attack_surface(model) == [c.id for c in model.components if c.record.entry_points]
