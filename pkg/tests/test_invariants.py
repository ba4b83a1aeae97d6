import json
from dataclasses import replace
from pathlib import Path

import pytest

from heraklit import model_path
from heraklit.algebra import Const
from heraklit.invariants import AbsentAtFiring, PlaceSum, explore
from heraklit.petri import Spread, instantiate
from heraklit.runs import Scenario
from heraklit.service_system import RESOURCE_PLACES, service_invariants

from casestudy import arrivals, flat_net

INVARIANTS = service_invariants()


def run(net, scenario, invariants=INVARIANTS, **kw):
    return explore(net, scenario.workload, invariants, resource_places=RESOURCE_PLACES, **kw)


def mutant(**initial):
    """Flattened net with extra initial items."""
    net = flat_net()
    schema = net.schema
    merged = dict(schema.initial)
    for place, items in initial.items():
        merged[place] = merged.get(place, ()) + items
    return instantiate(replace(schema, initial=merged), net.structure)


@pytest.mark.parametrize(
    "pairs, states",
    [
        ([("c1", "s1"), ("c2", "s2")], 116),
        ([("c1", "s2"), ("c2", "s2")], 138),
    ],
)
def test_two_requests_explored_exhaustively(pairs, states):
    report = run(flat_net(), arrivals(*pairs))
    assert report.ok, report.violations
    assert report.states == states and not report.truncated
    assert report.terminal_states == 1


def test_shipped_two_client_scenario():
    net = flat_net()
    doc = json.loads(Path(model_path("two_clients.json")).read_text())
    report = run(net, Scenario.from_json(doc, net))
    assert report.ok
    assert set(report.violations) == {"twin", "experts", "rooms", "rejection", "typing"}
    assert report.firings["k"] > 0  # rejection is reachable and the soundness check is exercised


def test_three_clients_two_rooms():
    report = run(flat_net(("r1", "r2")), arrivals(("c1", "s2"), ("c2", "s2"), ("c3", "s1")))
    assert report.ok
    assert report.states == 4695
    assert report.firings["k"] > 0


def test_broken_twin_discipline_is_caught():
    report = run(mutant(T=(Spread(Const("EX")),)), arrivals(("c1", "s1")))
    assert report.violations["twin"]
    # with both twins in T from the start, k fires while the experts are idle in R
    assert report.violations["rejection"]
    assert not report.ok


def test_extra_expert_breaks_conservation():
    report = run(mutant(G=(Spread(Const("EX")),)), Scenario())
    assert report.violations["experts"] == [
        "experts: e1 occurs 2 times, expected 1",
        "experts: e2 occurs 2 times, expected 1",
    ]


def test_counting_the_message_copy_on_h_fails():
    """H holds a copy of the (expert, room) pair while R/T and S still account for it."""
    double = (
        PlaceSum("experts+H", "EX", (("G", None), ("H", 0), ("I", 0), ("InConsult", 1), ("J", 0)), 1),
        PlaceSum("rooms", "RO", (("S", None), ("H", 1), ("I", 1), ("InConsult", 2), ("J", 1)), 1),
    )
    report = run(flat_net(), arrivals(("c1", "s1")), double)
    assert report.violations["experts+H"]
    assert not report.violations["rooms"]


def test_unrestored_resources_are_reported():
    net = flat_net()
    schema = net.schema
    g = schema.transitions["g"]
    leaky = replace(g, outputs={p: items for p, items in g.outputs.items() if p != "S"})
    net = instantiate(replace(schema, transitions=dict(schema.transitions, g=leaky)), net.structure)
    report = run(net, arrivals(("c1", "s1")))
    assert report.unrestored_terminals == 1
    assert report.violations["rooms"]


def test_truncation_is_not_ok():
    report = run(flat_net(), arrivals(("c1", "s1"), ("c2", "s2")), max_states=10)
    assert report.truncated and report.states == 10
    assert not report.ok


def test_descriptions_are_dsl_text():
    assert [i.describe() for i in INVARIANTS] == [
        "invariant twin over EX: R + T = 1;",
        "invariant experts over EX: G + I[0] + InConsult[1] + J[0] = 1;",
        "invariant rooms over RO: S + H[1] + I[1] + InConsult[2] + J[1] = 1;",
        "invariant rejection on k: absent f(s) from R;",
    ]


def test_absent_at_firing_ignores_other_transitions():
    inv = AbsentAtFiring("x", "k", Const("EX"), "R")
    net = flat_net()
    assert inv.check_firing(net, net.initial_marking, "j", {}) == []
    assert inv.check_firing(net, net.initial_marking, "k", {}) == ["x: k fired under {} with e1, e2 on R"]


def test_place_sum_over_basic_sort():
    inv = PlaceSum("rooms-by-sort", "R", (("S", None),), 1)
    net = flat_net()
    assert inv.check(net, net.initial_marking) == []
