"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or
``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import random
import sys
import time
from collections import Counter
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from heraklit import model_path  # noqa: E402
from heraklit.composition import canonical_equal, compose, flatten, flatten_module  # noqa: E402
from heraklit.dsl import format_model, parse_model  # noqa: E402
from heraklit.errors import CompositionError  # noqa: E402
from heraklit.invariants import explore  # noqa: E402
from heraklit.mining import analyze, export_log  # noqa: E402
from heraklit.petri import enabled_bindings, evaluate_arcs, instantiate, schema_to_json  # noqa: E402
from heraklit.runs import (  # noqa: E402
    Scenario,
    replay_problems,
    run_signature,
    simulate,
    topological_orders,
    verify_run,
)
from heraklit.service_system import RESOURCE_PLACES, default_instantiation  # noqa: E402

from casestudy import HAPPY, REJECTION, REJECTION_ROOMS, SYSTEM, arrivals, flat_net  # noqa: E402
from netgen import brute_force_bindings, random_binding_instance, random_triple  # noqa: E402

RESULTS: list[str] = []


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} {title}: {'PASS' if ok else 'FAIL'} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


# 1 -------------------------------------------------------------------------


def test_criterion_1_associativity():
    rng = random.Random(2024)
    t0 = time.perf_counter()
    both = one_sided = neither = 0
    bad: list[str] = []
    while both < 500:
        a, b, c = random_triple(rng)
        try:
            left = compose(compose(a, b), c)
        except CompositionError as exc:
            left, lerr = None, str(exc)
        try:
            right = compose(a, compose(b, c))
        except CompositionError as exc:
            right, rerr = None, str(exc)
        if left is not None and right is not None:
            both += 1
            if not canonical_equal(left, right):
                bad.append("canonical forms differ")
            elif schema_to_json(flatten(left)) != schema_to_json(flatten(right)):
                bad.append("flattened nets differ")
        elif left is None and right is None:
            neither += 1
        else:
            one_sided += 1
            if "duplicate label" not in (rerr if left is not None else lerr):
                bad.append("one bracketing failed for a reason other than a duplicate label")
    elapsed = time.perf_counter() - t0
    report(
        1,
        "associativity",
        not bad and elapsed < 30,
        f"{both} triples defined both ways, {one_sided} only one way (duplicate labels), "
        f"{neither} neither; {len(bad)} mismatches; {elapsed:.1f}s < 30s",
    )


# 2 -------------------------------------------------------------------------


def happy_run(net):
    return simulate(net, HAPPY)


def test_criterion_2_happy_path():
    net = flat_net()
    t0 = time.perf_counter()
    res = happy_run(net)
    elapsed = time.perf_counter() - t0
    counts = Counter(e.transition for e in res.run.events)
    resources = res.marking.restrict(RESOURCE_PLACES).to_json()
    expected = {"G": ["e1", "e2"], "P": ["a1"], "R": ["e1", "e2"], "S": ["r1"]}
    ok = (
        counts == Counter("abjdfhige")
        and resources == expected
        and resources == net.initial_marking.restrict(RESOURCE_PLACES).to_json()
        and verify_run(net, res.run)
        and elapsed < 1.0
    )
    report(2, "happy path", ok, f"events {''.join(e.transition for e in res.run.events)}, "
           f"resources {resources}, {elapsed * 1000:.0f}ms < 1s")


# 3 -------------------------------------------------------------------------


def test_criterion_3_rejection():
    net = flat_net(REJECTION_ROOMS)
    res = simulate(net, REJECTION)
    events = res.run.events
    ks = [e for e in events if e.transition == "k"]
    problems = []
    if len(ks) != 1:
        problems.append(f"k fired {len(ks)} times")
    else:
        (k,) = ks
        # marking just before k: replay the recorded prefix
        m = net.initial_marking
        for e in events[: k.index]:
            t = net.transitions[e.transition]
            m = m.apply(evaluate_arcs(t.inputs, net.schema, net.structure, e.binding),
                        evaluate_arcs(t.outputs, net.schema, net.structure, e.binding))
        f_s = net.structure.functions["f"][(k.binding["s"],)]
        if len(f_s) < 2 or not all(m.count("T", x) for x in f_s):
            problems.append("not every expert of f(s) had its twin in T when k fired")
        exits = [e for e in events if e.transition == "c"]
        if [e.binding["c"] for e in exits] != [k.binding["c"]]:
            problems.append("the turned-away client did not leave via c")
        mined = analyze(export_log(res.run)).turned_away_count
        if mined != len(ks):
            problems.append(f"turnedAwayCount {mined} != {len(ks)}")
    ok = not problems and verify_run(net, res.run)
    detail = "; ".join(problems) or (
        f"k once for client {ks[0].binding['c'].name} with f(s2)={{e1,e2}} in T, "
        f"exit via c, turnedAwayCount 1, seed {REJECTION.seed}, rooms {list(REJECTION_ROOMS)}"
    )
    report(3, "rejection path", ok, detail)


# 4 -------------------------------------------------------------------------


def test_criterion_4_invariant_exploration():
    import json

    net = flat_net()
    doc = json.loads(Path(model_path("two_clients.json")).read_text())
    scenarios = [Scenario.from_json(doc, net), arrivals(("c1", "s1"), ("c2", "s2")), arrivals(("c1", "s2"), ("c2", "s2"))]
    t0 = time.perf_counter()
    reports = [explore(net, s.workload, SYSTEM.invariants, 100_000, RESOURCE_PLACES) for s in scenarios]
    elapsed = time.perf_counter() - t0
    names = {"twin", "experts", "rooms", "rejection", "typing"}
    ok = (
        all(r.ok for r in reports)
        and all(set(r.violations) == names for r in reports)
        and elapsed < 60
    )
    states = ", ".join(str(r.states) for r in reports)
    report(4, "invariant exploration", ok,
           f"3 two-request scenarios, {states} states, 5 invariants hold everywhere, {elapsed:.2f}s < 60s")


# 5 -------------------------------------------------------------------------


def small_runs():
    """Distinct runs of at most ten events over both structures."""
    seen = set()
    workloads = [
        [("c1", "s1")],
        [("c1", "s2")],
        [("c1", "s1"), ("c2", "s2")],
        [("c1", "s2"), ("c2", "s2")],
        [("c1", "s1"), ("c2", "s1"), ("c3", "s2")],
    ]
    for rooms in (("r1",), REJECTION_ROOMS):
        net = flat_net(rooms)
        for pairs in workloads:
            for seed in range(6):
                run = simulate(net, arrivals(*pairs, seed=seed, max_steps=10)).run
                key = (rooms, run_signature(run))
                if key not in seen:
                    seen.add(key)
                    yield net, run


def test_criterion_5_all_orders_replay():
    runs = orders = failures = 0
    for net, run in small_runs():
        assert len(run.events) <= 10
        runs += 1
        for order in topological_orders(run):
            orders += 1
            failures += bool(replay_problems(net, run, order))
    report(5, "run semantics", failures == 0 and runs > 0,
           f"{runs} runs, {orders} topological orders, {failures} failed replays")


# 6 -------------------------------------------------------------------------


def test_criterion_6_binding_oracle():
    rng = random.Random(6)
    instances = agree = nonempty = 0
    for _ in range(300):
        net, m, t = random_binding_instance(rng)
        got = enabled_bindings(net, m, t)
        instances += 1
        agree += got == brute_force_bindings(net, m, t)
        nonempty += bool(got)
    report(6, "binding oracle", agree == instances >= 100,
           f"{agree}/{instances} instances agree with brute force, {nonempty} with enabled bindings")


# 7 -------------------------------------------------------------------------


def test_criterion_7_flattening_coherence():
    c, a, r, e = SYSTEM.modules
    bracketings = {
        "flat": SYSTEM.composed,
        "right-nested": compose(c, compose(a, compose(r, e))),
        "balanced": compose(compose(c, a), compose(r, e)),
    }
    stepwise = flatten_module(compose(flatten_module(compose(flatten_module(compose(c, a)), r)), e)).inner
    problems = []
    for label, scenario, rooms in (("happy", HAPPY, ("r1",)), ("rejection", REJECTION, REJECTION_ROOMS)):
        st = default_instantiation(SYSTEM.signature, rooms)
        reference = simulate(instantiate(flatten(SYSTEM.composed), st), scenario)
        nets = {name: instantiate(flatten(m), st) for name, m in bracketings.items()}
        nets["stepwise"] = instantiate(stepwise, st)
        for name, net in nets.items():
            res = simulate(net, scenario)
            if run_signature(res.run) != run_signature(reference.run) or res.marking != reference.marking:
                problems.append(f"{label}/{name}")
    report(7, "flattening coherence", not problems,
           "; ".join(problems) or "happy and rejection runs identical for 3 bracketings and stepwise flattening")


# 8 -------------------------------------------------------------------------


def test_criterion_8_dsl_round_trip():
    source = Path(model_path()).read_text(encoding="utf-8")
    model = parse_model(source)
    parsed = model.system("service")
    reparsed = parse_model(format_model(model)).system("service")
    ok = (
        canonical_equal(parsed, SYSTEM.composed)
        and canonical_equal(reparsed, parsed)
        and model.structure("default") == SYSTEM.default_structure
    )
    report(8, "DSL round trip", ok, "service_system.hkl == build_system(), print/reparse stable")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
