"""Simulation, concurrent (partially ordered) runs, replay and linearization.

A run is recorded in occurrence-net shape: every token that ever exists is
a :class:`Condition` with at most one producing and one consuming
:class:`Event`. The causal order between events is the transitive closure
of "produces a condition consumed by". Event indices record the order the
simulator happened to pick; only the partial order is meaningful.
"""

from __future__ import annotations

import json
import random
from collections import Counter, deque
from dataclasses import dataclass, replace
from typing import Iterator, Mapping, Sequence

from heraklit.algebra import Value, eval_term, format_value, parse_value, value_key
from heraklit.errors import ModelError, RunError
from heraklit.petri import (
    Marking,
    Net,
    binding_fits,
    binding_key,
    enabled_bindings,
    evaluate_arcs,
    fire,
    format_binding,
    is_enabled,
)

INITIAL = None


@dataclass(frozen=True)
class Event:
    id: int
    transition: str
    binding: Mapping[str, Value]
    index: int
    consumed: tuple[int, ...] = ()
    produced: tuple[int, ...] = ()


@dataclass(frozen=True)
class Condition:
    id: int
    place: str
    token: Value
    producer: int | None = INITIAL
    consumer: int | None = None


@dataclass(frozen=True)
class ConcurrentRun:
    events: tuple[Event, ...] = ()
    conditions: tuple[Condition, ...] = ()

    def predecessors(self) -> dict[int, set[int]]:
        """Immediate causal predecessors of every event."""
        by_id = {c.id: c for c in self.conditions}
        preds: dict[int, set[int]] = {}
        for ev in self.events:
            preds[ev.id] = {
                by_id[c].producer for c in ev.consumed if c in by_id and by_id[c].producer is not None
            }
        return preds

    def causally_before(self, x: int, y: int) -> bool:
        preds = self.predecessors()
        todo, seen = [y], set()
        while todo:
            for p in preds.get(todo.pop(), ()):
                if p == x:
                    return True
                if p not in seen:
                    seen.add(p)
                    todo.append(p)
        return False

    def initial_marking(self) -> Marking:
        return Marking(_multiset((c.place, c.token) for c in self.conditions if c.producer is None))

    def final_marking(self) -> Marking:
        return Marking(_multiset((c.place, c.token) for c in self.conditions if c.consumer is None))


def _multiset(pairs) -> dict[str, Counter]:
    out: dict[str, Counter] = {}
    for place, tok in pairs:
        out.setdefault(place, Counter())[tok] += 1
    return out


class _Recorder:
    """Builds a run while the simulator fires; consumes the oldest matching condition first."""

    def __init__(self, initial: Marking) -> None:
        self.events: list[Event] = []
        self.conditions: list[Condition] = []
        self.available: dict[tuple[str, Value], deque[int]] = {}
        for place, c in initial.items():
            for tok in sorted(c.elements(), key=value_key):
                self._new(place, tok, INITIAL)

    def _new(self, place: str, tok: Value, producer: int | None) -> int:
        cid = len(self.conditions)
        self.conditions.append(Condition(cid, place, tok, producer))
        self.available.setdefault((place, tok), deque()).append(cid)
        return cid

    def record(self, net: Net, transition: str, b: Mapping[str, Value]) -> None:
        t = net.transitions[transition]
        eid = len(self.events)
        consumed, produced = [], []
        for place, c in sorted(evaluate_arcs(t.inputs, net.schema, net.structure, b).items()):
            for tok in sorted(c.elements(), key=value_key):
                cid = self.available[(place, tok)].popleft()
                self.conditions[cid] = replace(self.conditions[cid], consumer=eid)
                consumed.append(cid)
        for place, c in sorted(evaluate_arcs(t.outputs, net.schema, net.structure, b).items()):
            for tok in sorted(c.elements(), key=value_key):
                produced.append(self._new(place, tok, eid))
        self.events.append(Event(eid, transition, dict(b), eid, tuple(consumed), tuple(produced)))

    def run(self) -> ConcurrentRun:
        return ConcurrentRun(tuple(self.events), tuple(self.conditions))


# ---------------------------------------------------------------------------
# scenarios and simulation


@dataclass(frozen=True)
class Scenario:
    workload: tuple[tuple[str, Mapping[str, Value]], ...] = ()
    max_steps: int = 1000
    seed: int = 0

    @classmethod
    def from_json(cls, doc: Mapping, net: Net) -> "Scenario":
        """``{"workload": [{"transition", "binding"}], "maxSteps", "seed"}``."""
        sig = net.structure.signature
        workload = []
        for i, entry in enumerate(doc.get("workload", [])):
            name = entry["transition"]
            if name not in net.transitions:
                raise ModelError(f"workload entry {i}: unknown transition {name}")
            want = net.transitions[name].variables()
            raw = entry.get("binding", {})
            if set(raw) != want:
                raise ModelError(
                    f"workload entry {i}: binding must cover exactly {', '.join(sorted(want))}"
                )
            b = {v: parse_value(text, sig.variables[v]) for v, text in raw.items()}
            bad = [v for v, val in b.items() if not net.structure.inhabits(val, sig.variables[v])]
            if bad:
                raise ModelError(f"workload entry {i}: value of {', '.join(bad)} outside its carrier")
            workload.append((name, b))
        return cls(tuple(workload), int(doc.get("maxSteps", 1000)), int(doc.get("seed", 0)))

    def to_json(self) -> dict:
        return {
            "workload": [
                {"transition": t, "binding": {n: format_value(v) for n, v in sorted(b.items())}}
                for t, b in self.workload
            ],
            "maxSteps": self.max_steps,
            "seed": self.seed,
        }


COMPLETE, INCOMPLETE_WORKLOAD, STEP_LIMIT = "complete", "incomplete-workload", "step-limit"


@dataclass(frozen=True)
class SimulationResult:
    run: ConcurrentRun
    marking: Marking
    outcome: str
    workload_fired: int


def simulate(net: Net, scenario: Scenario) -> SimulationResult:
    """Play the token game under ``scenario``.

    The next workload entry fires as soon as it is enabled; otherwise one
    enabled (transition, binding) pair of a non-spontaneous transition is
    drawn uniformly from a stream seeded with ``scenario.seed``.
    """
    rng = random.Random(scenario.seed)
    internal = [t for _, t in sorted(net.transitions.items()) if not t.spontaneous]
    m = net.initial_marking
    rec = _Recorder(m)
    pos = 0
    workload = scenario.workload
    steps = 0
    while steps < scenario.max_steps:
        if pos < len(workload):
            name, b = workload[pos]
            if is_enabled(net, m, net.transitions[name], b):
                rec.record(net, name, b)
                m = fire(net, m, name, b)
                pos += 1
                steps += 1
                continue
        choices = [(t.name, b) for t in internal for b in enabled_bindings(net, m, t)]
        if not choices:
            break
        name, b = rng.choice(choices)
        rec.record(net, name, b)
        m = fire(net, m, name, b)
        steps += 1
    else:
        if pos == len(workload) and any(enabled_bindings(net, m, t) for t in internal):
            return SimulationResult(rec.run(), m, STEP_LIMIT, pos)
    outcome = COMPLETE if pos == len(workload) else INCOMPLETE_WORKLOAD
    return SimulationResult(rec.run(), m, outcome, pos)


# ---------------------------------------------------------------------------
# verification and linearization


def _structural_problems(net: Net, run: ConcurrentRun) -> list[str]:
    problems = []
    conds = {c.id: c for c in run.conditions}
    if len(conds) != len(run.conditions):
        problems.append("duplicate condition ids")
    if len({e.id for e in run.events}) != len(run.events):
        problems.append("duplicate event ids")
    consumers: dict[int, list[int]] = {}
    for ev in run.events:
        if ev.transition not in net.transitions:
            problems.append(f"event {ev.id}: unknown transition {ev.transition}")
        for cid in ev.consumed:
            consumers.setdefault(cid, []).append(ev.id)
            if cid not in conds:
                problems.append(f"event {ev.id} consumes unknown condition {cid}")
        for cid in ev.produced:
            if cid not in conds or conds[cid].producer != ev.id:
                problems.append(f"event {ev.id} produces condition {cid} not attributed to it")
    for cid, evs in consumers.items():
        if len(evs) > 1:
            problems.append(f"condition {cid} consumed by {len(evs)} events")
    produced_by = {cid: ev.id for ev in run.events for cid in ev.produced}
    for c in run.conditions:
        if c.place not in net.places:
            problems.append(f"condition {c.id} on unknown place {c.place}")
        if c.consumer is not None and consumers.get(c.id) != [c.consumer]:
            problems.append(f"condition {c.id} names consumer {c.consumer} inconsistently")
        if c.consumer is None and c.id in consumers:
            problems.append(f"condition {c.id} is consumed but records no consumer")
        if c.producer is not None and produced_by.get(c.id) != c.producer:
            problems.append(f"condition {c.id} names producer {c.producer} inconsistently")
    if run.initial_marking() != net.initial_marking:
        problems.append("initial conditions differ from the net's initial marking")
    return problems


def replay_problems(net: Net, run: ConcurrentRun, order: Sequence[int]) -> list[str]:
    """Fire the events of ``run`` in ``order``; report the first failure."""
    conds = {c.id: c for c in run.conditions}
    events = {e.id: e for e in run.events}
    if sorted(order) != sorted(events):
        return ["order is not a permutation of the run's events"]
    live = {c.id for c in run.conditions if c.producer is None}
    m = net.initial_marking
    for eid in order:
        ev = events[eid]
        t = net.transitions[ev.transition]
        where = f"event {eid} ({ev.transition} {format_binding(ev.binding)})"
        if not all(cid in live for cid in ev.consumed):
            return [f"{where} consumes a condition that is not yet available"]
        st = net.structure
        if not binding_fits(net, t, ev.binding) or (
            t.guard is not None and eval_term(t.guard, st, ev.binding) is not True
        ):
            return [f"{where} is not enabled"]
        need = evaluate_arcs(t.inputs, net.schema, st, ev.binding)
        if not m.contains(need):
            return [f"{where} is not enabled"]
        give = evaluate_arcs(t.outputs, net.schema, st, ev.binding)
        if _multiset((conds[c].place, conds[c].token) for c in ev.consumed) != need:
            return [f"{where} consumed conditions do not match its input arcs"]
        if _multiset((conds[c].place, conds[c].token) for c in ev.produced) != give:
            return [f"{where} produced conditions do not match its output arcs"]
        live -= set(ev.consumed)
        live |= set(ev.produced)
        m = m.apply(need, give)
    return []


def run_problems(net: Net, run: ConcurrentRun) -> list[str]:
    problems = _structural_problems(net, run)
    if problems:
        return problems
    try:
        order = [e.id for e in linearize(run, seed=None)]
    except RunError as exc:
        return [str(exc)]
    return replay_problems(net, run, order)


def verify_run(net: Net, run: ConcurrentRun) -> bool:
    """True iff ``run`` is an occurrence net of ``net`` that replays in causal order."""
    return not run_problems(net, run)


def linearize(run: ConcurrentRun, seed: int | None = 0) -> list[Event]:
    """A topological order of the causal partial order.

    Different seeds may give different orders; ``seed=None`` always picks the
    lowest ready index.
    """
    preds = run.predecessors()
    succs: dict[int, list[int]] = {e.id: [] for e in run.events}
    pending = {eid: len(p) for eid, p in preds.items()}
    for eid, ps in preds.items():
        for p in ps:
            if p not in succs:
                raise RunError(f"event {eid} depends on unknown event {p}")
            succs[p].append(eid)
    rng = random.Random(seed) if seed is not None else None
    ready = sorted(eid for eid, n in pending.items() if n == 0)
    events = {e.id: e for e in run.events}
    order: list[Event] = []
    while ready:
        pick = ready.pop(rng.randrange(len(ready)) if rng else 0)
        order.append(events[pick])
        for s in succs[pick]:
            pending[s] -= 1
            if pending[s] == 0:
                ready.append(s)
        ready.sort()
    if len(order) != len(run.events):
        raise RunError("causal order of the run is cyclic")
    return order


def topological_orders(run: ConcurrentRun) -> Iterator[list[int]]:
    """Every linearization of the run (exponential; for small runs only)."""
    preds = run.predecessors()
    ids = sorted(preds)

    def extend(prefix: list[int], done: set[int]) -> Iterator[list[int]]:
        if len(prefix) == len(ids):
            yield list(prefix)
            return
        for eid in ids:
            if eid not in done and preds[eid] <= done:
                prefix.append(eid)
                done.add(eid)
                yield from extend(prefix, done)
                done.discard(eid)
                prefix.pop()

    yield from extend([], set())


def run_signature(run: ConcurrentRun, rename: Mapping[str, str] | None = None) -> tuple:
    """Canonical form of a run: equal signatures mean the same events and token flow."""
    ren = (lambda n: rename.get(n, n)) if rename else (lambda n: n)
    return (
        tuple((ren(e.transition), binding_key(e.binding), e.consumed, e.produced) for e in run.events),
        tuple((ren(c.place), value_key(c.token), c.producer, c.consumer) for c in run.conditions),
    )


# ---------------------------------------------------------------------------
# export


def event_record(run: ConcurrentRun, ev: Event) -> dict:
    conds = {c.id: c for c in run.conditions}
    pair = lambda cid: [conds[cid].place, format_value(conds[cid].token)]  # noqa: E731
    return {
        "index": ev.index,
        "transition": ev.transition,
        "binding": {n: format_value(ev.binding[n]) for n in sorted(ev.binding)},
        "consumed": [pair(c) for c in ev.consumed],
        "produced": [pair(c) for c in ev.produced],
    }


def run_to_jsonl(run: ConcurrentRun) -> str:
    """One JSON record per event, in recorder order."""
    return "".join(json.dumps(event_record(run, ev), sort_keys=True) + "\n" for ev in run.events)


def run_to_json(run: ConcurrentRun) -> dict:
    return {
        "events": [
            dict(event_record(run, ev), id=ev.id, consumedIds=list(ev.consumed), producedIds=list(ev.produced))
            for ev in run.events
        ],
        "conditions": [
            {
                "id": c.id,
                "place": c.place,
                "token": format_value(c.token),
                "producer": c.producer,
                "consumer": c.consumer,
            }
            for c in run.conditions
        ],
    }


def run_from_json(doc: Mapping, net: Net) -> ConcurrentRun:
    """Inverse of :func:`run_to_json`; literals are typed through ``net``."""
    sig = net.structure.signature
    conditions = tuple(
        Condition(
            c["id"], c["place"], parse_value(c["token"], net.places[c["place"]].sort), c["producer"], c["consumer"]
        )
        for c in doc["conditions"]
    )
    events = tuple(
        Event(
            e["id"],
            e["transition"],
            {n: parse_value(v, sig.variables[n]) for n, v in e["binding"].items()},
            e["index"],
            tuple(e["consumedIds"]),
            tuple(e["producedIds"]),
        )
        for e in doc["events"]
    )
    return ConcurrentRun(events, conditions)


def run_to_dot(run: ConcurrentRun) -> str:
    return run_doc_to_dot(run_to_json(run))


def run_doc_to_dot(doc: Mapping) -> str:
    """DOT for a run document: events as boxes, conditions as circles."""
    lines = ["digraph run {", "  rankdir=LR;", "  node [fontsize=10];"]
    for c in doc["conditions"]:
        lines.append(f'  c{c["id"]} [shape=circle, label="{c["place"]}\\n{c["token"]}"];')
    for ev in doc["events"]:
        shown = ", ".join(f"{n}={v}" for n, v in sorted(ev["binding"].items()))
        lines.append(f'  e{ev["id"]} [shape=box, label="{ev["index"]}: {ev["transition"]}\\n{{{shown}}}"];')
        for cid in ev["consumedIds"]:
            lines.append(f"  c{cid} -> e{ev['id']};")
        for cid in ev["producedIds"]:
            lines.append(f"  e{ev['id']} -> c{cid};")
    lines.append("}")
    return "\n".join(lines) + "\n"
