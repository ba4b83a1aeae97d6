"""Declared invariants and bounded exhaustive exploration of reachable markings."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from heraklit.algebra import Term, Value, eval_term, format_term, format_value, value_key
from heraklit.petri import Marking, Net, enabled_bindings, fire, format_binding, is_enabled, well_typed


@dataclass(frozen=True)
class PlaceSum:
    """For every atom x of ``over``: sum of x's occurrences on ``terms`` == ``total``.

    ``over`` names a set-valued constant or a basic sort. Each term is a
    place with an optional tuple index; with an index only that component
    of each token is compared against x.
    """

    name: str
    over: str
    terms: tuple[tuple[str, int | None], ...]
    total: int

    def atoms(self, net: Net) -> list[Value]:
        st = net.structure
        if self.over in st.constants:
            return sorted(st.constants[self.over], key=value_key)
        return sorted(st.carriers.get(self.over, ()), key=value_key)

    def check(self, net: Net, m: Marking) -> list[str]:
        out = []
        for x in self.atoms(net):
            n = sum(_occurrences(m, place, idx, x) for place, idx in self.terms)
            if n != self.total:
                out.append(f"{self.name}: {format_value(x)} occurs {n} times, expected {self.total}")
        return out

    def describe(self) -> str:
        parts = " + ".join(p if i is None else f"{p}[{i}]" for p, i in self.terms)
        return f"invariant {self.name} over {self.over}: {parts} = {self.total};"


def _occurrences(m: Marking, place: str, idx: int | None, x: Value) -> int:
    total = 0
    for tok, n in m[place].items():
        v = tok if idx is None else tok[idx]
        if v == x:
            total += n
    return total


@dataclass(frozen=True)
class AbsentAtFiring:
    """Whenever ``transition`` fires, no element of ``term`` lies on ``place``."""

    name: str
    transition: str
    term: Term
    place: str

    def check_firing(self, net: Net, m: Marking, transition: str, b: Mapping[str, Value]) -> list[str]:
        if transition != self.transition:
            return []
        value = eval_term(self.term, net.structure, b)
        elems = sorted(value, key=value_key) if isinstance(value, frozenset) else [value]
        present = [v for v in elems if m.count(self.place, v)]
        if present:
            who = ", ".join(format_value(v) for v in present)
            return [f"{self.name}: {transition} fired under {format_binding(b)} with {who} on {self.place}"]
        return []

    def describe(self) -> str:
        return f"invariant {self.name} on {self.transition}: absent {format_term(self.term)} from {self.place};"


Invariant = Union[PlaceSum, AbsentAtFiring]


@dataclass
class ExplorationReport:
    states: int = 0
    edges: int = 0
    truncated: bool = False
    violations: dict[str, list[str]] = field(default_factory=dict)
    terminal_states: int = 0
    unrestored_terminals: int = 0
    firings: Counter = field(default_factory=Counter)

    @property
    def ok(self) -> bool:
        return not self.truncated and not any(self.violations.values()) and not self.unrestored_terminals

    def record(self, name: str, problems: list[str]) -> None:
        bucket = self.violations.setdefault(name, [])
        if problems and len(bucket) < 20:
            bucket.extend(problems[: 20 - len(bucket)])


Workload = Sequence[tuple[str, Mapping[str, Value]]]


def explore(
    net: Net,
    workload: Workload = (),
    invariants: Sequence[Invariant] = (),
    max_states: int = 100_000,
    resource_places: Sequence[str] = (),
) -> ExplorationReport:
    """Breadth-first search over (marking, workload position) states.

    Workload entries are an ordered queue that may fire at any point once
    enabled; spontaneous transitions otherwise never fire. Every declared
    invariant and token typing is checked at every state, firing-time
    invariants on every edge. Terminal states (workload done, nothing
    enabled) must restore ``resource_places`` to their initial content.
    """
    report = ExplorationReport()
    for inv in invariants:
        report.violations[inv.name] = []
    report.violations["typing"] = []
    sums = [i for i in invariants if isinstance(i, PlaceSum)]
    at_firing = [i for i in invariants if isinstance(i, AbsentAtFiring)]
    internal = [t for _, t in sorted(net.transitions.items()) if not t.spontaneous]
    resources = net.initial_marking.restrict(resource_places)

    start = (net.initial_marking, 0)
    seen = {start}
    queue = deque([start])
    while queue:
        m, pos = queue.popleft()
        report.states += 1
        report.record("typing", well_typed(net, m))
        for inv in sums:
            report.record(inv.name, inv.check(net, m))

        moves: list[tuple[str, Mapping[str, Value], int]] = []
        if pos < len(workload):
            name, b = workload[pos]
            if is_enabled(net, m, net.transitions[name], b):
                moves.append((name, b, pos + 1))
        for t in internal:
            moves.extend((t.name, b, pos) for b in enabled_bindings(net, m, t))

        if not moves and pos == len(workload):
            report.terminal_states += 1
            if resource_places and m.restrict(resource_places) != resources:
                report.unrestored_terminals += 1
        for name, b, npos in moves:
            report.edges += 1
            report.firings[name] += 1
            for inv in at_firing:
                report.record(inv.name, inv.check_firing(net, m, name, b))
            nxt = (fire(net, m, name, b), npos)
            if nxt not in seen:
                if len(seen) >= max_states:
                    report.truncated = True
                    continue
                seen.add(nxt)
                queue.append(nxt)
    return report
