"""High-level Petri net schemata, their instantiation and the token game."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union

from heraklit.algebra import (
    BASIC,
    POWERSET,
    Const,
    Signature,
    Sort,
    SortError,
    Structure,
    Term,
    Tup,
    Value,
    Var,
    eval_term,
    format_term,
    format_value,
    free_variables,
    sort_of,
    validate_structure,
    value_key,
    ValidationReport,
)
from heraklit.errors import EvaluationError, FiringError, ModelError


@dataclass(frozen=True)
class Spread:
    """``elm(term)``: every element of the set-valued term becomes a token."""

    term: Term


Item = Union[Term, Spread]
Arcs = Mapping[str, tuple[Item, ...]]


def item_term(item: Item) -> Term:
    return item.term if isinstance(item, Spread) else item


def format_item(item: Item) -> str:
    if isinstance(item, Spread):
        return f"elm({format_term(item.term)})"
    return format_term(item)


@dataclass(frozen=True)
class Place:
    name: str
    sort: Sort


@dataclass(frozen=True)
class Transition:
    name: str
    guard: Term | None = None
    inputs: Arcs = field(default_factory=dict)
    outputs: Arcs = field(default_factory=dict)

    def variables(self) -> set[str]:
        names = free_variables(self.guard) if self.guard is not None else set()
        for arcs in (self.inputs, self.outputs):
            for items in arcs.values():
                for item in items:
                    names |= free_variables(item_term(item))
        return names

    @property
    def spontaneous(self) -> bool:
        return not any(self.inputs.values())


@dataclass(frozen=True)
class NetSchema:
    signature: Signature
    places: Mapping[str, Place] = field(default_factory=dict)
    transitions: Mapping[str, Transition] = field(default_factory=dict)
    initial: Arcs = field(default_factory=dict)


# ---------------------------------------------------------------------------
# markings


class Marking:
    """Immutable assignment of a token multiset to each place.

    Empty places are simply absent; ``m[p]`` always returns a Counter.
    """

    __slots__ = ("_tokens", "_hash")

    def __init__(self, tokens: Mapping[str, Iterable[Value] | Counter] | None = None) -> None:
        data: dict[str, Counter] = {}
        for place, toks in (tokens or {}).items():
            c = +Counter(toks)
            if c:
                data[place] = c
        self._tokens = data
        self._hash: int | None = None

    def __getitem__(self, place: str) -> Counter:
        return Counter(self._tokens.get(place, ()))

    def count(self, place: str, token: Value) -> int:
        return self._tokens.get(place, {}).get(token, 0)

    def places(self) -> list[str]:
        return sorted(self._tokens)

    def items(self) -> Iterator[tuple[str, Counter]]:
        for p in sorted(self._tokens):
            yield p, self._tokens[p]

    def contains(self, demand: Mapping[str, Counter]) -> bool:
        for place, need in demand.items():
            have = self._tokens.get(place, {})
            for tok, n in need.items():
                if have.get(tok, 0) < n:
                    return False
        return True

    def apply(self, remove: Mapping[str, Counter], add: Mapping[str, Counter]) -> "Marking":
        # untouched places share their (never mutated) counters with self
        data = dict(self._tokens)
        for place in set(remove) | set(add):
            c = Counter(data.get(place, ()))
            c.subtract(remove.get(place, ()))
            if any(n < 0 for n in c.values()):
                raise FiringError(f"place {place} lacks tokens")
            c.update(add.get(place, ()))
            c = +c
            if c:
                data[place] = c
            else:
                data.pop(place, None)
        out = Marking.__new__(Marking)
        out._tokens = data
        out._hash = None
        return out

    def restrict(self, places: Iterable[str]) -> "Marking":
        return Marking({p: self._tokens[p] for p in places if p in self._tokens})

    def _key(self) -> frozenset:
        return frozenset((p, frozenset(c.items())) for p, c in self._tokens.items())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Marking) and self._tokens == other._tokens

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self._key())
        return self._hash

    def to_json(self) -> dict[str, list[str]]:
        """Places mapped to sorted lists of token literals (one per token)."""
        out = {}
        for place, c in self.items():
            toks = sorted(c.elements(), key=value_key)
            out[place] = [format_value(t) for t in toks]
        return out

    def __repr__(self) -> str:
        inner = ", ".join(f"{p}=[{', '.join(ts)}]" for p, ts in self.to_json().items())
        return f"Marking({inner})"


# ---------------------------------------------------------------------------
# well-formedness


def _item_violation(sig: Signature, place: Place, item: Item, where: str, implicit_spread: bool) -> str | None:
    try:
        got = sort_of(item_term(item), sig)
    except SortError as exc:
        return f"{where}: {exc}"
    if isinstance(item, Spread):
        if got.kind != POWERSET or got.element != place.sort:
            return f"{where}: sort mismatch, elm({format_term(item.term)}) has sort {got}, place {place.name} holds {place.sort}"
        return None
    if got == place.sort:
        return None
    if implicit_spread and got.kind == POWERSET and got.element == place.sort:
        return None
    return f"{where}: sort mismatch, {format_term(item)} has sort {got}, place {place.name} holds {place.sort}"


def check_well_formed(schema: NetSchema) -> ValidationReport:
    """Sorting discipline of a schema; violations name the offending element."""
    sig = schema.signature
    report = ValidationReport(sig.check())
    v = report.violations
    names: set[str] = set()
    for name, place in schema.places.items():
        if name != place.name:
            v.append(f"place {place.name} registered under name {name}")
        missing = place.sort.basic_names() - set(sig.sorts)
        if missing:
            v.append(f"place {name}: unknown sort {', '.join(sorted(missing))}")
        names.add(name)
    for name, t in schema.transitions.items():
        if name in names:
            v.append(f"name {name} used for a place and a transition")
        if t.guard is not None:
            try:
                if sort_of(t.guard, sig).kind != "bool":
                    v.append(f"transition {name}: guard is not boolean")
            except SortError as exc:
                v.append(f"transition {name}: guard: {exc}")
        for direction, arcs in (("input", t.inputs), ("output", t.outputs)):
            for pname, items in arcs.items():
                if pname not in schema.places:
                    v.append(f"transition {name}: {direction} arc to unknown place {pname}")
                    continue
                for item in items:
                    msg = _item_violation(
                        sig, schema.places[pname], item, f"transition {name}, {direction} {pname}", True
                    )
                    if msg:
                        v.append(msg)
    for pname, items in schema.initial.items():
        if pname not in schema.places:
            v.append(f"initial marking of unknown place {pname}")
            continue
        for item in items:
            if free_variables(item_term(item)):
                v.append(f"initial marking of {pname}: {format_item(item)} is not closed")
                continue
            msg = _item_violation(sig, schema.places[pname], item, f"initial marking of {pname}", False)
            if msg:
                v.append(msg)
    return report


# ---------------------------------------------------------------------------
# instantiation and the token game


@dataclass(frozen=True)
class Net:
    schema: NetSchema
    structure: Structure
    initial_marking: Marking

    @property
    def transitions(self) -> Mapping[str, Transition]:
        return self.schema.transitions

    @property
    def places(self) -> Mapping[str, Place]:
        return self.schema.places


def _expand(item: Item, place: Place, st: Structure, b: Mapping[str, Value]) -> list[Value]:
    val = eval_term(item_term(item), st, b)
    if isinstance(item, Spread):
        if not isinstance(val, frozenset):
            raise SortError(f"elm applied to non-set {format_item(item)}")
        return list(val)
    if isinstance(val, frozenset) and place.sort.kind != POWERSET:
        return list(val)  # implicit spread, as on a loop arc f(s)
    return [val]


def evaluate_arcs(arcs: Arcs, schema: NetSchema, st: Structure, b: Mapping[str, Value]) -> dict[str, Counter]:
    """Token multisets demanded/produced by ``arcs`` under ``b``."""
    out: dict[str, Counter] = {}
    for pname, items in arcs.items():
        c = Counter()
        for item in items:
            c.update(_expand(item, schema.places[pname], st, b))
        if c:
            out[pname] = c
    return out


def instantiate(schema: NetSchema, st: Structure) -> Net:
    report = validate_structure(schema.signature, st)
    if not report.ok:
        raise ModelError("structure does not validate", report.violations)
    wf = check_well_formed(schema)
    if not wf.ok:
        raise ModelError("schema is not well-formed", wf.violations)
    try:
        marking = Marking(evaluate_arcs(schema.initial, schema, st, {}))
    except (EvaluationError, SortError) as exc:
        raise ModelError(f"initial marking: {exc}") from exc
    return Net(schema, st, marking)


def _is_pattern(t: Term) -> bool:
    if isinstance(t, (Var, Const)):
        return True
    return isinstance(t, Tup) and all(_is_pattern(i) for i in t.items)


def _unify(t: Term, v: Value, b: dict[str, Value], st: Structure) -> bool:
    """Extend ``b`` in place so that ``t`` evaluates to ``v``; False on clash."""
    if isinstance(t, Var):
        if t.name in b:
            return b[t.name] == v
        if not st.inhabits(v, st.signature.variables[t.name]):
            return False
        b[t.name] = v
        return True
    if isinstance(t, Const):
        return st.constants.get(t.name) == v
    if not (isinstance(v, tuple) and len(v) == len(t.items)):
        return False
    return all(_unify(i, x, b, st) for i, x in zip(t.items, v))


def binding_key(b: Mapping[str, Value]) -> tuple:
    return tuple((name, value_key(b[name])) for name in sorted(b))


def _check(net: Net, m: Marking, t: Transition, b: Mapping[str, Value]) -> bool:
    st = net.structure
    if t.guard is not None and eval_term(t.guard, st, b) is not True:
        return False
    return m.contains(evaluate_arcs(t.inputs, net.schema, st, b))


def enabled_bindings(net: Net, m: Marking, t: Transition) -> list[dict[str, Value]]:
    """All bindings of ``t``'s variables under which ``t`` is enabled at ``m``.

    Candidate values come first from matching variable/tuple inscriptions
    against the tokens actually present; the remaining variables range over
    their carriers. The result is sorted lexicographically by
    (variable, value).
    """
    st = net.structure
    sig = st.signature
    names = t.variables()
    patterns = [
        (pname, item)
        for pname in sorted(t.inputs)
        for item in t.inputs[pname]
        if not isinstance(item, Spread)
        and _is_pattern(item)
        and sort_of(item, sig) == net.places[pname].sort
    ]
    found: dict[tuple, dict[str, Value]] = {}

    def complete(b: dict[str, Value]) -> None:
        rest = sorted(names - set(b))
        stack = [(0, dict(b))]
        while stack:
            i, partial = stack.pop()
            if i == len(rest):
                if _check(net, m, t, partial):
                    found.setdefault(binding_key(partial), partial)
                continue
            for val in st.carrier(sig.variables[rest[i]]):
                nxt = dict(partial)
                nxt[rest[i]] = val
                stack.append((i + 1, nxt))

    def match(i: int, b: dict[str, Value]) -> None:
        if i == len(patterns):
            complete(b)
            return
        pname, item = patterns[i]
        for tok in sorted(m[pname], key=value_key):
            nb = dict(b)
            if _unify(item, tok, nb, st):
                match(i + 1, nb)

    match(0, {})
    return [found[k] for k in sorted(found)]


def binding_fits(net: Net, t: Transition, b: Mapping[str, Value]) -> bool:
    """``b`` binds exactly ``t``'s variables, each within its carrier."""
    sig = net.structure.signature
    if set(b) != t.variables():
        return False
    return all(net.structure.inhabits(v, sig.variables[n]) for n, v in b.items())


def is_enabled(net: Net, m: Marking, t: Transition, b: Mapping[str, Value]) -> bool:
    return binding_fits(net, t, b) and _check(net, m, t, b)


def fire(net: Net, m: Marking, t: Transition | str, b: Mapping[str, Value]) -> Marking:
    """Successor marking; raises :class:`FiringError` unless ``b`` is enabled."""
    if isinstance(t, str):
        t = net.transitions[t]
    if not is_enabled(net, m, t, b):
        raise FiringError(f"transition {t.name} is not enabled under {format_binding(b)}")
    st = net.structure
    return m.apply(evaluate_arcs(t.inputs, net.schema, st, b), evaluate_arcs(t.outputs, net.schema, st, b))


def format_binding(b: Mapping[str, Value]) -> str:
    return "{" + ", ".join(f"{n}={format_value(b[n])}" for n in sorted(b)) + "}"


def well_typed(net: Net, m: Marking) -> list[str]:
    """Tokens that do not inhabit their place's sort."""
    bad = []
    for place, c in m.items():
        if place not in net.places:
            bad.append(f"tokens on unknown place {place}")
            continue
        sort = net.places[place].sort
        for tok in sorted(c, key=value_key):
            if not net.structure.inhabits(tok, sort):
                bad.append(f"token {format_value(tok)} on {place} is not of sort {sort}")
    return bad


# ---------------------------------------------------------------------------
# JSON export


def schema_to_json(schema: NetSchema) -> dict:
    sig = schema.signature
    return {
        "signature": {
            "sorts": sorted(sig.sorts),
            "constants": {n: str(s) for n, s in sorted(sig.constants.items())},
            "functions": {
                n: {"args": [str(a) for a in args], "result": str(res)}
                for n, (args, res) in sorted(sig.functions.items())
            },
            "variables": {n: str(s) for n, s in sorted(sig.variables.items())},
            "requirements": [format_term(r) for r in sig.requirements],
        },
        "places": {n: str(p.sort) for n, p in sorted(schema.places.items())},
        "transitions": {
            n: {
                "guard": format_term(t.guard) if t.guard is not None else None,
                "in": {p: [format_item(i) for i in items] for p, items in sorted(t.inputs.items())},
                "out": {p: [format_item(i) for i in items] for p, items in sorted(t.outputs.items())},
            }
            for n, t in sorted(schema.transitions.items())
        },
        "initial": {p: [format_item(i) for i in items] for p, items in sorted(schema.initial.items())},
    }


def net_to_json(net: Net) -> dict:
    doc = schema_to_json(net.schema)
    doc["marking"] = net.initial_marking.to_json()
    return doc


def dump_json(doc: object) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
