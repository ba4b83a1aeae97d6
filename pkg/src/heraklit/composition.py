"""Modules with left/right interfaces and their associative composition.

Elements of a composite are addressed by *qualified names*
``"<leaf module>.<element>"``; leaf module names must be unique inside a
composite. Gluing records pairs of qualified names, and the identity of a
fused element is the set of qualified names it merges. Because that set does
not depend on how a composite was bracketed, ``(a • b) • c`` and
``a • (b • c)`` canonicalise to the same form.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Mapping, Union

from heraklit.algebra import And, Signature, Sort, SortError, Term
from heraklit.errors import CompositionError
from heraklit.petri import NetSchema, Place, Transition, dump_json, schema_to_json

PLACE, TRANSITION = "place", "transition"


@dataclass(frozen=True)
class Gate:
    label: str
    kind: str
    element: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in (PLACE, TRANSITION):
            raise CompositionError(f"gate {self.label}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class Surface:
    left: tuple[Gate, ...] = ()
    right: tuple[Gate, ...] = ()

    def shape(self) -> tuple[tuple[tuple[str, str], ...], tuple[tuple[str, str], ...]]:
        """Labels and kinds per side, ignoring which elements the gates bind."""
        return (
            tuple((g.label, g.kind) for g in self.left),
            tuple((g.label, g.kind) for g in self.right),
        )

    def check(self) -> list[str]:
        problems = []
        for side, gates in (("left", self.left), ("right", self.right)):
            dup = [lab for lab, n in Counter(g.label for g in gates).items() if n > 1]
            if dup:
                problems.append(f"duplicate label {', '.join(sorted(dup))} in {side} interface")
        return problems


@dataclass(frozen=True)
class Composite:
    children: tuple["Module", ...]
    glue: tuple[tuple[str, str], ...] = ()


Inner = Union[NetSchema, Composite, None]


@dataclass(frozen=True)
class Module:
    name: str
    surface: Surface = field(default_factory=Surface)
    inner: Inner = None

    def __post_init__(self) -> None:
        problems = self.surface.check()
        if isinstance(self.inner, NetSchema):
            for g in self.surface.left + self.surface.right:
                table = self.inner.places if g.kind == PLACE else self.inner.transitions
                if g.element is None or g.element not in table:
                    problems.append(f"gate {g.label} is not bound to a {g.kind} of the net")
        if problems:
            raise CompositionError(f"module {self.name}: " + "; ".join(problems))

    @property
    def is_opaque(self) -> bool:
        return self.inner is None

    @property
    def left(self) -> tuple[Gate, ...]:
        return self.surface.left

    @property
    def right(self) -> tuple[Gate, ...]:
        return self.surface.right


def net_module(name: str, schema: NetSchema, left: Iterable[str | tuple[str, str]] = (),
               right: Iterable[str | tuple[str, str]] = ()) -> Module:
    """Module over ``schema``; a gate is a label, or ``(label, element)``.

    The gate kind is taken from the bound element.
    """

    def gates(spec: Iterable[str | tuple[str, str]]) -> tuple[Gate, ...]:
        out = []
        for g in spec:
            label, element = (g, g) if isinstance(g, str) else g
            if element in schema.places:
                out.append(Gate(label, PLACE, element))
            elif element in schema.transitions:
                out.append(Gate(label, TRANSITION, element))
            else:
                raise CompositionError(f"module {name}: gate {label} names unknown element {element}")
        return tuple(out)

    return Module(name, Surface(gates(left), gates(right)), schema)


def opaque_module(name: str, left: Iterable[tuple[str, str]] = (), right: Iterable[tuple[str, str]] = ()) -> Module:
    """Module whose inner is just its name; gates given as ``(label, kind)``."""
    return Module(
        name,
        Surface(tuple(Gate(lab, k) for lab, k in left), tuple(Gate(lab, k) for lab, k in right)),
    )


# ---------------------------------------------------------------------------
# structure helpers


def leaves(m: Module) -> list[Module]:
    if isinstance(m.inner, Composite):
        return [leaf for child in m.inner.children for leaf in leaves(child)]
    return [m]


def qualify(m: Module, g: Gate) -> str:
    """Qualified name of the element behind gate ``g`` of module ``m``."""
    if isinstance(m.inner, Composite):
        assert g.element is not None
        return g.element
    if m.inner is None:
        return f"{m.name}.{g.label}"
    return f"{m.name}.{g.element}"


def _local(qname: str) -> tuple[str, str]:
    leaf, _, element = qname.rpartition(".")
    return leaf, element


def glue_pairs(m: Module) -> list[tuple[str, str]]:
    if not isinstance(m.inner, Composite):
        return []
    pairs = [p for child in m.inner.children for p in glue_pairs(child)]
    return pairs + list(m.inner.glue)


def _leaf_elements(leaf: Module) -> list[tuple[str, str]]:
    """(qualified name, kind) of every element a leaf contributes."""
    if isinstance(leaf.inner, NetSchema):
        return [(f"{leaf.name}.{p}", PLACE) for p in leaf.inner.places] + [
            (f"{leaf.name}.{t}", TRANSITION) for t in leaf.inner.transitions
        ]
    seen = {}
    for g in leaf.surface.left + leaf.surface.right:
        seen.setdefault(qualify(leaf, g), g.kind)
    return list(seen.items())


def element_classes(m: Module) -> dict[str, frozenset[str]]:
    """Map every qualified element of ``m`` to the set of names fused with it."""
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for leaf in leaves(m):
        for q, _ in _leaf_elements(leaf):
            find(q)
    for a, b in glue_pairs(m):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[str, set[str]] = {}
    for q in parent:
        groups.setdefault(find(q), set()).add(q)
    return {q: frozenset(groups[find(q)]) for q in parent}


def _place_sort(m: Module, qname: str) -> Sort | None:
    leaf_name, element = _local(qname)
    for leaf in leaves(m):
        if leaf.name == leaf_name and isinstance(leaf.inner, NetSchema):
            place = leaf.inner.places.get(element)
            return place.sort if place else None
    return None


def module_signature(m: Module) -> Signature:
    sigs = [leaf.inner.signature for leaf in leaves(m) if isinstance(leaf.inner, NetSchema)]
    if not sigs:
        return Signature()
    try:
        return reduce(Signature.union, sigs)
    except SortError as exc:
        raise CompositionError(f"signatures disagree: {exc}") from exc


# ---------------------------------------------------------------------------
# the operators


def compose(l: Module, r: Module) -> Module:
    """``l • r``: glue equally labelled gates of ``l``'s right and ``r``'s left interface."""
    clash = {x.name for x in leaves(l)} & {x.name for x in leaves(r)}
    if clash:
        raise CompositionError(f"module name {', '.join(sorted(clash))} occurs in both operands")
    r_left = {g.label: g for g in r.left}
    glue = []
    fused: set[str] = set()
    for g in l.right:
        h = r_left.get(g.label)
        if h is None:
            continue
        if g.kind != h.kind:
            raise CompositionError(f"gate {g.label} is a {g.kind} on the left but a {h.kind} on the right")
        ql, qr = qualify(l, g), qualify(r, h)
        if g.kind == PLACE:
            sl, sr = _place_sort(l, ql), _place_sort(r, qr)
            if sl is not None and sr is not None and sl != sr:
                raise CompositionError(f"gate {g.label} fuses places of sorts {sl} and {sr}")
        glue.append((ql, qr))
        fused.add(g.label)

    def lift(m: Module, gates: Iterable[Gate]) -> tuple[Gate, ...]:
        return tuple(Gate(g.label, g.kind, qualify(m, g)) for g in gates)

    surface = Surface(
        lift(l, l.left) + lift(r, (h for h in r.left if h.label not in fused)),
        lift(l, (g for g in l.right if g.label not in fused)) + lift(r, r.right),
    )
    problems = surface.check()
    if problems:
        raise CompositionError(f"{l.name} • {r.name}: " + "; ".join(problems))
    result = Module(f"{l.name} • {r.name}", surface, Composite((l, r), tuple(glue)))
    module_signature(result)
    return result


def compose_all(modules: Iterable[Module]) -> Module:
    return reduce(compose, modules)


def abstract(m: Module) -> Module:
    """``[m]``: same name and surface, inner structure deleted."""
    strip = lambda gates: tuple(Gate(g.label, g.kind) for g in gates)  # noqa: E731
    return Module(m.name, Surface(strip(m.left), strip(m.right)))


def canonical_form(m: Module) -> tuple:
    """Bracketing-independent description of a module (see module docstring)."""
    fingerprints = []
    for leaf in leaves(m):
        body = dump_json(schema_to_json(leaf.inner)) if isinstance(leaf.inner, NetSchema) else "opaque"
        gates = tuple((g.label, g.kind, g.element) for g in leaf.left), tuple(
            (g.label, g.kind, g.element) for g in leaf.right
        )
        fingerprints.append((leaf.name, body, gates))
    fingerprints.sort(key=lambda f: f[0])
    classes = element_classes(m)
    merges = frozenset(c for c in classes.values() if len(c) > 1)

    def side(gates: tuple[Gate, ...]) -> tuple:
        entries = []
        for g in gates:
            q = qualify(m, g)
            entries.append((g.label, g.kind, classes.get(q, frozenset({q}))))
        return tuple(sorted(entries, key=lambda e: e[0]))

    return (tuple(fingerprints), merges, side(m.left), side(m.right))


def canonical_equal(a: Module, b: Module) -> bool:
    return canonical_form(a) == canonical_form(b)


# ---------------------------------------------------------------------------
# flattening


def flat_names(m: Module) -> dict[str, str]:
    """Name in the flattened net for every qualified element of ``m``.

    A fused or unfused element keeps its local name when that name is
    unambiguous across the flattened net; otherwise it is named by its
    qualified member names joined with ``+``.
    """
    classes = element_classes(m)
    distinct = set(classes.values())
    holders = Counter(loc for c in distinct for loc in {_local(q)[1] for q in c})
    names = {}
    for c in distinct:
        locals_ = {_local(q)[1] for q in c}
        if len(locals_) == 1 and holders[next(iter(locals_))] == 1:
            name = next(iter(locals_))
        else:
            name = "+".join(sorted(c))
        for q in c:
            names[q] = name
    return names


def flatten(m: Module) -> NetSchema:
    """Single net schema for a module whose leaves all have net inners."""
    lv = leaves(m)
    opaque = [leaf.name for leaf in lv if not isinstance(leaf.inner, NetSchema)]
    if opaque:
        raise CompositionError(f"cannot flatten: opaque module {', '.join(opaque)}")
    sig = module_signature(m)
    names = flat_names(m)

    place_members: dict[str, list[tuple[str, Place, tuple]]] = {}
    trans_members: dict[str, list[tuple[str, Transition]]] = {}
    for leaf in lv:
        schema = leaf.inner
        assert isinstance(schema, NetSchema)
        for pname, place in schema.places.items():
            q = f"{leaf.name}.{pname}"
            place_members.setdefault(names[q], []).append((q, place, schema.initial.get(pname, ())))
        for tname, t in schema.transitions.items():
            q = f"{leaf.name}.{tname}"
            trans_members.setdefault(names[q], []).append((q, _rename_arcs(t, leaf.name, names)))

    clash = set(place_members) & set(trans_members)
    if clash:
        raise CompositionError(f"fused element {', '.join(sorted(clash))} is both place and transition")

    places, initial = {}, {}
    for name in sorted(place_members):
        members = sorted(place_members[name], key=lambda x: x[0])
        sorts = {p.sort for _, p, _ in members}
        if len(sorts) > 1:
            raise CompositionError(f"fused place {name} has conflicting sorts")
        places[name] = Place(name, sorts.pop())
        items = tuple(i for _, _, init in members for i in init)
        if items:
            initial[name] = items

    transitions = {}
    for name in sorted(trans_members):
        members = [t for _, t in sorted(trans_members[name], key=lambda x: x[0])]
        transitions[name] = _fuse_transitions(name, members)
    return NetSchema(sig, places, transitions, initial)


def _rename_arcs(t: Transition, leaf: str, names: Mapping[str, str]) -> Transition:
    ren = lambda arcs: {names[f"{leaf}.{p}"]: items for p, items in arcs.items()}  # noqa: E731
    return Transition(t.name, t.guard, ren(t.inputs), ren(t.outputs))


def _fuse_transitions(name: str, members: list[Transition]) -> Transition:
    guards: list[Term] = [t.guard for t in members if t.guard is not None]
    guard = guards[0] if len(guards) == 1 else (And(tuple(guards)) if guards else None)
    inputs: dict[str, tuple] = {}
    outputs: dict[str, tuple] = {}
    for t in members:
        for p, items in t.inputs.items():
            inputs[p] = inputs.get(p, ()) + tuple(items)
        for p, items in t.outputs.items():
            outputs[p] = outputs.get(p, ()) + tuple(items)
    return Transition(name, guard, dict(sorted(inputs.items())), dict(sorted(outputs.items())))


def flatten_module(m: Module) -> Module:
    """Like :func:`flatten`, but keep the outer surface bound to the merged elements."""
    schema = flatten(m)
    names = flat_names(m)
    rebind = lambda gates: tuple(Gate(g.label, g.kind, names[qualify(m, g)]) for g in gates)  # noqa: E731
    return Module(m.name, Surface(rebind(m.left), rebind(m.right)), schema)


# ---------------------------------------------------------------------------
# adapters


def relabel_adapter(
    name: str,
    pairs: Iterable[tuple[str, str, str]],
    signature: Signature,
    place_sorts: Mapping[str, Sort] | None = None,
) -> Module:
    """A pure relabelling module.

    Each ``(left_label, right_label, kind)`` becomes one inner element bound
    to a left gate and a right gate, so ``r • adapter • s`` fuses ``r``'s
    ``left_label`` gate with ``s``'s ``right_label`` gate. Place pairs need a
    sort in ``place_sorts`` keyed by the left label.
    """
    places, transitions, left, right = {}, {}, [], []
    for i, (lab_l, lab_r, kind) in enumerate(pairs):
        element = f"{kind[0]}{i}"
        if kind == PLACE:
            places[element] = Place(element, (place_sorts or {})[lab_l])
        else:
            transitions[element] = Transition(element)
        left.append((lab_l, element))
        right.append((lab_r, element))
    return net_module(name, NetSchema(signature, places, transitions), left, right)


# ---------------------------------------------------------------------------
# DOT export


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def module_to_dot(m: Module) -> str:
    """Rectangle per leaf module with its gates on the border; glued gates are joined."""
    lines = [f"digraph {_q(m.name)} {{", "  rankdir=LR;", "  compound=true;", "  node [fontsize=10];"]
    gate_nodes: dict[str, list[str]] = {}
    for i, leaf in enumerate(leaves(m)):
        lines.append(f"  subgraph cluster_{i} {{")
        lines.append(f"    label={_q(leaf.name)}; shape=box; style=rounded;")
        lines.append(f"    {_q(leaf.name + '|inner')} [label={_q('[' + leaf.name + ']' if leaf.is_opaque else leaf.name)}, shape=plaintext];")
        for side, gates in (("L", leaf.left), ("R", leaf.right)):
            for g in gates:
                node = f"{leaf.name}|{side}|{g.label}"
                shape = "circle" if g.kind == PLACE else "box"
                lines.append(f"    {_q(node)} [label={_q(g.label)}, shape={shape}];")
                gate_nodes.setdefault(f"{side}:{qualify(leaf, g)}", []).append(node)
        lines.append("  }")
    for a, b in glue_pairs(m):
        for x in gate_nodes.get(f"R:{a}", []):
            for y in gate_nodes.get(f"L:{b}", []):
                lines.append(f"  {_q(x)} -> {_q(y)} [dir=none];")
    for side, gates in (("L", m.left), ("R", m.right)):
        for g in gates:
            outer = f"outer|{side}|{g.label}"
            lines.append(f"  {_q(outer)} [label={_q(g.label)}, shape=plaintext];")
            for node in gate_nodes.get(f"{side}:{qualify(m, g)}", []):
                edge = (outer, node) if side == "L" else (node, outer)
                lines.append(f"  {_q(edge[0])} -> {_q(edge[1])} [style=dashed, dir=none];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def module_to_json(m: Module) -> dict:
    def gates(gs: tuple[Gate, ...]) -> list[dict]:
        return [{"label": g.label, "kind": g.kind, "element": g.element} for g in gs]

    doc: dict = {"name": m.name, "left": gates(m.left), "right": gates(m.right)}
    if isinstance(m.inner, Composite):
        doc["inner"] = {
            "composite": [module_to_json(c) for c in m.inner.children],
            "glue": [list(p) for p in m.inner.glue],
        }
    elif isinstance(m.inner, NetSchema):
        doc["inner"] = {"net": schema_to_json(m.inner)}
    else:
        doc["inner"] = "opaque"
    return doc
