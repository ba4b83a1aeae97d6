"""The service-system case study: clients, admin, consulting rooms, experts.

Place and transition names follow the case study (transitions ``a``-``k``,
places ``A``-``T``). Two places are additions: ``InConsult`` holds the
(client, expert, room) triple during a consultation, and ``Exited`` collects
departing clients so runs can be mined for departures.
"""

from __future__ import annotations

from dataclasses import dataclass

from heraklit.algebra import (
    Apply,
    Const,
    Member,
    Signature,
    Structure,
    Subset,
    Tup,
    Var,
    basic,
    powerset,
    tuple_sort,
)
from heraklit.composition import Module, compose_all, net_module
from heraklit.invariants import AbsentAtFiring, Invariant, PlaceSum
from heraklit.petri import NetSchema, Place, Spread, Transition

c, e, r, a, s = (Var(n) for n in "ceras")
CS, CR, ER = Tup((c, s)), Tup((c, r)), Tup((e, r))
ACS, CER = Tup((a, c, s)), Tup((c, e, r))
F_S = Apply("f", (s,))


def service_signature() -> Signature:
    return Signature(
        sorts=frozenset("CERAS"),
        constants={"EX": powerset("E"), "RO": powerset("R"), "AD": powerset("A")},
        functions={"f": ((basic("S"),), powerset("E"))},
        variables={"c": basic("C"), "e": basic("E"), "r": basic("R"), "a": basic("A"), "s": basic("S")},
        requirements=(Subset(F_S, Const("EX")),),
    )


def _places(**sorts) -> dict[str, Place]:
    return {name: Place(name, sort) for name, sort in sorts.items()}


def _t(name, guard=None, inputs=None, outputs=None) -> Transition:
    wrap = lambda arcs: {p: v if isinstance(v, tuple) else (v,) for p, v in (arcs or {}).items()}  # noqa: E731
    return Transition(name, guard, wrap(inputs), wrap(outputs))


def clients_module(sig: Signature) -> Module:
    cs, cr = tuple_sort("C", "S"), tuple_sort("C", "R")
    schema = NetSchema(
        sig,
        _places(A=cs, B=cs, C=basic("C"), D=cr, E=cr, F=cr, Exited=basic("C")),
        {
            "a": _t("a", outputs={"A": CS}),
            "b": _t("b", inputs={"A": CS}, outputs={"B": CS}),
            "c": _t("c", inputs={"B": CS, "C": c}, outputs={"Exited": c}),
            "d": _t("d", inputs={"B": CS, "D": CR}, outputs={"E": CR}),
            "e": _t("e", inputs={"F": CR}, outputs={"Exited": c}),
        },
    )
    return net_module("clients", schema, left=(), right=("b", "C", "D", "E", "F"))


def admin_module(sig: Signature) -> Module:
    schema = NetSchema(
        sig,
        _places(
            P=basic("A"), Q=tuple_sort("A", "C", "S"), R=basic("E"), S=basic("R"), T=basic("E"),
            C=basic("C"), D=tuple_sort("C", "R"), H=tuple_sort("E", "R"),
        ),
        {
            "b": _t("b", inputs={"P": a}, outputs={"Q": ACS}),
            "j": _t(
                "j",
                guard=Member(e, F_S),
                inputs={"Q": ACS, "R": e, "S": r},
                outputs={"P": a, "D": CR, "H": ER, "T": e},
            ),
            "k": _t("k", inputs={"Q": ACS, "T": F_S}, outputs={"P": a, "C": c, "T": F_S}),
            "g": _t("g", inputs={"T": e}, outputs={"R": e, "S": r}),
        },
        initial={"P": (Spread(Const("AD")),), "R": (Spread(Const("EX")),), "S": (Spread(Const("RO")),)},
    )
    return net_module("admin", schema, left=("b", "C", "D"), right=("H", "g"))


def rooms_module(sig: Signature) -> Module:
    cr, er = tuple_sort("C", "R"), tuple_sort("E", "R")
    schema = NetSchema(
        sig,
        _places(E=cr, F=cr, I=er, J=er, InConsult=tuple_sort("C", "E", "R")),
        {
            "h": _t("h", inputs={"E": CR, "I": ER}, outputs={"InConsult": CER}),
            "i": _t("i", inputs={"InConsult": CER}, outputs={"F": CR, "J": ER}),
        },
    )
    return net_module("rooms", schema, left=("E", "F"), right=("I", "J"))


def experts_module(sig: Signature) -> Module:
    er = tuple_sort("E", "R")
    schema = NetSchema(
        sig,
        _places(G=basic("E"), H=er, I=er, J=er),
        {
            "f": _t("f", inputs={"G": e, "H": ER}, outputs={"I": ER}),
            "g": _t("g", inputs={"J": ER}, outputs={"G": e}),
        },
        initial={"G": (Spread(Const("EX")),)},
    )
    return net_module("experts", schema, left=("H", "I", "J", "g"), right=())


def default_instantiation(sig: Signature | None = None, rooms: tuple[str, ...] = ("r1",)) -> Structure:
    """Three clients, two experts, one admin, two services.

    ``rooms`` widens the room carrier (and RO) for scenarios that need two
    consultations at once.
    """
    room_set = "{" + ",".join(rooms) + "}"
    return Structure.from_literals(
        sig or service_signature(),
        carriers={"C": ["c1", "c2", "c3"], "E": ["e1", "e2"], "R": list(rooms), "A": ["a1"], "S": ["s1", "s2"]},
        constants={"EX": "{e1,e2}", "RO": room_set, "AD": "{a1}"},
        functions={"f": {("s1",): "{e1}", ("s2",): "{e1,e2}"}},
    )


def service_invariants() -> tuple[Invariant, ...]:
    """Invariants checked at every explored marking of the flattened system."""
    return (
        PlaceSum("twin", "EX", (("R", None), ("T", None)), 1),
        PlaceSum("experts", "EX", (("G", None), ("I", 0), ("InConsult", 1), ("J", 0)), 1),
        PlaceSum("rooms", "RO", (("S", None), ("H", 1), ("I", 1), ("InConsult", 2), ("J", 1)), 1),
        AbsentAtFiring("rejection", "k", F_S, "R"),
    )


RESOURCE_PLACES = ("P", "G", "R", "S")


@dataclass(frozen=True)
class ServiceSystemFixture:
    signature: Signature
    clients: Module
    admin: Module
    rooms: Module
    experts: Module
    composed: Module
    default_structure: Structure
    invariants: tuple[Invariant, ...]

    @property
    def modules(self) -> tuple[Module, ...]:
        return (self.clients, self.admin, self.rooms, self.experts)


def build_system() -> ServiceSystemFixture:
    sig = service_signature()
    mods = (clients_module(sig), admin_module(sig), rooms_module(sig), experts_module(sig))
    return ServiceSystemFixture(
        sig, *mods, compose_all(mods), default_instantiation(sig), service_invariants()
    )
