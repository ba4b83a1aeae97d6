import random

import pytest

from heraklit.algebra import Signature, Var, basic
from heraklit.composition import (
    PLACE,
    TRANSITION,
    Gate,
    abstract,
    canonical_equal,
    compose,
    compose_all,
    element_classes,
    flatten,
    flatten_module,
    leaves,
    module_to_dot,
    module_to_json,
    net_module,
    opaque_module,
    relabel_adapter,
)
from heraklit.errors import CompositionError
from heraklit.petri import NetSchema, Place, Transition, schema_to_json
from heraklit.service_system import build_system

from netgen import random_triple

SYSTEM = build_system()


def labels(gates):
    return [g.label for g in gates]


def tiny(name, left=(), right=(), sort="X"):
    """One place ``p`` and one transition ``t``; gates given as (label, element)."""
    sig = Signature(frozenset({"X", "Y"}), variables={"x": basic(sort)})
    schema = NetSchema(
        sig,
        {"p": Place("p", basic(sort))},
        {"t": Transition("t", inputs={"p": (Var("x"),)})},
    )
    return net_module(name, schema, left, right)


def test_clients_admin_surface():
    ca = compose(SYSTEM.clients, SYSTEM.admin)
    assert labels(ca.left) == []
    assert labels(ca.right) == ["E", "F", "H", "g"]
    assert ca.inner.glue == (("clients.b", "admin.b"), ("clients.C", "admin.C"), ("clients.D", "admin.D"))
    assert ca.name == "clients • admin"


def test_disjoint_labels_concatenate():
    l = tiny("l", left=[("a", "p")], right=[("x", "p")])
    r = tiny("r", left=[("y", "t")], right=[("z", "t")])
    m = compose(l, r)
    assert m.inner.glue == ()
    assert labels(m.left) == ["a", "y"] and labels(m.right) == ["x", "z"]


def test_kind_mismatch_is_an_error():
    l = tiny("l", right=[("X", "p")])
    r = tiny("r", left=[("X", "t")])
    with pytest.raises(CompositionError, match="gate X is a place on the left but a transition on the right"):
        compose(l, r)


def test_sort_mismatch_is_an_error():
    l = tiny("l", right=[("X", "p")], sort="X")
    r = tiny("r", left=[("X", "p")], sort="Y")
    with pytest.raises(CompositionError, match="sorts X and Y"):
        compose(l, r)


def test_leaf_names_must_be_unique():
    with pytest.raises(CompositionError, match="occurs in both operands"):
        compose(tiny("m"), tiny("m"))


def test_duplicate_label_in_result_is_an_error():
    l = tiny("l", right=[("u", "p")])
    r = tiny("r", right=[("u", "p")])
    with pytest.raises(CompositionError, match="duplicate label u in right interface"):
        compose(l, r)


def test_duplicate_label_on_one_side_is_rejected_at_construction():
    with pytest.raises(CompositionError, match="duplicate label"):
        tiny("m", left=[("a", "p"), ("a", "t")])


def test_abstraction_keeps_surface():
    a = abstract(SYSTEM.clients)
    assert a.is_opaque and a.name == "clients"
    assert a.surface.shape() == SYSTEM.clients.surface.shape()
    with pytest.raises(CompositionError, match="opaque module clients"):
        flatten(a)


def test_abstract_composition_is_a_composite_of_opaque_leaves():
    m = compose(abstract(SYSTEM.clients), abstract(SYSTEM.admin))
    assert [leaf.is_opaque for leaf in leaves(m)] == [True, True]
    assert labels(m.right) == ["E", "F", "H", "g"]


def test_case_study_is_associative():
    c, a, r, e = SYSTEM.modules
    assert canonical_equal(compose(compose(c, a), compose(r, e)), compose(c, compose(a, compose(r, e))))
    assert canonical_equal(SYSTEM.composed, SYSTEM.composed)


def test_one_gate_label_changes_canonical_form():
    l = tiny("l", right=[("x", "p")])
    r1 = tiny("r", left=[("x", "p")])
    r2 = tiny("r", left=[("y", "p")])
    assert not canonical_equal(compose(l, r1), compose(l, r2))


@pytest.mark.parametrize("seed", range(40))
def test_random_triples_associate(seed):
    rng = random.Random(seed)
    checked = 0
    while checked < 3:
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
            assert canonical_equal(left, right)
            assert schema_to_json(flatten(left)) == schema_to_json(flatten(right))
            checked += 1
        elif left is not None or right is not None:
            assert "duplicate label" in (rerr if left is not None else lerr)


def test_flatten_case_study():
    schema = flatten(SYSTEM.composed)
    assert sorted(schema.transitions) == list("abcdefghijk")
    assert sorted(schema.places) == sorted(list("ABCDEFGHIJPQRST") + ["Exited", "InConsult"])
    # the admin and expert halves of g fuse into one transition
    g = schema.transitions["g"]
    assert sorted(g.inputs) == ["J", "T"] and sorted(g.outputs) == ["G", "R", "S"]


def test_flatten_leaf_is_identity():
    assert schema_to_json(flatten(SYSTEM.admin)) == schema_to_json(SYSTEM.admin.inner)


def test_flatten_without_glue_is_disjoint_union():
    m = compose(tiny("l"), tiny("r"))
    schema = flatten(m)
    assert sorted(schema.places) == ["l.p", "r.p"]
    assert sorted(schema.transitions) == ["l.t", "r.t"]


def test_flatten_module_rebinds_surface():
    m = flatten_module(compose(SYSTEM.clients, SYSTEM.admin))
    assert {g.label: g.element for g in m.right} == {"E": "E", "F": "F", "H": "H", "g": "g"}


def test_stepwise_flattening_agrees():
    """Flatten two modules, use the result as a leaf, and continue: same net."""
    c, a, r, e = SYSTEM.modules
    step = flatten_module(compose(c, a))
    step = flatten_module(compose(step, r))
    step = flatten_module(compose(step, e))
    assert schema_to_json(step.inner) == schema_to_json(flatten(SYSTEM.composed))


def test_adapter_relabels():
    sig = Signature(frozenset({"X"}), variables={"x": basic("X")})
    l = tiny("l", right=[("out", "p")])
    r = tiny("r", left=[("in", "p")])
    adapter = relabel_adapter("ad", [("out", "in", PLACE)], sig, {"out": basic("X")})
    m = compose_all([l, adapter, r])
    cls = element_classes(m)["l.p"]
    assert cls == frozenset({"l.p", "ad.p0", "r.p"})
    assert labels(m.left) == [] and labels(m.right) == []


def test_opaque_gates_fuse_by_label():
    l = opaque_module("l", right=[("x", TRANSITION)])
    r = opaque_module("r", left=[("x", TRANSITION)])
    m = compose(l, r)
    assert element_classes(m)["l.x"] == frozenset({"l.x", "r.x"})


def test_gate_kind_is_validated():
    with pytest.raises(CompositionError, match="unknown kind"):
        Gate("x", "arc")


def test_dot_export_structure():
    dot = module_to_dot(SYSTEM.composed)
    assert dot.startswith('digraph "clients • admin • rooms • experts" {')
    assert dot.count("subgraph cluster_") == 4
    assert '"clients|R|b" -> "admin|L|b" [dir=none];' in dot
    assert dot == module_to_dot(build_system().composed)


def test_json_export_nests_children():
    doc = module_to_json(compose(SYSTEM.clients, abstract(SYSTEM.admin)))
    assert [c["name"] for c in doc["inner"]["composite"]] == ["clients", "admin"]
    assert doc["inner"]["composite"][1]["inner"] == "opaque"
