"""Textual model language: parser and printer.

A model file holds signatures, structures, net modules, composition
expressions and invariants::

    signature service {
      sort C, E;
      const EX : P(E);
      fun f : S -> P(E);
      var c : C;
      require f(s) <= EX;
    }
    structure default of service {
      carrier E = {e1, e2};
      EX = {e1, e2};
      f(s1) = {e1};
    }
    module admin uses service {
      place R : E;
      init R : elm(EX);
      transition j if e in f(s) { in R : e; out T : e; }
      left b, C;
      right H, g = release;
    }
    system overall = clients . admin . [rooms] . experts;
    invariant twin over EX : R + T = 1;
    invariant rejection on k : absent f(s) from R;

``.`` and ``•`` both denote composition; ``[m]`` is abstraction. Comments
start with ``#``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Union

from heraklit.algebra import (
    BOOL,
    And,
    Apply,
    Const,
    Equals,
    Member,
    Signature,
    Sort,
    SortError,
    Structure,
    Subset,
    Term,
    Tup,
    Var,
    basic,
    format_term,
    format_value,
    powerset,
    tuple_sort,
    value_from_tree,
    value_key,
)
from heraklit.composition import Module, abstract, compose, net_module
from heraklit.errors import CompositionError, DSLError
from heraklit.invariants import AbsentAtFiring, Invariant, PlaceSum
from heraklit.petri import Item, NetSchema, Place, Spread, Transition, format_item

# ---------------------------------------------------------------------------
# composition expressions


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Abstraction:
    body: "Expr"


@dataclass(frozen=True)
class Composition:
    parts: tuple["Expr", ...]


Expr = Union[Ref, Abstraction, Composition]


def format_expr(e: Any) -> str:
    if isinstance(e, Ref):
        return e.name
    if isinstance(e, Abstraction):
        return f"[{format_expr(e.body)}]"
    return " . ".join(f"({format_expr(p)})" if isinstance(p, Composition) else format_expr(p) for p in e.parts)


def build_expr(e: Any, modules: dict[str, Module]) -> Module:
    if isinstance(e, Ref):
        if e.name not in modules:
            raise CompositionError(f"unknown module {e.name}")
        return modules[e.name]
    if isinstance(e, Abstraction):
        return abstract(build_expr(e.body, modules))
    built = [build_expr(p, modules) for p in e.parts]
    result = built[0]
    for m in built[1:]:
        result = compose(result, m)
    return result


# ---------------------------------------------------------------------------
# model


@dataclass
class Model:
    signatures: dict[str, Signature] = field(default_factory=dict)
    structures: dict[str, Structure] = field(default_factory=dict)
    structure_sigs: dict[str, str] = field(default_factory=dict)
    modules: dict[str, Module] = field(default_factory=dict)
    module_sigs: dict[str, str] = field(default_factory=dict)
    systems: dict[str, Any] = field(default_factory=dict)
    invariants: list[Invariant] = field(default_factory=list)
    lines: dict[tuple[str, str], int] = field(default_factory=dict)

    def system(self, name: str | None = None) -> Module:
        """Build the named composition (or the only one)."""
        if name is None:
            if len(self.systems) != 1:
                raise CompositionError("model declares %d systems; name one" % len(self.systems))
            name = next(iter(self.systems))
        if name not in self.systems:
            raise CompositionError(f"unknown system {name}")
        return build_expr(self.systems[name], self.modules)

    def structure(self, name: str | None = None) -> Structure:
        if name is None:
            if len(self.structures) != 1:
                raise DSLError("model declares %d structures; name one" % len(self.structures))
            name = next(iter(self.structures))
        if name not in self.structures:
            raise DSLError(f"unknown structure {name}")
        return self.structures[name]

    def where(self, kind: str, name: str) -> str:
        line = self.lines.get((kind, name))
        return f"line {line}: {kind} {name}" if line else f"{kind} {name}"


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<int>[0-9]+)"
    r"|(?P<sym>->|<=|==|•|[.,;:(){}\[\]+*=])"
)


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            raise DSLError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("id", "int", "sym"):
            toks.append(Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - line_start + 1))
    return toks


# ---------------------------------------------------------------------------
# parser


class Parser:
    def __init__(self, src: str) -> None:
        self.toks = tokenize(src)
        self.pos = 0
        self.model = Model()

    # token helpers
    @property
    def tok(self) -> Tok:
        return self.toks[self.pos]

    def error(self, msg: str, tok: Tok | None = None) -> DSLError:
        tok = tok or self.tok
        return DSLError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("sym", "id")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        tok = self.tok
        self.pos += 1
        return tok

    def ident(self) -> str:
        if self.tok.kind != "id":
            raise self.error(f"expected a name, found {self.tok.text or 'end of input'!r}")
        text = self.tok.text
        self.pos += 1
        return text

    def number(self) -> int:
        if self.tok.kind != "int":
            raise self.error("expected a number")
        n = int(self.tok.text)
        self.pos += 1
        return n

    def names(self) -> list[str]:
        out = [self.ident()]
        while self.accept(","):
            out.append(self.ident())
        return out

    # top level
    def parse(self) -> Model:
        while self.tok.kind != "eof":
            start = self.tok
            word = self.ident()
            if word == "signature":
                self.signature(start)
            elif word == "structure":
                self.structure(start)
            elif word == "module":
                self.module(start)
            elif word == "system":
                name = self.ident()
                self.expect("=")
                self.model.systems[name] = self.expr()
                self.model.lines[("system", name)] = start.line
                self.expect(";")
            elif word == "invariant":
                self.invariant()
            else:
                raise self.error(f"unknown declaration {word!r}", start)
        return self.model

    # sorts
    def sort(self, sig: Signature | None, declared: set[str]) -> Sort:
        tok = self.tok
        if self.accept("("):
            parts = [self.sort(sig, declared)]
            while self.accept(","):
                parts.append(self.sort(sig, declared))
            self.expect(")")
            if len(parts) == 1:
                return parts[0]
            return tuple_sort(*parts)
        name = self.ident()
        if name == "Bool":
            return BOOL
        if name == "P" and self.at("("):
            self.expect("(")
            inner = self.sort(sig, declared)
            self.expect(")")
            try:
                return powerset(inner)
            except SortError as exc:
                raise self.error(str(exc), tok) from None
        if name not in declared:
            raise self.error(f"unknown sort {name}", tok)
        return basic(name)

    def signature(self, start: Tok) -> None:
        name = self.ident()
        self.expect("{")
        sorts: list[str] = []
        consts: dict[str, Sort] = {}
        funs: dict[str, tuple[tuple[Sort, ...], Sort]] = {}
        vars_: dict[str, Sort] = {}
        reqs: list[Term] = []
        while not self.accept("}"):
            kw = self.tok
            word = self.ident()
            if word == "sort":
                sorts += self.names()
            elif word in ("const", "var"):
                names = self.names()
                self.expect(":")
                s = self.sort(None, set(sorts))
                for n in names:
                    (consts if word == "const" else vars_)[n] = s
            elif word == "fun":
                fn = self.ident()
                self.expect(":")
                args = [self.sort(None, set(sorts))]
                while self.accept("*"):
                    args.append(self.sort(None, set(sorts)))
                self.expect("->")
                funs[fn] = (tuple(args), self.sort(None, set(sorts)))
            elif word == "require":
                partial = Signature(frozenset(sorts), consts, funs, vars_)
                reqs.append(self.term(partial))
            else:
                raise self.error(f"unknown signature item {word!r}", kw)
            self.expect(";")
        sig = Signature(frozenset(sorts), consts, funs, vars_, tuple(reqs))
        self.model.signatures[name] = sig
        self.model.lines[("signature", name)] = start.line

    def _signature_ref(self, what: str, name: str) -> tuple[str, Signature]:
        if self.accept("of") or self.accept("uses"):
            tok = self.tok
            sname = self.ident()
            if sname not in self.model.signatures:
                raise self.error(f"unknown signature {sname}", tok)
            return sname, self.model.signatures[sname]
        if len(self.model.signatures) != 1:
            raise self.error(f"{what} {name} must name its signature")
        return next(iter(self.model.signatures.items()))

    # literals
    def literal(self) -> Any:
        if self.at("(") or self.at("{"):
            open_ = self.tok.text
            close = ")" if open_ == "(" else "}"
            self.pos += 1
            items = []
            if not self.accept(close):
                items.append(self.literal())
                while self.accept(","):
                    items.append(self.literal())
                self.expect(close)
            return (open_, items)
        if self.tok.kind in ("id", "int"):
            text = self.tok.text
            self.pos += 1
            return text
        raise self.error("expected a value literal")

    def typed_literal(self, sort: Sort) -> Any:
        tok = self.tok
        tree = self.literal()
        try:
            return value_from_tree(tree, sort)
        except SortError as exc:
            raise self.error(str(exc), tok) from None

    def structure(self, start: Tok) -> None:
        name = self.ident()
        sname, sig = self._signature_ref("structure", name)
        self.expect("{")
        carriers: dict[str, frozenset] = {}
        consts: dict[str, Any] = {}
        tables: dict[str, dict[tuple, Any]] = {}
        while not self.accept("}"):
            tok = self.tok
            word = self.ident()
            if word == "carrier":
                stok = self.tok
                sort_name = self.ident()
                if sort_name not in sig.sorts:
                    raise self.error(f"unknown sort {sort_name}", stok)
                self.expect("=")
                carriers[sort_name] = self.typed_literal(powerset(sort_name))
            elif word in sig.constants:
                self.expect("=")
                consts[word] = self.typed_literal(sig.constants[word])
            elif word in sig.functions:
                params, result = sig.functions[word]
                self.expect("(")
                args = [self.typed_literal(params[0])]
                for p in params[1:]:
                    self.expect(",")
                    args.append(self.typed_literal(p))
                self.expect(")")
                self.expect("=")
                tables.setdefault(word, {})[tuple(args)] = self.typed_literal(result)
            else:
                raise self.error(f"{word} is neither a constant nor a function of {sname}", tok)
            self.expect(";")
        self.model.structures[name] = Structure(sig, carriers, consts, tables)
        self.model.structure_sigs[name] = sname
        self.model.lines[("structure", name)] = start.line

    # terms
    def term(self, sig: Signature) -> Term:
        items = [self.relation(sig)]
        while self.accept("and"):
            items.append(self.relation(sig))
        return items[0] if len(items) == 1 else And(tuple(items))

    def relation(self, sig: Signature) -> Term:
        left = self.primary(sig)
        if self.accept("in"):
            return Member(left, self.primary(sig))
        if self.accept("=="):
            return Equals(left, self.primary(sig))
        if self.accept("<="):
            return Subset(left, self.primary(sig))
        return left

    def primary(self, sig: Signature) -> Term:
        tok = self.tok
        if self.accept("("):
            items = [self.term(sig)]
            while self.accept(","):
                items.append(self.term(sig))
            self.expect(")")
            return items[0] if len(items) == 1 else Tup(tuple(items))
        name = self.ident()
        if self.accept("("):
            if name not in sig.functions:
                raise self.error(f"unknown function {name}", tok)
            args = [self.term(sig)]
            while self.accept(","):
                args.append(self.term(sig))
            self.expect(")")
            return Apply(name, tuple(args))
        if name in sig.variables:
            return Var(name)
        if name in sig.constants:
            return Const(name)
        raise self.error(f"unknown name {name}", tok)

    def items(self, sig: Signature) -> tuple[Item, ...]:
        out = [self.item(sig)]
        while self.accept("+"):
            out.append(self.item(sig))
        return tuple(out)

    def item(self, sig: Signature) -> Item:
        if self.at("elm") and self.toks[self.pos + 1].text == "(":
            self.pos += 2
            t = self.term(sig)
            self.expect(")")
            return Spread(t)
        return self.term(sig)

    # modules
    def module(self, start: Tok) -> None:
        name = self.ident()
        if name in self.model.modules:
            raise self.error(f"module {name} declared twice", start)
        sname, sig = self._signature_ref("module", name)
        self.expect("{")
        places: dict[str, Place] = {}
        transitions: dict[str, Transition] = {}
        initial: dict[str, tuple[Item, ...]] = {}
        left: list[tuple[str, str]] = []
        right: list[tuple[str, str]] = []
        refs: list[tuple[Tok, str]] = []

        def place_ref() -> str:
            tok = self.tok
            pname = self.ident()
            refs.append((tok, pname))
            return pname

        while not self.accept("}"):
            kw = self.tok
            word = self.ident()
            if word == "place":
                names = self.names()
                self.expect(":")
                s = self.sort(sig, set(sig.sorts))
                for n in names:
                    places[n] = Place(n, s)
                self.expect(";")
            elif word == "init":
                pname = place_ref()
                self.expect(":")
                initial[pname] = initial.get(pname, ()) + self.items(sig)
                self.expect(";")
            elif word == "transition":
                tname = self.ident()
                guard = self.term(sig) if self.accept("if") else None
                inputs: dict[str, tuple[Item, ...]] = {}
                outputs: dict[str, tuple[Item, ...]] = {}
                if self.accept("{"):
                    while not self.accept("}"):
                        if self.accept("in"):
                            arcs = inputs
                        elif self.accept("out"):
                            arcs = outputs
                        else:
                            raise self.error("expected 'in' or 'out'")
                        pname = place_ref()
                        self.expect(":")
                        arcs[pname] = arcs.get(pname, ()) + self.items(sig)
                        self.expect(";")
                else:
                    self.expect(";")
                transitions[tname] = Transition(tname, guard, inputs, outputs)
            elif word in ("left", "right"):
                gates = left if word == "left" else right
                while True:
                    label = self.ident()
                    element = self.ident() if self.accept("=") else label
                    gates.append((label, element))
                    if not self.accept(","):
                        break
                self.expect(";")
            else:
                raise self.error(f"unknown module item {word!r}", kw)
        for tok, pname in refs:
            if pname not in places:
                raise self.error(f"unknown place {pname}", tok)
        try:
            mod = net_module(name, NetSchema(sig, places, transitions, initial), left, right)
        except CompositionError as exc:
            raise self.error(str(exc), start) from None
        self.model.modules[name] = mod
        self.model.module_sigs[name] = sname
        self.model.lines[("module", name)] = start.line

    # expressions and invariants
    def expr(self) -> Any:
        parts = [self.unit()]
        while self.accept(".") or self.accept("•"):
            parts.append(self.unit())
        return parts[0] if len(parts) == 1 else Composition(tuple(parts))

    def unit(self) -> Any:
        if self.accept("["):
            body = self.expr()
            self.expect("]")
            return Abstraction(body)
        if self.accept("("):
            body = self.expr()
            self.expect(")")
            return body
        tok = self.tok
        name = self.ident()
        if self.model.modules and name not in self.model.modules:
            raise self.error(f"unknown module {name}", tok)
        return Ref(name)

    def invariant(self) -> None:
        name = self.ident()
        if self.accept("over"):
            over = self.ident()
            self.expect(":")
            terms = [self.place_term()]
            while self.accept("+"):
                terms.append(self.place_term())
            self.expect("=")
            self.model.invariants.append(PlaceSum(name, over, tuple(terms), self.number()))
        elif self.accept("on"):
            transition = self.ident()
            self.expect(":")
            self.expect("absent")
            sig = self._merged_signature()
            term = self.term(sig)
            self.expect("from")
            self.model.invariants.append(AbsentAtFiring(name, transition, term, self.ident()))
        else:
            raise self.error("expected 'over' or 'on'")
        self.expect(";")

    def place_term(self) -> tuple[str, int | None]:
        place = self.ident()
        if self.accept("["):
            idx = self.number()
            self.expect("]")
            return place, idx
        return place, None

    def _merged_signature(self) -> Signature:
        sigs = list(self.model.signatures.values())
        merged = Signature()
        for s in sigs:
            merged = merged.union(s)
        return merged


def parse_model(src: str) -> Model:
    return Parser(src).parse()


def parse_expr(src: str, model: Model | None = None) -> Any:
    p = Parser(src)
    if model is not None:
        p.model = model
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after expression")
    return e


# ---------------------------------------------------------------------------
# printer


def _items(items: tuple[Item, ...]) -> str:
    return " + ".join(format_item(i) for i in items)


def format_model(model: Model) -> str:
    """Print ``model`` so that :func:`parse_model` reads it back unchanged."""
    out: list[str] = []
    for name, sig in model.signatures.items():
        out.append(f"signature {name} {{")
        out.append(f"  sort {', '.join(sorted(sig.sorts))};")
        for n, s in sig.constants.items():
            out.append(f"  const {n} : {s};")
        for n, (args, res) in sig.functions.items():
            out.append(f"  fun {n} : {' * '.join(map(str, args))} -> {res};")
        for n, s in sig.variables.items():
            out.append(f"  var {n} : {s};")
        for r in sig.requirements:
            out.append(f"  require {format_term(r)};")
        out.append("}")
        out.append("")
    for name, st in model.structures.items():
        out.append(f"structure {name} of {model.structure_sigs[name]} {{")
        for s, atoms in sorted(st.carriers.items()):
            out.append(f"  carrier {s} = {format_value(frozenset(atoms))};")
        for n, v in st.constants.items():
            out.append(f"  {n} = {format_value(v)};")
        for fn, table in st.functions.items():
            for args in sorted(table, key=lambda a: tuple(value_key(x) for x in a)):
                shown = ", ".join(format_value(x) for x in args)
                out.append(f"  {fn}({shown}) = {format_value(table[args])};")
        out.append("}")
        out.append("")
    for name, mod in model.modules.items():
        schema = mod.inner
        assert isinstance(schema, NetSchema)
        out.append(f"module {name} uses {model.module_sigs[name]} {{")
        for p in schema.places.values():
            out.append(f"  place {p.name} : {p.sort};")
        for p, items in schema.initial.items():
            out.append(f"  init {p} : {_items(items)};")
        for t in schema.transitions.values():
            head = f"  transition {t.name}" + (f" if {format_term(t.guard)}" if t.guard is not None else "")
            if not (t.inputs or t.outputs):
                out.append(head + ";")
                continue
            out.append(head + " {")
            for p, items in t.inputs.items():
                out.append(f"    in {p} : {_items(items)};")
            for p, items in t.outputs.items():
                out.append(f"    out {p} : {_items(items)};")
            out.append("  }")
        for side, gates in (("left", mod.left), ("right", mod.right)):
            if gates:
                shown = ", ".join(g.label if g.label == g.element else f"{g.label} = {g.element}" for g in gates)
                out.append(f"  {side} {shown};")
        out.append("}")
        out.append("")
    for name, e in model.systems.items():
        out.append(f"system {name} = {format_expr(e)};")
    for inv in model.invariants:
        out.append(inv.describe())
    return "\n".join(out).rstrip() + "\n"
