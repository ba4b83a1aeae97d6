"""Many-sorted signatures, their finite structures, terms and evaluation.

Values are plain Python objects so they hash and compare cheaply:

* an atom of a basic sort is an :class:`Atom` (identity is the pair
  ``(name, sort)``),
* a tuple value is a Python ``tuple`` of values,
* a set value is a ``frozenset`` of values,
* a boolean value is a ``bool``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Union

from heraklit.errors import EvaluationError, SortError

# ---------------------------------------------------------------------------
# sorts

BASIC, POWERSET, TUPLE, BOOLEAN = "basic", "powerset", "tuple", "bool"


@dataclass(frozen=True)
class Sort:
    kind: str
    name: str = ""
    args: tuple["Sort", ...] = ()

    def __str__(self) -> str:
        if self.kind == BASIC:
            return self.name
        if self.kind == POWERSET:
            return f"P({self.args[0]})"
        if self.kind == TUPLE:
            return "(" + ", ".join(str(a) for a in self.args) + ")"
        return "Bool"

    @property
    def element(self) -> "Sort":
        if self.kind != POWERSET:
            raise SortError(f"{self} is not a powerset sort")
        return self.args[0]

    def basic_names(self) -> set[str]:
        if self.kind == BASIC:
            return {self.name}
        names: set[str] = set()
        for a in self.args:
            names |= a.basic_names()
        return names


def basic(name: str) -> Sort:
    return Sort(BASIC, name)


def powerset(elem: Sort | str) -> Sort:
    if isinstance(elem, str):
        elem = basic(elem)
    if elem.kind != BASIC:
        raise SortError(f"powersets are only formed over basic sorts, not {elem}")
    return Sort(POWERSET, args=(elem,))


def tuple_sort(*components: Sort | str) -> Sort:
    comps = tuple(basic(c) if isinstance(c, str) else c for c in components)
    if len(comps) < 2:
        raise SortError("a tuple sort needs at least two components")
    return Sort(TUPLE, args=comps)


BOOL = Sort(BOOLEAN)

# ---------------------------------------------------------------------------
# values


@dataclass(frozen=True, order=True)
class Atom:
    name: str
    sort: str

    def __repr__(self) -> str:
        return f"Atom({self.name!r}:{self.sort})"


Value = Union[Atom, tuple, frozenset, bool]


def value_key(v: Value) -> tuple:
    """Total order on values, used wherever output must be deterministic."""
    if isinstance(v, bool):
        return (3, v)
    if isinstance(v, Atom):
        return (0, v.name, v.sort)
    if isinstance(v, tuple):
        return (1, tuple(value_key(x) for x in v))
    if isinstance(v, frozenset):
        return (2, tuple(sorted(value_key(x) for x in v)))
    raise TypeError(f"not a value: {v!r}")


def format_value(v: Value) -> str:
    """Token literal: ``e1``, ``(c1,r1)``, ``{e1,e2}``, ``true``."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Atom):
        return v.name
    if isinstance(v, tuple):
        return "(" + ",".join(format_value(x) for x in v) + ")"
    if isinstance(v, frozenset):
        return "{" + ",".join(format_value(x) for x in sorted(v, key=value_key)) + "}"
    raise TypeError(f"not a value: {v!r}")


_LITERAL_TOKEN = re.compile(r"\s*(?:([A-Za-z0-9_]+)|(.))")


def _literal_tree(text: str) -> Any:
    tokens = [m.group(1) or m.group(2) for m in _LITERAL_TOKEN.finditer(text) if m.group(0).strip()]
    pos = 0

    def parse() -> Any:
        nonlocal pos
        if pos >= len(tokens):
            raise SortError(f"truncated literal {text!r}")
        tok = tokens[pos]
        pos += 1
        if tok in "({":
            close = ")" if tok == "(" else "}"
            items = []
            if pos < len(tokens) and tokens[pos] == close:
                pos += 1
                return (tok, items)
            while True:
                items.append(parse())
                if pos >= len(tokens):
                    raise SortError(f"unbalanced literal {text!r}")
                sep = tokens[pos]
                pos += 1
                if sep == close:
                    return (tok, items)
                if sep != ",":
                    raise SortError(f"unexpected {sep!r} in literal {text!r}")
        if not re.fullmatch(r"[A-Za-z0-9_]+", tok):
            raise SortError(f"unexpected {tok!r} in literal {text!r}")
        return tok

    tree = parse()
    if pos != len(tokens):
        raise SortError(f"trailing input in literal {text!r}")
    return tree


def value_from_tree(tree: Any, sort: Sort) -> Value:
    """Build a value of ``sort`` from a parsed literal tree (see the DSL)."""
    if sort.kind == BOOLEAN:
        if tree in ("true", "false"):
            return tree == "true"
        raise SortError(f"expected a boolean, got {tree!r}")
    if sort.kind == BASIC:
        if isinstance(tree, str):
            return Atom(tree, sort.name)
        raise SortError(f"expected an atom of sort {sort}")
    if sort.kind == TUPLE:
        if not (isinstance(tree, tuple) and tree[0] == "(") or len(tree[1]) != len(sort.args):
            raise SortError(f"expected a {len(sort.args)}-tuple of sort {sort}")
        return tuple(value_from_tree(t, s) for t, s in zip(tree[1], sort.args))
    if not (isinstance(tree, tuple) and tree[0] == "{"):
        raise SortError(f"expected a set literal of sort {sort}")
    return frozenset(value_from_tree(t, sort.element) for t in tree[1])


def parse_value(text: str, sort: Sort) -> Value:
    return value_from_tree(_literal_tree(text), sort)


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Apply:
    fn: str
    args: tuple["Term", ...]


@dataclass(frozen=True)
class Tup:
    items: tuple["Term", ...]


@dataclass(frozen=True)
class Member:
    element: "Term"
    collection: "Term"


@dataclass(frozen=True)
class Equals:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class And:
    items: tuple["Term", ...]


@dataclass(frozen=True)
class Subset:
    left: "Term"
    right: "Term"


Term = Union[Var, Const, Apply, Tup, Member, Equals, And, Subset]


def free_variables(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Const):
        return set()
    out: set[str] = set()
    for sub in subterms(t):
        out |= free_variables(sub)
    return out


def subterms(t: Term) -> tuple[Term, ...]:
    if isinstance(t, (Var, Const)):
        return ()
    if isinstance(t, Apply):
        return t.args
    if isinstance(t, (Tup, And)):
        return t.items
    if isinstance(t, Member):
        return (t.element, t.collection)
    return (t.left, t.right)


def format_term(t: Term) -> str:
    """Render a term in the surface syntax accepted by the DSL parser."""
    if isinstance(t, (Var, Const)):
        return t.name
    if isinstance(t, Apply):
        return f"{t.fn}(" + ", ".join(format_term(a) for a in t.args) + ")"
    if isinstance(t, Tup):
        return "(" + ", ".join(format_term(a) for a in t.items) + ")"
    if isinstance(t, Member):
        return f"{_operand(t.element)} in {_operand(t.collection)}"
    if isinstance(t, Equals):
        return f"{_operand(t.left)} == {_operand(t.right)}"
    if isinstance(t, Subset):
        return f"{_operand(t.left)} <= {_operand(t.right)}"
    return " and ".join(f"({format_term(i)})" if isinstance(i, And) else format_term(i) for i in t.items)


def _operand(t: Term) -> str:
    # relation operands must be primaries
    if isinstance(t, (Member, Equals, Subset, And)):
        return f"({format_term(t)})"
    return format_term(t)


# ---------------------------------------------------------------------------
# signatures


@dataclass(frozen=True)
class Signature:
    sorts: frozenset[str] = frozenset()
    constants: Mapping[str, Sort] = field(default_factory=dict)
    functions: Mapping[str, tuple[tuple[Sort, ...], Sort]] = field(default_factory=dict)
    variables: Mapping[str, Sort] = field(default_factory=dict)
    requirements: tuple[Term, ...] = ()

    def symbol_kind(self, name: str) -> str | None:
        for kind, table in (
            ("sort", self.sorts),
            ("constant", self.constants),
            ("function", self.functions),
            ("variable", self.variables),
        ):
            if name in table:
                return kind
        return None

    def check(self) -> list[str]:
        """Violations of the signature's own invariants."""
        problems: list[str] = []
        seen: dict[str, str] = {}
        for kind, names in (
            ("sort", self.sorts),
            ("constant", self.constants),
            ("function", self.functions),
            ("variable", self.variables),
        ):
            for n in names:
                if n in seen:
                    problems.append(f"symbol {n} declared as both {seen[n]} and {kind}")
                seen.setdefault(n, kind)

        def check_sort(where: str, s: Sort) -> None:
            missing = s.basic_names() - set(self.sorts)
            if missing:
                problems.append(f"{where} uses undeclared sort {', '.join(sorted(missing))}")

        for n, s in self.constants.items():
            check_sort(f"constant {n}", s)
        for n, (args, res) in self.functions.items():
            for a in args:
                check_sort(f"function {n}", a)
            check_sort(f"function {n}", res)
        for n, s in self.variables.items():
            check_sort(f"variable {n}", s)
        for req in self.requirements:
            try:
                if sort_of(req, self) != BOOL:
                    problems.append(f"requirement {format_term(req)} is not boolean")
            except SortError as exc:
                problems.append(f"requirement {format_term(req)}: {exc}")
        return problems

    def union(self, other: "Signature") -> "Signature":
        """Merge two signatures; shared symbols must agree."""
        if self == other:
            return self
        merged: list[dict] = []
        for mine, theirs, what in (
            (self.constants, other.constants, "constant"),
            (self.functions, other.functions, "function"),
            (self.variables, other.variables, "variable"),
        ):
            table = dict(mine)
            for k, v in theirs.items():
                if k in table and table[k] != v:
                    raise SortError(f"{what} {k} declared with conflicting sorts")
                table[k] = v
            merged.append(table)
        reqs = list(self.requirements)
        reqs += [r for r in other.requirements if r not in reqs]
        return Signature(self.sorts | other.sorts, merged[0], merged[1], merged[2], tuple(reqs))


def sort_of(t: Term, sig: Signature) -> Sort:
    """Infer the sort of ``t`` or raise :class:`SortError`."""
    if isinstance(t, Var):
        if t.name not in sig.variables:
            raise SortError(f"unknown variable {t.name}")
        return sig.variables[t.name]
    if isinstance(t, Const):
        if t.name not in sig.constants:
            raise SortError(f"unknown constant {t.name}")
        return sig.constants[t.name]
    if isinstance(t, Apply):
        if t.fn not in sig.functions:
            raise SortError(f"unknown function {t.fn}")
        params, result = sig.functions[t.fn]
        if len(params) != len(t.args):
            raise SortError(f"{t.fn} expects {len(params)} arguments, got {len(t.args)}")
        for p, a in zip(params, t.args):
            got = sort_of(a, sig)
            if got != p:
                raise SortError(f"argument {format_term(a)} of {t.fn} has sort {got}, expected {p}")
        return result
    if isinstance(t, Tup):
        return tuple_sort(*(sort_of(i, sig) for i in t.items))
    if isinstance(t, Member):
        coll = sort_of(t.collection, sig)
        elem = sort_of(t.element, sig)
        if coll.kind != POWERSET or coll.element != elem:
            raise SortError(f"membership of {elem} in {coll}")
        return BOOL
    if isinstance(t, Equals):
        left, right = sort_of(t.left, sig), sort_of(t.right, sig)
        if left != right:
            raise SortError(f"equality between {left} and {right}")
        return BOOL
    if isinstance(t, Subset):
        left, right = sort_of(t.left, sig), sort_of(t.right, sig)
        if left.kind != POWERSET or left != right:
            raise SortError(f"subset between {left} and {right}")
        return BOOL
    if isinstance(t, And):
        for i in t.items:
            if sort_of(i, sig) != BOOL:
                raise SortError(f"conjunct {format_term(i)} is not boolean")
        return BOOL
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# structures


@dataclass(frozen=True)
class Structure:
    signature: Signature
    carriers: Mapping[str, frozenset[Atom]] = field(default_factory=dict)
    constants: Mapping[str, Value] = field(default_factory=dict)
    functions: Mapping[str, Mapping[tuple, Value]] = field(default_factory=dict)

    @classmethod
    def from_literals(
        cls,
        sig: Signature,
        carriers: Mapping[str, Iterable[str]],
        constants: Mapping[str, str] | None = None,
        functions: Mapping[str, Mapping[tuple[str, ...], str]] | None = None,
    ) -> "Structure":
        """Convenience constructor taking token literals instead of values."""
        cars = {s: frozenset(Atom(n, s) for n in names) for s, names in carriers.items()}
        consts = {n: parse_value(text, sig.constants[n]) for n, text in (constants or {}).items()}
        tables: dict[str, dict[tuple, Value]] = {}
        for fn, table in (functions or {}).items():
            params, result = sig.functions[fn]
            tables[fn] = {
                tuple(parse_value(a, p) for a, p in zip(args, params)): parse_value(v, result)
                for args, v in table.items()
            }
        return cls(sig, cars, consts, tables)

    def carrier(self, sort: Sort) -> list[Value]:
        """All values of ``sort``, in deterministic order."""
        if sort.kind == BASIC:
            return sorted(self.carriers.get(sort.name, ()), key=value_key)
        if sort.kind == BOOLEAN:
            return [False, True]
        if sort.kind == TUPLE:
            return [tuple(p) for p in itertools.product(*(self.carrier(a) for a in sort.args))]
        elems = self.carrier(sort.element)
        subsets = itertools.chain.from_iterable(
            itertools.combinations(elems, k) for k in range(len(elems) + 1)
        )
        return [frozenset(s) for s in subsets]

    def inhabits(self, v: Value, sort: Sort) -> bool:
        if sort.kind == BASIC:
            return isinstance(v, Atom) and v.sort == sort.name and v in self.carriers.get(sort.name, ())
        if sort.kind == BOOLEAN:
            return isinstance(v, bool)
        if sort.kind == TUPLE:
            return (
                isinstance(v, tuple)
                and len(v) == len(sort.args)
                and all(self.inhabits(x, s) for x, s in zip(v, sort.args))
            )
        return isinstance(v, frozenset) and all(self.inhabits(x, sort.element) for x in v)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def bindings_over(st: Structure, names: Iterable[str]) -> Iterator[dict[str, Value]]:
    """Every binding of ``names`` over the structure's carriers."""
    names = sorted(names)
    sig = st.signature
    for combo in itertools.product(*(st.carrier(sig.variables[n]) for n in names)):
        yield dict(zip(names, combo))


def validate_structure(sig: Signature, st: Structure) -> ValidationReport:
    """Check that ``st`` is a total, well-sorted interpretation of ``sig``.

    Requirements may mention variables; they are then read as universally
    quantified over the finite carriers.
    """
    report = ValidationReport(sig.check())
    v = report.violations
    for s in sorted(sig.sorts):
        if s not in st.carriers:
            v.append(f"sort {s} has no carrier")
            continue
        foreign = [a for a in st.carriers[s] if not (isinstance(a, Atom) and a.sort == s)]
        if foreign:
            v.append(f"carrier of {s} holds atoms of another sort")
    for s in sorted(set(st.carriers) - set(sig.sorts)):
        v.append(f"carrier given for undeclared sort {s}")

    for name, sort in sorted(sig.constants.items()):
        if name not in st.constants:
            v.append(f"constant {name} unassigned")
        elif not st.inhabits(st.constants[name], sort):
            v.append(f"constant {name} = {format_value(st.constants[name])} is not in sort {sort}")
    for name in sorted(set(st.constants) - set(sig.constants)):
        v.append(f"constant {name} is not declared")

    for name, (params, result) in sorted(sig.functions.items()):
        table = st.functions.get(name)
        if table is None:
            v.append(f"function {name} unassigned")
            continue
        domain = [tuple(p) for p in itertools.product(*(st.carrier(p) for p in params))]
        missing = [args for args in domain if args not in table]
        if missing:
            shown = ", ".join(format_value(a if len(a) > 1 else a[0]) for a in missing[:3])
            v.append(f"function {name} is partial: no value for {shown}")
        extra = [args for args in table if args not in set(domain)]
        if extra:
            v.append(f"function {name} has entries outside its domain")
        for args, val in table.items():
            if not st.inhabits(val, result):
                v.append(f"function {name} maps to {format_value(val)}, not in sort {result}")
                break
    for name in sorted(set(st.functions) - set(sig.functions)):
        v.append(f"function {name} is not declared")

    if v:
        return report  # requirements are meaningless over a broken structure
    for req in sig.requirements:
        free = free_variables(req)
        if not all(eval_term(req, st, b) is True for b in bindings_over(st, free)):
            v.append(f"requirement {format_term(req)} violated")
    return report


def eval_term(t: Term, st: Structure, b: Mapping[str, Value]) -> Value:
    """Evaluate ``t`` under binding ``b``; sort errors and unbound variables raise."""
    if isinstance(t, Var):
        if t.name not in b:
            raise EvaluationError(f"unbound variable {t.name}")
        return b[t.name]
    if isinstance(t, Const):
        if t.name not in st.constants:
            raise EvaluationError(f"constant {t.name} has no value")
        return st.constants[t.name]
    if isinstance(t, Apply):
        args = tuple(eval_term(a, st, b) for a in t.args)
        table = st.functions.get(t.fn)
        if table is None:
            raise EvaluationError(f"function {t.fn} has no table")
        try:
            return table[args]
        except KeyError:
            raise EvaluationError(f"{t.fn} undefined at {', '.join(map(format_value, args))}") from None
    if isinstance(t, Tup):
        return tuple(eval_term(i, st, b) for i in t.items)
    if isinstance(t, Member):
        coll = eval_term(t.collection, st, b)
        if not isinstance(coll, frozenset):
            raise SortError(f"{format_term(t.collection)} is not a set")
        return eval_term(t.element, st, b) in coll
    if isinstance(t, Equals):
        left, right = eval_term(t.left, st, b), eval_term(t.right, st, b)
        if type(left) is not type(right):
            raise SortError(f"comparing values of different shape in {format_term(t)}")
        return left == right
    if isinstance(t, Subset):
        left, right = eval_term(t.left, st, b), eval_term(t.right, st, b)
        if not (isinstance(left, frozenset) and isinstance(right, frozenset)):
            raise SortError(f"subset of non-sets in {format_term(t)}")
        return left <= right
    if isinstance(t, And):
        result = True
        for i in t.items:
            val = eval_term(i, st, b)
            if not isinstance(val, bool):
                raise SortError(f"conjunct {format_term(i)} is not boolean")
            result = result and val
        return result
    raise TypeError(f"not a term: {t!r}")
