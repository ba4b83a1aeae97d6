"""Command line: ``heraklit check|compose|instantiate|simulate|verify|invariants|mine|export``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from heraklit.algebra import validate_structure
from heraklit.composition import Module, flatten, leaves, module_to_dot, module_to_json
from heraklit.dsl import Model, build_expr, parse_expr, parse_model
from heraklit.errors import HeraklitError
from heraklit.invariants import explore
from heraklit.mining import EventLog, analyze
from heraklit.petri import Net, check_well_formed, dump_json, instantiate, net_to_json
from heraklit.runs import (
    Scenario,
    run_doc_to_dot,
    run_from_json,
    run_problems,
    run_to_json,
    run_to_jsonl,
    simulate,
)


class CommandError(HeraklitError):
    pass


def _load_model(path: str) -> Model:
    try:
        src = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CommandError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return parse_model(src)
    except HeraklitError as exc:
        raise CommandError(f"{path}: {exc}") from None


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CommandError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CommandError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _first(names, chosen: str | None) -> str | None:
    return chosen or next(iter(names), None)


def _system(model: Model, args: argparse.Namespace) -> Module:
    expr = getattr(args, "expr", None)
    if expr:
        return build_expr(parse_expr(expr, model), model.modules)
    return model.system(_first(model.systems, args.system))


def _net(model: Model, args: argparse.Namespace) -> Net:
    structure = model.structure(_first(model.structures, args.structure))
    return instantiate(flatten(_system(model, args)), structure)


# ---------------------------------------------------------------------------
# commands


def cmd_check(args: argparse.Namespace) -> int:
    model = _load_model(args.file)
    problems: list[str] = []
    for name, st in model.structures.items():
        sig = model.signatures[model.structure_sigs[name]]
        for v in validate_structure(sig, st).violations:
            problems.append(f"{model.where('structure', name)}: {v}")
    for name, mod in model.modules.items():
        for v in check_well_formed(mod.inner).violations:
            problems.append(f"{model.where('module', name)}: {v}")
    for name, expr in model.systems.items():
        try:
            system = build_expr(expr, model.modules)
        except HeraklitError as exc:
            problems.append(f"{model.where('system', name)}: composition error: {exc}")
            continue
        if any(leaf.is_opaque for leaf in leaves(system)):
            print(f"system {name}: composed (abstract; not flattened)")
            continue
        schema = flatten(system)
        for v in check_well_formed(schema).violations:
            problems.append(f"{model.where('system', name)}: {v}")
        print(f"system {name}: {len(schema.places)} places, {len(schema.transitions)} transitions")
    for p in problems:
        print(p, file=sys.stderr)
    if problems:
        print(f"{args.file}: {len(problems)} problem(s)", file=sys.stderr)
        return 1
    print(f"{args.file}: ok")
    return 0


def cmd_compose(args: argparse.Namespace) -> int:
    model = _load_model(args.file)
    system = _system(model, args)
    if args.out == "dot":
        _emit(module_to_dot(system), args.output)
    else:
        _emit(dump_json(module_to_json(system)), args.output)
    return 0


def cmd_instantiate(args: argparse.Namespace) -> int:
    model = _load_model(args.file)
    _emit(dump_json(net_to_json(_net(model, args))), args.output)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    model = _load_model(args.file)
    net = _net(model, args)
    doc = _load_json(args.scenario)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.max_steps is not None:
        doc["maxSteps"] = args.max_steps
    scenario = Scenario.from_json(doc, net)
    result = simulate(net, scenario)
    out = {
        "provenance": {
            "model": Path(args.file).name,
            "system": args.expr or _first(model.systems, args.system),
            "structure": _first(model.structures, args.structure),
            "seed": scenario.seed,
            "maxSteps": scenario.max_steps,
        },
        "outcome": result.outcome,
        "workloadFired": result.workload_fired,
        "finalMarking": result.marking.to_json(),
        **run_to_json(result.run),
    }
    _emit(dump_json(out), args.out)
    if args.log:
        Path(args.log).write_text(run_to_jsonl(result.run), encoding="utf-8")
    if args.dot:
        Path(args.dot).write_text(run_doc_to_dot(out), encoding="utf-8")
    if args.out:
        print(f"{len(result.run.events)} events, outcome {result.outcome} -> {args.out}")
    return 0 if result.outcome != "incomplete-workload" else 3


def cmd_verify(args: argparse.Namespace) -> int:
    model = _load_model(args.file)
    net = _net(model, args)
    run = run_from_json(_load_json(args.run), net)
    problems = run_problems(net, run)
    for p in problems:
        print(p, file=sys.stderr)
    if problems:
        return 1
    print(f"{args.run}: valid run of {len(run.events)} events")
    return 0


def cmd_invariants(args: argparse.Namespace) -> int:
    model = _load_model(args.file)
    net = _net(model, args)
    scenario = Scenario.from_json(_load_json(args.scenario), net) if args.scenario else Scenario()
    resources = [p for p in (args.resources or "").split(",") if p]
    report = explore(net, scenario.workload, model.invariants, args.max_states, resources)
    print(f"states {report.states}, edges {report.edges}, terminal {report.terminal_states}"
          + (" (truncated)" if report.truncated else ""))
    for name, violations in report.violations.items():
        status = "holds" if not violations else f"VIOLATED ({len(violations)}+)"
        print(f"  {name:<12} {status}")
        for v in violations[:5]:
            print(f"    {v}")
    if resources:
        print(f"  {'termination':<12} " + ("holds" if not report.unrestored_terminals else "VIOLATED"))
    return 0 if report.ok else 1


def _load_log(path: str) -> EventLog:
    if path.endswith(".jsonl"):
        try:
            return EventLog.from_jsonl(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CommandError(f"cannot read {path}: {exc.strerror}") from None
    doc = _load_json(path)
    if "events" not in doc:
        raise CommandError(f"{path}: not a run file (no 'events')")
    return EventLog.from_records(doc["events"], doc.get("provenance"))


def cmd_mine(args: argparse.Namespace) -> int:
    report = analyze(_load_log(args.run))
    if args.out:
        Path(args.out).write_text(dump_json(report.to_json()), encoding="utf-8")
    if args.format == "json" and not args.out:
        sys.stdout.write(dump_json(report.to_json()))
    else:
        sys.stdout.write(report.to_table())
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    doc = _load_json(args.run)
    if args.format == "dot":
        _emit(run_doc_to_dot(doc), args.output)
    else:
        keep = ("index", "transition", "binding", "consumed", "produced")
        _emit("".join(json.dumps({k: e[k] for k in keep}, sort_keys=True) + "\n" for e in doc["events"]), args.output)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heraklit", description="Compose, simulate and mine HERAKLIT models.")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_cmd(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("file", help="model source (.hkl)")
        p.add_argument("--system", help="system declaration to use (default: the first)")
        p.add_argument("--structure", help="structure to instantiate with (default: the first)")
        return p

    p = sub.add_parser("check", help="validate structures, modules and compositions")
    p.add_argument("file")
    p.set_defaults(func=cmd_check)

    p = model_cmd("compose", "print a composition as DOT or JSON")
    p.add_argument("--expr", help="composition expression, e.g. '[clients] . [admin]'")
    p.add_argument("--out", choices=("dot", "json"), default="json")
    p.add_argument("--output", help="write to this file instead of stdout")
    p.set_defaults(func=cmd_compose)

    p = model_cmd("instantiate", "print the flattened net with its initial marking")
    p.add_argument("--expr")
    p.add_argument("--output")
    p.set_defaults(func=cmd_instantiate)

    p = model_cmd("simulate", "run a workload scenario and record the concurrent run")
    p.add_argument("--expr")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--out", help="run file (.json); stdout if omitted")
    p.add_argument("--log", help="also write the JSON-lines event log here")
    p.add_argument("--dot", help="also write the run as DOT here")
    p.set_defaults(func=cmd_simulate)

    p = model_cmd("verify", "check that a run file is a valid run of the model")
    p.add_argument("--expr")
    p.add_argument("run")
    p.set_defaults(func=cmd_verify)

    p = model_cmd("invariants", "explore reachable markings and check declared invariants")
    p.add_argument("--expr")
    p.add_argument("--scenario")
    p.add_argument("--max-states", type=int, default=100_000)
    p.add_argument("--resources", help="comma-separated places that terminal states must restore")
    p.set_defaults(func=cmd_invariants)

    p = sub.add_parser("mine", help="waiting-time, rejection and utilization statistics of a run")
    p.add_argument("run", help="run file (.json) or event log (.jsonl)")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("export", help="convert a run file to DOT or a JSON-lines event log")
    p.add_argument("run")
    p.add_argument("--format", choices=("dot", "jsonl"), default="dot")
    p.add_argument("--output")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HeraklitError as exc:
        print(f"heraklit {args.command}: {exc}", file=sys.stderr)
        return 2
    except (KeyError, ValueError) as exc:
        print(f"heraklit {args.command}: malformed input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
