"""Command-line entry point.

Exit codes: 0 the requested properties hold, 1 violations found, 2 input or
validation error, 3 combinatorial budget exceeded or no coordination found.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from .controllability import is_locally_controllable
from .dsl import parse_scenario, render_scenario
from .enforcement import DEFAULT_MAX_COORD, DEFAULT_SEARCH_BUDGET, synthesize_minimal_coordination
from .errors import BudgetExceeded, InvalidScenario, ParseError, XmiImportError
from .model import Scenario, check_valid
from .observability import is_locally_observable
from .report import ALL_PROPERTIES, analyze, export_report_json, render_report
from .semantics import DEFAULT_BUDGET, DEFAULT_LOOP_CAP
from .xmi import import_xmi

EXIT_OK, EXIT_VIOLATIONS, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3


class InputError(Exception):
    pass


def load_scenario(path: str, loop_cap: int = DEFAULT_LOOP_CAP) -> Scenario:
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix not in (".dco", ".uml", ".xmi"):
        raise InputError(f"{path}: unknown input format (expected .dco, .uml or .xmi)")
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    if suffix == ".dco":
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError:
            raise InputError(f"{path}: not UTF-8 text") from None
        s = parse_scenario(text)
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            s = import_xmi(data, loop_cap)
        for w in caught:
            print(f"{path}: warning: {w.message}", file=sys.stderr)
    check_valid(s)
    return s


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _properties(text: str) -> tuple:
    props = tuple(p.strip() for p in text.split(",") if p.strip())
    bad = [p for p in props if p not in ALL_PROPERTIES]
    if bad or not props:
        raise argparse.ArgumentTypeError(f"choose from {','.join(ALL_PROPERTIES)}")
    return props


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdlocal",
        description="Local controllability and observability analysis of distributed test scenarios.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, coordination=True):
        p.add_argument("file", help="scenario file (.dco, .uml or .xmi)")
        p.add_argument("--loop-bound", type=_positive, default=DEFAULT_LOOP_CAP,
                       help="maximum unfolded loop iterations (default %(default)s)")
        p.add_argument("--budget", type=_positive, default=DEFAULT_BUDGET,
                       help="maximum size of any enumerated set (default %(default)s)")
        if coordination:
            p.add_argument("--max-coord", type=_positive, default=DEFAULT_MAX_COORD,
                           help="largest coordination set tried (default %(default)s)")
            p.add_argument("--search-budget", type=_positive, default=DEFAULT_SEARCH_BUDGET,
                           help="maximum candidate subsets verified (default %(default)s)")

    a = sub.add_parser("analyze", help="report traces, verdicts and coordination messages")
    common(a)
    a.add_argument("--properties", type=_properties, default=ALL_PROPERTIES,
                   help="comma-separated subset of " + ",".join(ALL_PROPERTIES))
    a.add_argument("--format", choices=("text", "json"), default="text")
    a.add_argument("--ordering-constraints", action="store_true",
                   help="also print coordination messages as ordering constraints")
    a.add_argument("--out", help="write the report here instead of stdout")

    r = sub.add_parser("refine", help="write the scenario with synthesized coordination messages")
    common(r)
    r.add_argument("--out", required=True, help="output .dco file")

    c = sub.add_parser("check", help="exit 0 iff locally controllable and locally observable")
    common(c, coordination=False)
    return parser


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _analyze(args, s: Scenario) -> int:
    report = analyze(s, args.properties, args.loop_bound, args.max_coord, args.budget, args.search_budget)
    if args.format == "json":
        _write(export_report_json(report), args.out)
    else:
        _write(render_report(report, args.ordering_constraints), args.out)
    syn = report.coordination
    if syn is not None and syn.status == "not_found":
        return EXIT_BUDGET
    if report.has_violations or (syn is not None and syn.status == "synthesized"):
        return EXIT_VIOLATIONS
    return EXIT_OK


def _refine(args, s: Scenario) -> int:
    if not s.is_coordination_free:
        if is_locally_controllable(s, args.loop_bound, args.budget) and \
                is_locally_observable(s, args.loop_bound, args.budget):
            _write(render_scenario(s), args.out)
            return EXIT_OK
        print("refine expects a scenario without coordination messages", file=sys.stderr)
        return EXIT_INPUT
    syn = synthesize_minimal_coordination(s, args.loop_bound, args.max_coord, args.budget, args.search_budget)
    if syn.status == "not_found":
        print(f"no coordination set found within bound {syn.bound}", file=sys.stderr)
        return EXIT_BUDGET
    refined = syn.refined.scenario if syn.refined else s
    _write(render_scenario(refined), args.out)
    for cm in syn.messages:
        print(f"added {cm.render()}")
    return EXIT_OK


def _check(args, s: Scenario) -> int:
    ok = is_locally_controllable(s, args.loop_bound, args.budget) and \
        is_locally_observable(s, args.loop_bound, args.budget)
    return EXIT_OK if ok else EXIT_VIOLATIONS


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        s = load_scenario(args.file, args.loop_bound)
        handler = {"analyze": _analyze, "refine": _refine, "check": _check}[args.command]
        return handler(args, s)
    except (InputError, InvalidScenario) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ParseError, XmiImportError) as exc:
        for err in exc.errors:
            print(f"{args.file}:{err}" if isinstance(exc, ParseError) else f"{args.file}: {err}",
                  file=sys.stderr)
        return EXIT_INPUT
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
