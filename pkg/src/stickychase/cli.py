"""Batch command-line front end.

Subcommands: classify, chase, query, rewrite, check.  Exit codes: 0 on
success (or a Boolean yes), 1 for a Boolean no, 2 for parse errors, 3
when the selected class precondition fails without --force, 4 for I/O
failures.  Set STICKYCHASE_LOG=debug for engine event logging on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from .answering import SelectionPreconditionError, answer_query
from .chase import Budget, ChaseStatus, chase, check_stickiness_bounded, trace_to_jsonl
from .magic import magic_rewrite
from .marking import SelectionFunctionId, classify
from .model import Program, make_program
from .parsing import (
    IoFailure,
    ParseError,
    load_facts_delimited,
    parse_program,
    parse_query,
    render_program,
    render_query,
)
from .render import null_names_for, render_ground_atom

EXIT_OK = 0
EXIT_NO = 1
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_IO = 4

log = logging.getLogger("stickychase")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stickychase")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("program", help="program file (.dlp)")
        p.add_argument("--format", choices=["text", "json"], default="text")
        p.add_argument(
            "--facts",
            action="append",
            default=[],
            metavar="PRED=PATH",
            help="load extra facts for PRED from a delimited file",
        )
        p.add_argument("--delimiter", default=",", help="facts file delimiter")

    p = sub.add_parser("classify", help="report the program class memberships")
    common(p)

    p = sub.add_parser("chase", help="materialize the chase under a budget")
    common(p)
    p.add_argument("--max-steps", type=int, default=100000)
    p.add_argument("--max-atoms", type=int, default=100000)
    p.add_argument("--trace", help="write the chase trace as JSON lines")

    p = sub.add_parser("query", help="answer a conjunctive query")
    common(p)
    q = p.add_mutually_exclusive_group(required=True)
    q.add_argument("--query", help="query text, e.g. '?(X) <- p(X,Y).'")
    q.add_argument("--query-file")
    p.add_argument(
        "--selection",
        choices=[s.value for s in SelectionFunctionId],
        default=SelectionFunctionId.EXISTENTIAL.value,
    )
    p.add_argument("--resumptions", type=int, default=None)
    p.add_argument("--rewrite-first", action="store_true")
    p.add_argument("--merge-magic", action="store_true")
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("rewrite", help="apply the magic-sets rewriting")
    common(p)
    q = p.add_mutually_exclusive_group(required=True)
    q.add_argument("--query")
    q.add_argument("--query-file")
    p.add_argument("--merge-magic", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("check", help="bounded stickiness-violation detector")
    common(p)
    p.add_argument(
        "--selection",
        choices=[s.value for s in SelectionFunctionId],
        default=SelectionFunctionId.BOTTOM.value,
    )
    p.add_argument("--steps", type=int, default=100)
    return parser


def _read_file(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def _load_program(args) -> Program:
    program = parse_program(_read_file(args.program))
    if not args.facts:
        return program
    schema = dict(program.schema)
    extra = []
    for spec in args.facts:
        pred, _, path = spec.partition("=")
        if not path:
            print(f"--facts expects PRED=PATH, got {spec!r}", file=sys.stderr)
            raise ParseError([])
        if pred not in schema:
            print(f"unknown predicate {pred!r} in --facts", file=sys.stderr)
            raise ParseError([])
        extra.extend(
            load_facts_delimited(path, pred, schema[pred], delimiter=args.delimiter)
        )
    return make_program(program.rules, list(program.facts) + extra)


def _load_query(args):
    if args.query is not None:
        return parse_query(args.query)
    return parse_query(_read_file(args.query_file))


def _engine_log(record: dict) -> None:
    log.debug("%s", json.dumps(record, sort_keys=True))


def cmd_classify(args) -> int:
    program = _load_program(args)
    report = classify(program)
    data = report.to_json_dict()
    if args.format == "json":
        print(json.dumps(data, sort_keys=True, indent=2))
    else:
        for key in ("sticky", "weakly_acyclic", "weakly_sticky", "jws"):
            print(f"{key}: {'yes' if data[key] else 'no'}")
        print("finite_rank_positions: " + ", ".join(data["finite_rank_positions"]))
        print(
            "finite_existential_positions: "
            + ", ".join(data["finite_existential_positions"])
        )
        for w in data["witnesses"]:
            print(
                f"witness[{w['class']}]: rule {w['rule']} variable {w['variable']}"
                f" ({w['reason']})"
            )
    return EXIT_OK


def cmd_chase(args) -> int:
    program = _load_program(args)
    result = chase(program, Budget(max_steps=args.max_steps, max_atoms=args.max_atoms))
    atoms = result.instance.atoms()
    names = null_names_for(atoms)
    rendered = [render_ground_atom(a, names) for a in atoms]
    if args.trace:
        try:
            with open(args.trace, "w", encoding="utf-8") as fh:
                fh.write(trace_to_jsonl(result.trace))
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
    if args.format == "json":
        print(
            json.dumps(
                {"status": result.status.value, "atoms": rendered},
                sort_keys=True,
                indent=2,
            )
        )
    else:
        print(f"% status: {result.status.value}")
        for line in rendered:
            print(line + ".")
    return EXIT_OK


def cmd_query(args) -> int:
    program = _load_program(args)
    query = _load_query(args)
    selection = SelectionFunctionId(args.selection)
    logger = _engine_log if log.isEnabledFor(logging.DEBUG) else None

    if args.rewrite_first:
        rewriting = magic_rewrite(
            program, query, merge_equivalent_magic=args.merge_magic
        )
        program = rewriting.as_program()
        query = rewriting.adorned_query
        selection = SelectionFunctionId.EXISTENTIAL

    answers, _state = answer_query(
        program,
        query,
        selection,
        resumptions_override=args.resumptions,
        force=args.force,
        log=logger,
    )
    if args.format == "json":
        payload = {
            "answers": sorted(list(t) for t in answers.tuples),
            "boolean": answers.boolean,
            "resumptions_used": answers.resumptions_used,
        }
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        if answers.boolean is not None:
            print("yes" if answers.boolean else "no")
        else:
            for t in sorted(answers.tuples):
                print(",".join(t))
    if answers.boolean is False:
        return EXIT_NO
    return EXIT_OK


def cmd_rewrite(args) -> int:
    program = _load_program(args)
    query = _load_query(args)
    rewriting = magic_rewrite(program, query, merge_equivalent_magic=args.merge_magic)
    text = render_program(rewriting.as_program())
    text += "% query: " + render_query(rewriting.adorned_query) + "\n"
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
    else:
        print(text, end="")
    return EXIT_OK


def cmd_check(args) -> int:
    program = _load_program(args)
    verdict = check_stickiness_bounded(
        program, args.steps, SelectionFunctionId(args.selection)
    )
    if args.format == "json":
        if verdict.violation is None:
            payload = {"verdict": "no_violation_up_to_k", "steps": verdict.steps_checked}
        else:
            v = verdict.violation
            names = null_names_for([v.missing_atom])
            payload = {
                "verdict": "violation",
                "step": v.step_index,
                "rule": v.rule_id,
                "variable": v.variable,
                "value": _term_text(v.value),
                "missing_atom": render_ground_atom(v.missing_atom, names),
            }
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        if verdict.violation is None:
            print(f"no_violation_up_to_k (checked {verdict.steps_checked} steps)")
        else:
            v = verdict.violation
            names = null_names_for([v.missing_atom])
            print(
                f"violation: step {v.step_index} rule {v.rule_id} variable "
                f"{v.variable} value {_term_text(v.value)} not propagated to "
                f"{render_ground_atom(v.missing_atom, names)}"
            )
    return EXIT_OK


def _term_text(term) -> str:
    from .render import render_term_str

    return render_term_str(term, None)


_COMMANDS = {
    "classify": cmd_classify,
    "chase": cmd_chase,
    "query": cmd_query,
    "rewrite": cmd_rewrite,
    "check": cmd_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    if os.environ.get("STICKYCHASE_LOG"):
        logging.basicConfig(stream=sys.stderr, level=logging.DEBUG)
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as exc:
        for diag in exc.diagnostics:
            print(str(diag), file=sys.stderr)
        return EXIT_PARSE
    except SelectionPreconditionError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_PRECONDITION
    except IoFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
