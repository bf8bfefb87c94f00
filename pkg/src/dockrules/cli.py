"""Command-line entry point.

Exit status: 0 when clean, 1 when rule violations were found, 2 on usage or
input errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import abstraction as abst
from .corpus import Corpus, corpus_eu_summary, ingest, parse_all_phases
from .dockerfile import DockerfileError
from .enforce import average_violation_rate, enforce_corpus, filter_rules, metrics_table, rule_metrics
from .mine import format_mined, mine_report
from .rules import RuleError, format_rule, gold_rules, load_rules
from .schemas import SchemaError, bundled_schemas, load_schema_dir
from .tree import sexp_encode

EXIT_OK, EXIT_VIOLATIONS, EXIT_ERROR = 0, 1, 2


class UsageError(Exception):
    pass


def _merge(bundled, extra, key):
    """User entries replace bundled ones with the same key; new ones append."""
    extra_keys = {key(e) for e in extra}
    return [b for b in bundled if key(b) not in extra_keys] + list(extra)


def _schemas(args):
    base = bundled_schemas()
    if getattr(args, "schemas", None):
        return _merge(base, load_schema_dir(args.schemas), lambda s: s.root_kind)
    return base


def _abstractions(args):
    base = abst.bundled_abstractions()
    if getattr(args, "abstractions", None):
        return _merge(base, abst.load_abstractions(args.abstractions), lambda a: a.name)
    return base


def _corpus(args, paths) -> Corpus:
    jobs = getattr(args, "jobs", None) or os.cpu_count() or 1
    corpus = ingest(paths, getattr(args, "filter", None), _schemas(args), _abstractions(args), jobs)
    named = {str(Path(p)) for p in paths if Path(p).is_file()}
    for r in corpus.rejects:
        print(f"rejected {r.path}: {r.reason}", file=sys.stderr)
    if any(r.path in named for r in corpus.rejects):
        raise UsageError("one or more named files could not be parsed")
    return corpus


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def cmd_parse(args) -> int:
    text = Path(args.file).read_text(encoding="utf-8")
    parsed = parse_all_phases(text, _schemas(args), _abstractions(args))
    tree = {1: parsed.phase1, 2: parsed.phase2, 3: parsed.phase3}[args.phase]
    if args.abstract:
        tree = abst.abstract_tree(tree, _abstractions(args))
    if args.format == "json":
        report = parsed.eu_reports[args.phase]
        print(_json({"file": args.file, "phase": args.phase, "abstract": args.abstract,
                     "tree": sexp_encode(tree), "warnings": parsed.warnings,
                     "leaves": report.total_leaves, "eu_leaves": report.eu_leaves}))
    else:
        print(sexp_encode(tree))
        for w in parsed.warnings:
            print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def _rules(args):
    return load_rules(args.rules) if args.rules else gold_rules()


def cmd_enforce(args) -> int:
    rules = _rules(args)
    corpus = _corpus(args, args.paths)
    violations, metrics = enforce_corpus(((e.path, e.abstracted_tree) for e in corpus), rules)
    avg = average_violation_rate(metrics.values())
    if args.format == "json":
        for v in violations:
            print(v.to_json())
        print(_json({"summary": [{"rule": n, "support": m.support, "confidence": m.confidence,
                                  "violation_rate": m.violation_rate} for n, m in metrics.items()],
                     "average_violation_rate": avg, "files": len(corpus)}))
    else:
        for v in violations:
            print(f"{v.file}:{v.line}:{v.column}: {v.rule}")
        print()
        print(metrics_table(metrics), end="")
        print(f"average violation rate: {'-' if avg is None else f'{100 * avg:.2f}%'}")
    return EXIT_VIOLATIONS if violations else EXIT_OK


def cmd_mine(args) -> int:
    corpus = _corpus(args, args.paths)
    report = mine_report(corpus.trees(), args.kinds, args.min_support, _schemas(args))
    text = format_mined(report)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text, encoding="utf-8")
    if args.format == "json":
        print(_json({"rules": len(report.rules), "truncated_kinds": report.truncated_kinds,
                     "output": args.output}), file=sys.stderr if args.output == "-" else sys.stdout)
    elif args.output != "-":
        print(f"wrote {len(report.rules)} rules to {args.output}")
    return EXIT_OK


def cmd_stats(args) -> int:
    corpus = _corpus(args, args.paths)
    if not corpus.entries:
        raise UsageError("no Dockerfiles found")
    summary = corpus_eu_summary(corpus.entries)
    summary["rejects"] = [{"path": r.path, "reason": r.reason} for r in corpus.rejects]
    if args.format == "json":
        print(_json(summary))
        return EXIT_OK
    print(f"files: {summary['files']}  rejects: {len(corpus.rejects)}")
    print(f"{'metric':<8}{'mean':>9}{'median':>9}{'q1':>9}{'q3':>9}")
    for m in ("M1", "M2", "M3"):
        d = summary[m]
        print(f"{m:<8}" + "".join(f"{100 * d[k]:>8.2f}%" for k in ("mean", "median", "q1", "q3")))
    print(f"files with every command resolved: {100 * summary['fully_resolved_fraction']:.2f}%")
    return EXIT_OK


def cmd_filter_rules(args) -> int:
    rules = load_rules(args.rules)
    corpus = _corpus(args, [args.corpus])
    trees = corpus.trees()
    kept = filter_rules(rules, trees, args.min_support, args.min_confidence)
    if args.format == "json":
        out = []
        for r in kept:
            m = rule_metrics(trees, r)
            out.append({"rule": r.name, "support": m.support, "confidence": m.confidence})
        print(_json(out))
    else:
        print("\n".join(format_rule(r) for r in kept), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--schemas", metavar="DIR", default=argparse.SUPPRESS,
                        help="directory of extra *.schema files")
    common.add_argument("--abstractions", metavar="FILE", default=argparse.SUPPRESS,
                        help="extra abstractions (NAME PATTERN per line)")
    common.add_argument("--jobs", type=int, metavar="N", default=argparse.SUPPRESS,
                        help="parallel file workers (default: CPU count)")
    common.add_argument("--format", choices=("text", "json"), default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="dockrules", parents=[common],
                                     description="Phased Dockerfile parsing, rule mining and enforcement.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="print the tree of one Dockerfile")
    p.add_argument("file")
    p.add_argument("--phase", type=int, choices=(1, 2, 3), default=3)
    p.add_argument("--abstract", action="store_true", help="apply literal abstraction")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("enforce", parents=[common], help="check rules and list violations")
    p.add_argument("paths", nargs="+")
    p.add_argument("--rules", metavar="FILE", help="rule file (default: bundled gold rules)")
    p.add_argument("--filter", metavar="REGEX", help="file-name filter for directories")
    p.set_defaults(func=cmd_enforce)

    p = sub.add_parser("mine", parents=[common], help="mine local rules from a corpus")
    p.add_argument("paths", nargs="+")
    p.add_argument("--min-support", type=float, default=0.75)
    p.add_argument("--kinds", nargs="+", metavar="KIND")
    p.add_argument("-o", "--output", required=True, metavar="RULES")
    p.add_argument("--filter", metavar="REGEX")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("stats", parents=[common], help="EU leaf summary for a corpus")
    p.add_argument("paths", nargs="+")
    p.add_argument("--filter", metavar="REGEX")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("filter-rules", parents=[common], help="keep rules meeting thresholds")
    p.add_argument("--rules", required=True, metavar="FILE")
    p.add_argument("--corpus", required=True, metavar="PATH")
    p.add_argument("--min-support", type=float, default=50)
    p.add_argument("--min-confidence", type=float, default=0.75)
    p.add_argument("--filter", metavar="REGEX")
    p.set_defaults(func=cmd_filter_rules)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    if not hasattr(args, "format"):
        args.format = "text"
    try:
        return args.func(args)
    except (OSError, UsageError, DockerfileError, RuleError, SchemaError,
            abst.AbstractionError) as exc:
        print(f"dockrules: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
