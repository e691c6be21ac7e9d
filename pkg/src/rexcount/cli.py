"""Command-line surface for the toolkit.

Subcommands: ``analyze`` (counter-ambiguity reports as JSON lines),
``match`` (streaming matching), ``compile`` (regex to automaton IR),
``simulate`` (IR-level simulation), ``cost`` (energy/area estimation),
and ``bench`` (ruleset batch statistics and node-count sweeps).

Machine-readable output goes to stdout, diagnostics to stderr. Exit
codes: 0 success, 1 usage, 2 I/O, 3 internal limit.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import cost as costmod
from . import hwir
from .analysis import DEFAULT_BUDGET, analyze
from .engine import FallbackRequired, MatchEvent, build_matcher, format_events
from .rewrite import UnfoldSizeError, normalize
from .rulesets import (
    Ruleset,
    analyze_ruleset,
    format_stats_csv,
    format_stats_table,
    ingest,
    load_ruleset,
    node_count_sweep,
)
from .syntax import RegexError, parse_detailed

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_LIMIT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _read_input(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _iter_ruleset_paths(paths: list[str]) -> list[Path]:
    out: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            out.extend(sorted(x for x in p.iterdir() if x.is_file() and not x.name.startswith(".")))
        else:
            out.append(p)
    return out


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    if args.rules:
        if args.rules == "-":
            ruleset = ingest(sys.stdin.read().splitlines(), "<stdin>")
        else:
            ruleset = load_ruleset(args.rules)
    elif args.pattern is not None:
        ruleset = ingest([args.pattern], "<arg>")
    else:
        print("analyze: provide a PATTERN or --rules FILE", file=sys.stderr)
        return EXIT_USAGE

    def one(rule):
        ast = normalize(parse_detailed(rule.pattern).ast)
        timings = []
        report = None
        for _ in range(max(1, args.trials)):
            t0 = time.perf_counter_ns()
            report = analyze(ast, args.mode, budget=args.budget, record_witness=args.witness)
            timings.append((time.perf_counter_ns() - t0) // 1000)
        kept = timings[args.warmup :] or timings
        obj = report.to_json_obj()
        obj["regex"] = rule.pattern
        obj["rule_id"] = rule.rule_id
        obj["micros"] = sum(kept) // len(kept)
        if not args.witness:
            for inst in obj["instances"]:
                inst.pop("witness", None)
        return obj

    if args.jobs > 1 and len(ruleset.rules) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(one, ruleset.rules))
    else:
        results = [one(r) for r in ruleset.rules]

    by_id = {obj["rule_id"]: obj for obj in results}
    rejected = {r.rule_id: r for r in ruleset.rejected}
    for rule_id in sorted(by_id.keys() | rejected.keys()):
        if rule_id in by_id:
            print(json.dumps(by_id[rule_id], sort_keys=True))
        else:
            rej = rejected[rule_id]
            print(json.dumps({"rule_id": rej.rule_id, "regex": rej.pattern, "rejected": rej.reason}, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# match / compile / simulate / cost
# ---------------------------------------------------------------------------


def _print_events(events: list[MatchEvent], fmt: str) -> None:
    if fmt == "json":
        print(json.dumps([{"rule_id": e.rule_id, "end_offset": e.end_offset} for e in events]))
    else:
        sys.stdout.write(format_events(events))


def cmd_match(args) -> int:
    data = _read_input(args.input)
    try:
        matcher = build_matcher(args.pattern, args.backend, budget=args.budget)
    except FallbackRequired as exc:
        print(f"match: {exc}; falling back to the reference backend", file=sys.stderr)
        matcher = build_matcher(args.pattern, "reference")
    _print_events(matcher.run(data), args.format)
    return EXIT_OK


def cmd_compile(args) -> int:
    opts = hwir.CompileOptions(
        unfold_threshold=args.threshold,
        force_unfold=args.force_unfold,
        budget=args.budget,
    )
    ir = hwir.compile_ast(parse_detailed(args.pattern).ast, opts)
    payload = hwir.emit_json(ir)
    if args.out == "-":
        sys.stdout.buffer.write(payload)
    else:
        Path(args.out).write_bytes(payload)
        counts = ir.counts()
        print(
            f"wrote {args.out}: {counts['hState']} hStates, "
            f"{counts['counter']} counters, {counts['bitvector']} bit vectors",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_simulate(args) -> int:
    ir = hwir.load_json(Path(args.ir).read_bytes())
    data = _read_input(args.input)
    events, trace = hwir.simulate_ir(ir, data)
    _print_events(events, args.format)
    if args.trace:
        print(json.dumps(trace.totals(), sort_keys=True), file=sys.stderr)
    return EXIT_OK


def cmd_cost(args) -> int:
    ir = hwir.load_json(Path(args.ir).read_bytes())
    data = _read_input(args.input)
    params = costmod.load_params(args.params) if args.params else costmod.CostParams()
    _, trace = hwir.simulate_ir(ir, data)
    report = costmod.estimate(ir, trace, params)
    if args.table:
        print(report.format_table())
    else:
        print(json.dumps(report.to_json_obj(), sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def _parse_thresholds(spec: str) -> list[int | None]:
    out: list[int | None] = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        out.append(None if part in ("full", "inf") else int(part))
    return out


def cmd_bench(args) -> int:
    paths = _iter_ruleset_paths(args.rulesets)
    if not paths:
        print("bench: no ruleset files found", file=sys.stderr)
        return EXIT_IO
    thresholds = _parse_thresholds(args.thresholds) if args.thresholds else []
    all_stats = []
    for path in paths:
        ruleset = load_ruleset(path)
        ruleset.name = path.name
        stats = analyze_ruleset(
            ruleset,
            mode=args.mode,
            budget=args.budget,
            jobs=args.jobs,
            trials=args.trials,
            warmup=args.warmup,
        )
        if thresholds:
            stats.node_counts, stats.node_count_skipped = node_count_sweep(ruleset, thresholds, args.budget)
        all_stats.append(stats)
        for rej in ruleset.rejected:
            print(f"{path.name}:{rej.line}: rejected ({rej.reason}): {rej.pattern}", file=sys.stderr)

    print(format_stats_table(all_stats))
    if thresholds:
        print()
        print("nodes per unfolding threshold:")
        print("benchmark,threshold,nodes,skipped")
        for stats in all_stats:
            for threshold in thresholds:
                label = "full" if threshold is None else str(threshold)
                print(f"{stats.name},{label},{stats.node_counts[threshold]},{stats.node_count_skipped[threshold]}")
    if args.csv:
        Path(args.csv).write_text(format_stats_csv(all_stats), encoding="utf-8")
        print(f"wrote {args.csv}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="rexcount", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="counter-ambiguity analysis (JSON lines)")
    p.add_argument("pattern", nargs="?", help="regex to analyze")
    p.add_argument("--rules", help="ruleset file (one regex per line), or - for stdin")
    p.add_argument("--mode", choices=("exact", "approx", "hybrid"), default="hybrid")
    p.add_argument("--witness", action="store_true", help="report ambiguity witnesses")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="token-pair budget")
    p.add_argument("--jobs", type=int, default=1, help="parallel analyses (order preserved)")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--warmup", type=int, default=0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("match", help="stream matching")
    p.add_argument("pattern")
    p.add_argument("input", help="input file, or - for stdin")
    p.add_argument("--backend", choices=("reference", "optimized", "nfa"), default="reference")
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("compile", help="compile a regex to automaton IR JSON")
    p.add_argument("pattern")
    p.add_argument("--threshold", type=int, default=0, help="unfold instances with max <= threshold")
    p.add_argument("--force-unfold", action="store_true")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--out", default="-", help="output path (default stdout)")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("simulate", help="simulate an IR file on an input")
    p.add_argument("ir")
    p.add_argument("input")
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.add_argument("--trace", action="store_true", help="print activity totals to stderr")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cost", help="estimate energy/area of an IR on an input")
    p.add_argument("ir")
    p.add_argument("input")
    p.add_argument("--params", help="cost parameter file (name = value lines)")
    p.add_argument("--table", action="store_true", help="aligned table instead of JSON")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("bench", help="ruleset statistics and node-count sweeps")
    p.add_argument("rulesets", nargs="+", help="ruleset files or directories")
    p.add_argument("--mode", choices=("exact", "approx", "hybrid"), default="hybrid")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--thresholds", help="comma list for the node-count sweep, e.g. 0,1,2,4,full")
    p.add_argument("--csv", help="write the stats table as CSV")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--warmup", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"rexcount: {exc}", file=sys.stderr)
        return EXIT_IO
    except UnfoldSizeError as exc:
        print(f"rexcount: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (RegexError, hwir.IrValidationError, costmod.TraceMismatchError, ValueError) as exc:
        print(f"rexcount: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
