"""Ruleset ingestion and batch statistics.

A ruleset is plain text, one pattern per line; ``#`` starts a comment.
PCRE-style ``/pattern/flags`` wrappers are stripped; only flags that do
not change the dialect's semantics are accepted (``s`` is a no-op here
because the dot already matches every byte). Anything the dialect
cannot faithfully express is recorded as a rejected rule with a reason,
never silently altered.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .analysis import Verdict, analyze
from .rewrite import count_instances, max_upper_bound, normalize
from .syntax import (
    Node,
    RegexSyntaxError,
    UnsupportedPatternError,
    parse_detailed,
)

_NOOP_FLAGS = set("s")


@dataclass(frozen=True)
class Rule:
    rule_id: int  # 1-based source line number
    pattern: str
    line: int
    flags: str = ""


@dataclass(frozen=True)
class RejectedRule:
    rule_id: int
    pattern: str
    line: int
    reason: str


@dataclass
class Ruleset:
    name: str
    rules: list[Rule] = field(default_factory=list)
    rejected: list[RejectedRule] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.rules) + len(self.rejected)


def _strip_wrapper(text: str) -> tuple[str, str]:
    """Strip a /pattern/flags wrapper, returning (pattern, flags)."""
    if len(text) >= 2 and text.startswith("/"):
        end = text.rfind("/")
        if end > 0:
            flags = text[end + 1 :]
            if flags.isalpha() or flags == "":
                return text[1:end], flags
    return text, ""


def ingest(lines, name: str) -> Ruleset:
    """Classify every line as a rule, a comment, or a rejected record."""
    ruleset = Ruleset(name)
    for lineno, raw in enumerate(lines, 1):
        text = raw.rstrip("\n")
        stripped = text.strip()
        if not stripped or stripped.startswith("#"):
            continue
        pattern, flags = _strip_wrapper(stripped)
        bad_flags = set(flags) - _NOOP_FLAGS
        if bad_flags:
            ruleset.rejected.append(
                RejectedRule(lineno, stripped, lineno, f"unsupported flag: {''.join(sorted(bad_flags))}")
            )
            continue
        try:
            parse_detailed(pattern)
        except UnsupportedPatternError as exc:
            reason = ",".join(sorted(set(exc.diagnostics.reasons())))
            ruleset.rejected.append(RejectedRule(lineno, stripped, lineno, reason))
            continue
        except RegexSyntaxError as exc:
            ruleset.rejected.append(RejectedRule(lineno, stripped, lineno, f"syntax: {exc}"))
            continue
        ruleset.rules.append(Rule(lineno, pattern, lineno, flags))
    return ruleset


def load_ruleset(path) -> Ruleset:
    with open(path, "r", encoding="utf-8", errors="surrogateescape") as fh:
        return ingest(fh, str(path))


# ---------------------------------------------------------------------------
# Batch statistics
# ---------------------------------------------------------------------------


@dataclass
class RuleStats:
    rule_id: int
    pattern: str
    mu: int  # maximum repetition upper bound
    counting: bool
    verdict: Verdict
    micros: int


@dataclass
class BenchStats:
    name: str
    total: int
    supported: int
    counting: int
    ambiguous: int
    rules: list[RuleStats] = field(default_factory=list)
    node_counts: dict[int | None, int] = field(default_factory=dict)
    node_count_skipped: dict[int | None, int] = field(default_factory=dict)

    def row(self) -> tuple:
        return (self.name, self.total, self.supported, self.counting, self.ambiguous)


def analyze_ruleset(
    ruleset: Ruleset,
    mode: str = "hybrid",
    budget: int | None = None,
    jobs: int = 1,
    trials: int = 1,
    warmup: int = 0,
) -> BenchStats:
    """Per-rule ambiguity statistics in source order.

    ``trials``/``warmup`` mirror repeated-measurement methodology: the
    analysis runs ``trials`` times and the reported time is the mean of
    the post-warmup runs.
    """
    from .analysis import DEFAULT_BUDGET

    budget = DEFAULT_BUDGET if budget is None else budget

    def one(rule: Rule) -> RuleStats:
        ast = normalize(parse_detailed(rule.pattern).ast)
        instances = count_instances(ast)
        timings = []
        report = None
        for _ in range(max(1, trials)):
            t0 = time.perf_counter_ns()
            report = analyze(ast, mode, budget=budget, record_witness=False)
            timings.append((time.perf_counter_ns() - t0) // 1000)
        kept = timings[warmup:] or timings
        return RuleStats(
            rule_id=rule.rule_id,
            pattern=rule.pattern,
            mu=max_upper_bound(ast),
            counting=bool(instances),
            verdict=report.verdict,
            micros=sum(kept) // len(kept),
        )

    if jobs > 1 and len(ruleset.rules) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            stats = list(pool.map(one, ruleset.rules))
    else:
        stats = [one(r) for r in ruleset.rules]

    return BenchStats(
        name=ruleset.name,
        total=ruleset.total,
        supported=len(ruleset.rules),
        counting=sum(1 for s in stats if s.counting),
        ambiguous=sum(1 for s in stats if s.verdict is Verdict.AMBIGUOUS),
        rules=stats,
    )


def node_count_sweep(ruleset: Ruleset, thresholds, budget: int | None = None) -> tuple[dict, dict]:
    """Total compiled IR nodes per unfolding threshold (None = full).

    Rules whose unfolding exceeds the node limit are skipped and counted
    separately; the curve then covers the rules that fit.
    """
    from .analysis import DEFAULT_BUDGET
    from .hwir import CompileOptions, compile_ast
    from .rewrite import UnfoldSizeError

    budget = DEFAULT_BUDGET if budget is None else budget
    counts: dict[int | None, int] = {}
    skipped: dict[int | None, int] = {}
    asts: list[Node] = [parse_detailed(r.pattern).ast for r in ruleset.rules]
    for threshold in thresholds:
        total = miss = 0
        for ast in asts:
            try:
                if threshold is None:
                    ir = compile_ast(ast, CompileOptions(force_unfold=True, budget=budget))
                else:
                    ir = compile_ast(ast, CompileOptions(unfold_threshold=threshold, budget=budget))
                total += ir.node_count()
            except UnfoldSizeError:
                miss += 1
        counts[threshold] = total
        skipped[threshold] = miss
    return counts, skipped


def format_stats_table(rows: list[BenchStats]) -> str:
    headers = ("benchmark", "total", "supported", "counting", "c-ambiguous")
    table = [headers] + [tuple(str(x) for x in s.row()) for s in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = []
    for idx, row in enumerate(table):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * widths[i] for i in range(len(headers))))
    return "\n".join(lines)


def format_stats_csv(rows: list[BenchStats]) -> str:
    out = ["benchmark,total,supported,counting,c_ambiguous"]
    for s in rows:
        out.append(",".join(str(x) for x in s.row()))
    return "\n".join(out) + "\n"
