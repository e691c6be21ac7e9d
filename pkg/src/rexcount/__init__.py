"""Regex matching with bounded repetition over counter automata.

The pipeline: parse a POSIX-style pattern (``syntax``), normalize it
(``rewrite``), translate to a homogeneous counter automaton (``nca``),
classify each repetition instance as counter-(un)ambiguous
(``analysis``), execute in streaming fashion (``engine``), compile to a
hardware automaton IR (``hwir``), and estimate hardware energy/area
(``cost``).
"""

from .analysis import (
    AmbiguityReport,
    InstanceVerdict,
    Verdict,
    analyze,
    approximate_ambiguity,
    degree_at_least,
    exact_ambiguity,
    hybrid_ambiguity,
    subset_sum_regex,
    verify_witness,
)
from .charclass import CharClass
from .cost import Allocation, CostParams, CostReport, allocate, estimate
from .engine import (
    BitVectorCell,
    CounterCell,
    FallbackRequired,
    MatchEvent,
    NfaMatcher,
    ReferenceMatcher,
    build_matcher,
    match_stream,
    step,
)
from .hwir import (
    AutomatonIr,
    CompileOptions,
    compile_ast,
    compile_pattern,
    emit_json,
    load_json,
    simulate_ir,
)
from .nca import Nca, Token, glushkov
from .rewrite import count_instances, max_upper_bound, normalize, unfold
from .syntax import ParseDiagnostics, RegexError, parse, pretty

__version__ = "0.1.0"

__all__ = [
    "AmbiguityReport",
    "Allocation",
    "AutomatonIr",
    "BitVectorCell",
    "CharClass",
    "CompileOptions",
    "CostParams",
    "CostReport",
    "CounterCell",
    "FallbackRequired",
    "InstanceVerdict",
    "MatchEvent",
    "Nca",
    "NfaMatcher",
    "ParseDiagnostics",
    "ReferenceMatcher",
    "RegexError",
    "Token",
    "Verdict",
    "allocate",
    "analyze",
    "approximate_ambiguity",
    "build_matcher",
    "compile_ast",
    "compile_pattern",
    "count_instances",
    "degree_at_least",
    "emit_json",
    "estimate",
    "exact_ambiguity",
    "glushkov",
    "hybrid_ambiguity",
    "load_json",
    "match_stream",
    "max_upper_bound",
    "normalize",
    "parse",
    "pretty",
    "simulate_ir",
    "step",
    "subset_sum_regex",
    "unfold",
    "verify_witness",
]
