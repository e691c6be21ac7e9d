"""Streaming execution of counter automata.

Three interchangeable backends produce identical match events:

* ``reference`` -- the token-set configuration semantics, the ground
  truth for everything else;
* ``optimized`` -- scalar counter cells for unambiguous repetitions and
  bit-vector cells for ambiguous single-class repetitions (built on the
  compiled hardware IR);
* ``nfa`` -- full unfolding to a counting-free automaton executed with
  bit-set simulation.

A match event is reported at every input offset whose prefix is in the
language; the empty prefix is never reported.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .nca import Configuration, Nca, Token, glushkov
from .rewrite import DEFAULT_NODE_LIMIT, normalize, unfold
from .syntax import Node, parse

DEFAULT_BUDGET = 10**7

BACKENDS = ("reference", "optimized", "nfa")


class MatchEvent(NamedTuple):
    rule_id: int
    end_offset: int  # byte index just after the last consumed symbol


class FallbackRequired(RuntimeError):
    """The optimized backend cannot serve this automaton; use reference."""


def _as_bytes(data) -> bytes:
    if isinstance(data, (bytes, bytearray, memoryview)):
        return bytes(data)
    if hasattr(data, "read"):
        return data.read()
    raise TypeError(f"expected bytes or a binary file, got {type(data).__name__}")


# ---------------------------------------------------------------------------
# Reference backend: token-set semantics
# ---------------------------------------------------------------------------


def step(nca: Nca, config: Configuration, byte: int) -> Configuration:
    """One application of the configuration transition function."""
    rt = nca.runtime()
    out = set()
    for token in config:
        for bits, dst, new in rt.token_moves(token):
            if (bits >> byte) & 1:
                out.add(Token(dst, new))
    return frozenset(out)


def run_config(nca: Nca, data) -> Configuration:
    """Configuration after consuming all of ``data`` from the start."""
    config = nca.initial_config()
    for byte in _as_bytes(data):
        config = step(nca, config, byte)
    return config


class ReferenceMatcher:
    """Streaming matcher over the exact token-set semantics."""

    def __init__(self, nca: Nca, rule_id: int = 0):
        self.nca = nca
        self.rule_id = rule_id
        self.reset()

    def reset(self) -> None:
        self._tokens: set[Token] = set(self.nca.initial_config())
        self._offset = 0

    def feed(self, byte: int) -> bool:
        """Consume one byte; True if the new configuration is accepting."""
        rt = self.nca.runtime()
        new: set[Token] = set()
        for token in self._tokens:
            for bits, dst, vals in rt.token_moves(token):
                if (bits >> byte) & 1:
                    new.add(Token(dst, vals))
        self._tokens = new
        self._offset += 1
        return any(rt.is_final(t) for t in new)

    def run(self, data) -> list[MatchEvent]:
        self.reset()
        events = []
        for byte in _as_bytes(data):
            if self.feed(byte):
                events.append(MatchEvent(self.rule_id, self._offset))
        return events

    @property
    def config(self) -> Configuration:
        return frozenset(self._tokens)

    def tokens_at(self, state: int) -> set[tuple[int, ...]]:
        return {t.values for t in self._tokens if t.state == state}


# ---------------------------------------------------------------------------
# Unfolded-NFA backend (the oracle)
# ---------------------------------------------------------------------------


class NfaMatcher:
    """Counting-free bit-set simulation after full unfolding."""

    def __init__(self, ast: Node, rule_id: int = 0, node_limit: int = DEFAULT_NODE_LIMIT):
        flat = normalize(unfold(normalize(ast), None, node_limit))
        nca = glushkov(flat)
        self.rule_id = rule_id
        self.n_states = nca.n_states
        self._out: list[list[tuple[int, int]]] = [[] for _ in range(nca.n_states)]
        for t in nca.transitions:
            self._out[t.src].append((t.klass.bits, 1 << t.dst))
        self._final_mask = 0
        for q, guard in nca.final.items():
            assert guard.is_true()  # counting-free automata have pure finals
            self._final_mask |= 1 << q
        self.reset()

    def reset(self) -> None:
        self._mask = 1  # initial state 0
        self._offset = 0

    def feed(self, byte: int) -> bool:
        mask = self._mask
        new = 0
        while mask:
            low = mask & -mask
            mask ^= low
            for bits, dstmask in self._out[low.bit_length() - 1]:
                if (bits >> byte) & 1:
                    new |= dstmask
        self._mask = new
        self._offset += 1
        return bool(new & self._final_mask)

    def run(self, data) -> list[MatchEvent]:
        self.reset()
        events = []
        for byte in _as_bytes(data):
            if self.feed(byte):
                events.append(MatchEvent(self.rule_id, self._offset))
        return events

    def accepts(self, data) -> bool:
        self.reset()
        ok = False
        payload = _as_bytes(data)
        if not payload:
            return bool(self._mask & self._final_mask)
        for byte in payload:
            ok = self.feed(byte)
        return ok

    def memory_bits(self) -> int:
        return self.n_states


# ---------------------------------------------------------------------------
# Hardware cell primitives
# ---------------------------------------------------------------------------


@dataclass
class BitVectorCell:
    """Length-``size`` bit vector for an ambiguous single-class repetition.

    ``bits`` bit i-1 set means a token with counter value i is live on the
    instance's body state.
    """

    size: int
    min: int
    max: int
    bits: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.min <= self.max == self.size:
            raise ValueError("require 1 <= min <= max == size")

    def reset(self) -> None:
        self.bits = 0

    def set_first(self) -> None:
        self.bits |= 1

    def shift(self) -> None:
        # Values advance by one; a value at the upper bound cannot be
        # incremented (the x < max guard fails) and drops out.
        self.bits = (self.bits << 1) & ((1 << self.size) - 1)

    def disjunct(self, lo: int, hi: int) -> bool:
        """OR of positions lo..hi (1-based, inclusive)."""
        if not 1 <= lo <= hi <= self.size:
            raise ValueError("disjunct range out of bounds")
        window = ((1 << (hi - lo + 1)) - 1) << (lo - 1)
        return bool(self.bits & window)

    def values(self) -> set[int]:
        return {i + 1 for i in range(self.size) if (self.bits >> i) & 1}

    def memory_bits(self) -> int:
        return self.size


@dataclass
class CounterCell:
    """Scalar counter for an unambiguous repetition instance.

    The value after the k-th completed body iteration is k, matching the
    automaton guards on [min, max] directly.
    """

    min: int
    max: int
    active: bool = False
    value: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.min <= self.max:
            raise ValueError("require 1 <= min <= max")

    def step(self, pre_prev: bool, fst_now: bool, lst_now: bool) -> tuple[bool, bool]:
        """Advance one cycle; returns (en_fst, en_out).

        Restart takes precedence over increment: a simultaneous re-entry
        and loop-back would mean two live tokens, which the ambiguity
        analysis has excluded for counter-placed instances.
        """
        if fst_now:
            if pre_prev:
                self.active = True
                self.value = 1
            elif self.active:
                self.value += 1
        if not self.active or not lst_now:
            return False, False
        en_fst = self.value < self.max
        en_out = self.min <= self.value <= self.max
        return en_fst, en_out

    def memory_bits(self) -> int:
        return max(1, self.max.bit_length()) + 1  # value register + active flag


def counter_cell_step(cell: CounterCell, pre_prev: bool, fst_now: bool, lst_now: bool):
    """Functional wrapper for one counter-cell cycle: (cell, en_fst, en_out)."""
    en_fst, en_out = cell.step(pre_prev, fst_now, lst_now)
    return cell, en_fst, en_out


# ---------------------------------------------------------------------------
# Backend facade
# ---------------------------------------------------------------------------


def build_matcher(
    target,
    backend: str = "reference",
    rule_id: int = 0,
    budget: int = DEFAULT_BUDGET,
    node_limit: int = DEFAULT_NODE_LIMIT,
):
    """Construct a matcher for a pattern / AST / NCA with the given backend.

    The optimized backend raises FallbackRequired when the automaton
    cannot be served (unfolding an unsupported shape would exceed the
    node limit); callers retry with the reference backend.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    ast: Node | None = None
    nca: Nca | None = None
    if isinstance(target, Nca):
        nca, ast = target, target.source
    elif isinstance(target, Node):
        ast = normalize(target)
    else:
        ast = normalize(parse(target))

    if backend == "reference":
        return ReferenceMatcher(nca if nca is not None else glushkov(ast), rule_id)
    if backend == "nfa":
        if ast is None:
            raise ValueError("the nfa backend needs the source AST")
        return NfaMatcher(ast, rule_id, node_limit)
    if ast is None:
        raise FallbackRequired("optimized backend needs the source AST")
    from . import hwir
    from .rewrite import UnfoldSizeError

    try:
        ir = hwir.compile_ast(ast, hwir.CompileOptions(unfold_threshold=0, budget=budget, node_limit=node_limit))
    except UnfoldSizeError as exc:
        raise FallbackRequired(f"optimized backend cannot fit this automaton: {exc}") from exc
    return hwir.OptimizedMatcher(ir, rule_id)


def match_stream(target, data, backend: str = "reference", rule_id: int = 0, **kw) -> list[MatchEvent]:
    """One-shot streaming match; see build_matcher for backend semantics."""
    return build_matcher(target, backend, rule_id, **kw).run(data)


def format_events(events: list[MatchEvent]) -> str:
    return "".join(f"{e.rule_id}\t{e.end_offset}\n" for e in events)
