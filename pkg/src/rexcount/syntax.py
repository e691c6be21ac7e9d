"""Regex dialect: AST nodes, parser, and pretty-printer.

The dialect is a POSIX-style subset over the byte alphabet: literals,
escapes (\\n \\t \\r \\xHH, escaped metacharacters, and the \\d \\w \\s
family), ``.`` matching every byte, bracket classes with ranges and
negation, alternation, grouping, ``*`` ``+`` ``?`` and bounded
repetition ``{n}`` ``{m,n}`` ``{m,}``.

Non-regular features (backreferences, lookaround) and anchors are
rejected with structured diagnostics rather than silently dropped.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

from .charclass import CharClass

MAX_REPEAT_BOUND = 2**31 - 1

_METACHARS = set(b".[]()|*+?{}\\/^$")


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


class Node:
    """Base class for regex AST nodes; all subclasses are immutable."""

    __slots__ = ()


@dataclass(frozen=True)
class Epsilon(Node):
    pass


@dataclass(frozen=True)
class Class(Node):
    klass: CharClass

    def __post_init__(self) -> None:
        if self.klass.is_empty():
            raise ValueError("empty character class is not a valid atom")


@dataclass(frozen=True)
class Concat(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Alt(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Star(Node):
    child: Node


@dataclass(frozen=True)
class Repeat(Node):
    """Bounded repetition of ``child`` between ``min`` and ``max`` times.

    ``instance_id`` identifies this repetition occurrence; ids are unique
    within an AST and are retired (never reused) when a rewrite unfolds
    the instance.
    """

    child: Node
    min: int
    max: int
    instance_id: int

    def __post_init__(self) -> None:
        if not 0 <= self.min <= self.max:
            raise ValueError(f"require 0 <= min <= max, got {{{self.min},{self.max}}}")
        if self.max > MAX_REPEAT_BOUND:
            raise ValueError(f"repetition bound too large: {self.max}")


EPSILON = Epsilon()


def _children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, (Concat, Alt)):
        return (node.left, node.right)
    if isinstance(node, (Star, Repeat)):
        return (node.child,)
    return ()


def _balanced(parts: list[Node], make) -> Node:
    # Pairwise folding keeps trees logarithmic in depth, which matters for
    # large unfoldings on CPython's bounded recursion.
    while len(parts) > 1:
        nxt = [make(parts[i], parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def concat_all(parts: list[Node]) -> Node:
    """Order-preserving concatenation of a list; empty list is epsilon."""
    if not parts:
        return EPSILON
    return _balanced(list(parts), Concat)


def alt_all(parts: list[Node]) -> Node:
    if not parts:
        raise ValueError("alternation needs at least one branch")
    return _balanced(list(parts), Alt)


def walk(node: Node):
    """Yield every node, depth-first, children left to right."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(_children(n)))


def tree_height(node: Node) -> int:
    height = 0
    stack = [(node, 1)]
    while stack:
        n, depth = stack.pop()
        height = max(height, depth)
        stack.extend((c, depth + 1) for c in _children(n))
    return height


def ensure_recursion_room(node: Node) -> None:
    """Raise the interpreter recursion limit enough to traverse ``node``.

    Only ever raises the limit (safe under concurrent analyses); the deep
    structures here come from unfolding large bounds, which the balanced
    folds keep logarithmic except for optional chains.
    """
    need = 3 * tree_height(node) + 2000
    if need > sys.getrecursionlimit():
        sys.setrecursionlimit(need)


def repeat_ids(node: Node) -> list[int]:
    """Instance ids of all Repeat nodes, in left-to-right source order."""
    return [r.instance_id for r in repeats_in_order(node)]


def repeats_in_order(node: Node) -> list[Repeat]:
    out: list[Repeat] = []
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Repeat):
            out.append(n)
        stack.extend(reversed(_children(n)))
    return out


def check_instance_ids(node: Node) -> None:
    ids = repeat_ids(node)
    if len(ids) != len(set(ids)):
        raise ValueError(f"duplicate repeat instance ids: {sorted(ids)}")


# ---------------------------------------------------------------------------
# Diagnostics / errors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnsupportedFeature:
    feature: str
    span: tuple[int, int]
    detail: str = ""


@dataclass
class ParseDiagnostics:
    """Why a pattern was rejected as non-regular or out of dialect."""

    unsupported: list[UnsupportedFeature] = field(default_factory=list)

    def reasons(self) -> list[str]:
        return [u.feature for u in self.unsupported]


class RegexError(ValueError):
    """Base class for pattern rejection."""


class RegexSyntaxError(RegexError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at byte {pos})")
        self.pos = pos


class UnsupportedPatternError(RegexError):
    def __init__(self, diagnostics: ParseDiagnostics):
        names = ", ".join(diagnostics.reasons())
        super().__init__(f"unsupported feature(s): {names}")
        self.diagnostics = diagnostics


@dataclass
class ParseResult:
    ast: Node
    notes: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_D = CharClass.from_ranges((0x30, 0x39))
_W = CharClass.from_ranges((0x30, 0x39), (0x41, 0x5A), (0x61, 0x7A)) | CharClass.singleton(0x5F)
_S = CharClass.from_bytes(b" \t\n\r\f\v")

_ESCAPE_CLASSES = {
    ord("d"): _D,
    ord("D"): _D.complement(),
    ord("w"): _W,
    ord("W"): _W.complement(),
    ord("s"): _S,
    ord("S"): _S.complement(),
}

_SIMPLE_ESCAPES = {
    ord("n"): 0x0A,
    ord("t"): 0x09,
    ord("r"): 0x0D,
    ord("f"): 0x0C,
    ord("v"): 0x0B,
    ord("a"): 0x07,
    ord("0"): 0x00,
}


class _Parser:
    # regex       := alternation
    # alternation := concat ('|' concat)*       # empty branches allowed
    # concat      := repetition*
    # repetition  := atom quantifier*
    # atom        := literal | '.' | escape | group | bracket-class

    def __init__(self, data: bytes):
        self.data = data
        self.i = 0
        self.next_id = 0
        self.notes: list[str] = []
        self.unsupported: list[UnsupportedFeature] = []

    def parse(self) -> Node:
        node = self._alternation()
        if self.i < len(self.data):
            raise RegexSyntaxError(f"unexpected {chr(self.data[self.i])!r}", self.i)
        if self.unsupported:
            raise UnsupportedPatternError(ParseDiagnostics(self.unsupported))
        return node

    def _fresh_id(self) -> int:
        self.next_id += 1
        return self.next_id - 1

    def _alternation(self) -> Node:
        branches = [self._concat()]
        while self._peek() == ord("|"):
            self.i += 1
            branches.append(self._concat())
        return alt_all(branches)

    def _concat(self) -> Node:
        parts: list[Node] = []
        while True:
            c = self._peek()
            if c is None or c in (ord("|"), ord(")")):
                break
            parts.append(self._repetition())
        return concat_all(parts)

    def _repetition(self) -> Node:
        node = self._atom()
        while True:
            c = self._peek()
            if c == ord("*"):
                self.i += 1
                node = Star(node)
            elif c == ord("+"):
                # r+ desugars to r . r*; the copy gets fresh instance ids.
                self.i += 1
                node = Concat(node, Star(self._reid(node)))
            elif c == ord("?"):
                self.i += 1
                node = Alt(node, EPSILON)
            elif c == ord("{"):
                brace = self._try_brace(node)
                if brace is None:
                    break
                node = brace
            else:
                break
        return node

    def _try_brace(self, atom: Node) -> Node | None:
        # '{' not introducing a valid quantifier is a literal brace and is
        # left for the caller's concat loop.
        start = self.i
        self.i += 1
        lo = self._int()
        if lo is None:
            self.i = start
            return None
        c = self._peek()
        if c == ord("}"):
            self.i += 1
            return Repeat(atom, lo, lo, self._fresh_id()) if lo <= MAX_REPEAT_BOUND else self._bound_error(start)
        if c != ord(","):
            self.i = start
            return None
        self.i += 1
        c = self._peek()
        if c == ord("}"):
            # r{m,} is rewritten to r{m} . r* so every counter stays bounded.
            self.i += 1
            self.notes.append(f"open-ended repetition {{{lo},}} rewritten to {{{lo}}} followed by star")
            if lo == 0:
                return Star(atom)
            prefix = atom if lo == 1 else Repeat(atom, lo, lo, self._fresh_id())
            return Concat(prefix, Star(self._reid(atom)))
        hi = self._int()
        if hi is None or self._peek() != ord("}"):
            self.i = start
            return None
        self.i += 1
        if lo > hi:
            raise RegexSyntaxError(f"bad repetition bounds {{{lo},{hi}}}: min exceeds max", start)
        if hi > MAX_REPEAT_BOUND:
            return self._bound_error(start)
        return Repeat(atom, lo, hi, self._fresh_id())

    def _bound_error(self, pos: int) -> Node:
        raise RegexSyntaxError(f"repetition bound exceeds {MAX_REPEAT_BOUND}", pos)

    def _reid(self, node: Node) -> Node:
        """Deep-copy a subtree, assigning fresh instance ids to its repeats."""
        if isinstance(node, Concat):
            return Concat(self._reid(node.left), self._reid(node.right))
        if isinstance(node, Alt):
            return Alt(self._reid(node.left), self._reid(node.right))
        if isinstance(node, Star):
            return Star(self._reid(node.child))
        if isinstance(node, Repeat):
            return Repeat(self._reid(node.child), node.min, node.max, self._fresh_id())
        return node

    def _atom(self) -> Node:
        c = self._peek()
        if c is None:
            raise RegexSyntaxError("expected an atom", self.i)
        if c == ord("("):
            return self._group()
        if c == ord("["):
            return Class(self._bracket_class())
        if c == ord("\\"):
            return self._escape()
        if c == ord("."):
            self.i += 1
            return Class(CharClass.universal())
        if c in (ord("^"), ord("$")):
            self.unsupported.append(
                UnsupportedFeature("anchor", (self.i, self.i + 1), "patterns are whole-stream; write explicit .* context")
            )
            self.i += 1
            return EPSILON
        if c in (ord("*"), ord("+"), ord("?")):
            raise RegexSyntaxError(f"quantifier {chr(c)!r} with nothing to repeat", self.i)
        self.i += 1
        return Class(CharClass.singleton(c))

    def _group(self) -> Node:
        start = self.i
        self.i += 1  # '('
        if self._peek() == ord("?"):
            span = (start, min(start + 3, len(self.data)))
            self.unsupported.append(UnsupportedFeature("lookaround", span, "'(?' constructs are not regular operators"))
            # Skip to the matching ')' so later diagnostics stay meaningful.
            depth = 1
            while self.i < len(self.data) and depth:
                b = self.data[self.i]
                if b == ord("("):
                    depth += 1
                elif b == ord(")"):
                    depth -= 1
                elif b == ord("\\"):
                    self.i += 1
                self.i += 1
            return EPSILON
        node = self._alternation()
        if self._peek() != ord(")"):
            raise RegexSyntaxError("unbalanced '('", start)
        self.i += 1
        return node

    def _escape(self) -> Node:
        start = self.i
        self.i += 1  # backslash
        c = self._peek()
        if c is None:
            raise RegexSyntaxError("dangling backslash", start)
        self.i += 1
        if ord("1") <= c <= ord("9"):
            self.unsupported.append(
                UnsupportedFeature("backreference", (start, self.i), f"\\{chr(c)} can describe non-regular languages")
            )
            return EPSILON
        if c in _ESCAPE_CLASSES:
            return Class(_ESCAPE_CLASSES[c])
        return Class(CharClass.singleton(self._escape_byte(c, start)))

    def _escape_byte(self, c: int, start: int) -> int:
        if c == ord("x"):
            hexpart = self.data[self.i : self.i + 2]
            if len(hexpart) != 2:
                raise RegexSyntaxError("\\x needs two hex digits", start)
            try:
                value = int(hexpart, 16)
            except ValueError:
                raise RegexSyntaxError("\\x needs two hex digits", start) from None
            self.i += 2
            return value
        if c in _SIMPLE_ESCAPES:
            return _SIMPLE_ESCAPES[c]
        return c

    def _bracket_class(self) -> CharClass:
        start = self.i
        self.i += 1  # '['
        negated = False
        if self._peek() == ord("^"):
            negated = True
            self.i += 1
        acc = CharClass.none()
        first = True
        while True:
            c = self._peek()
            if c is None:
                raise RegexSyntaxError("unbalanced '['", start)
            if c == ord("]") and not first:
                self.i += 1
                break
            first = False
            acc = acc | self._class_item()
        if negated:
            acc = acc.complement()
        if acc.is_empty():
            raise RegexSyntaxError("empty character class", start)
        return acc

    def _class_item(self) -> CharClass:
        lo, was_class = self._class_endpoint()
        if was_class is not None:
            return was_class
        if self._peek() == ord("-") and self._peek(1) not in (None, ord("]")):
            self.i += 1
            hi, hi_class = self._class_endpoint()
            if hi_class is not None:
                raise RegexSyntaxError("class escape cannot end a range", self.i)
            if lo > hi:
                raise RegexSyntaxError(f"reversed range {chr(lo)}-{chr(hi)}", self.i)
            return CharClass.from_ranges((lo, hi))
        return CharClass.singleton(lo)

    def _class_endpoint(self) -> tuple[int, CharClass | None]:
        c = self._peek()
        assert c is not None
        if c == ord("\\"):
            start = self.i
            self.i += 1
            e = self._peek()
            if e is None:
                raise RegexSyntaxError("dangling backslash in class", start)
            self.i += 1
            if e in _ESCAPE_CLASSES:
                return 0, _ESCAPE_CLASSES[e]
            return self._escape_byte(e, start), None
        self.i += 1
        return c, None

    def _int(self) -> int | None:
        start = self.i
        while (c := self._peek()) is not None and ord("0") <= c <= ord("9"):
            self.i += 1
        if self.i == start:
            return None
        return int(self.data[start : self.i])

    def _peek(self, ahead: int = 0) -> int | None:
        j = self.i + ahead
        return self.data[j] if j < len(self.data) else None


def parse_detailed(pattern: str | bytes) -> ParseResult:
    """Parse, returning the AST plus dialect notes (e.g. the {m,} rewrite).

    Raises RegexSyntaxError for malformed input and
    UnsupportedPatternError (carrying ParseDiagnostics) for non-regular
    or out-of-dialect features.
    """
    data = pattern.encode("utf-8") if isinstance(pattern, str) else bytes(pattern)
    p = _Parser(data)
    ast = p.parse()
    check_instance_ids(ast)
    return ParseResult(ast, p.notes)


def parse(pattern: str | bytes) -> Node:
    return parse_detailed(pattern).ast


# ---------------------------------------------------------------------------
# Pretty-printer (emits the same dialect it parses)
# ---------------------------------------------------------------------------

_PREC_ALT, _PREC_CONCAT, _PREC_REPEAT = 0, 1, 2


def pretty(node: Node) -> str:
    ensure_recursion_room(node)
    return _pp(node, _PREC_ALT)


def _pp(node: Node, ctx: int) -> str:
    if isinstance(node, Epsilon):
        return "" if ctx <= _PREC_CONCAT else "()"
    if isinstance(node, Class):
        return format_class(node.klass)
    if isinstance(node, Alt):
        body = f"{_pp(node.left, _PREC_ALT)}|{_pp(node.right, _PREC_ALT)}"
        return body if ctx == _PREC_ALT else f"({body})"
    if isinstance(node, Concat):
        body = f"{_pp(node.left, _PREC_CONCAT)}{_pp(node.right, _PREC_CONCAT)}"
        return body if ctx <= _PREC_CONCAT else f"({body})"
    if isinstance(node, Star):
        return f"{_pp(node.child, _PREC_REPEAT)}*"
    if isinstance(node, Repeat):
        bounds = f"{{{node.min}}}" if node.min == node.max else f"{{{node.min},{node.max}}}"
        return f"{_pp(node.child, _PREC_REPEAT)}{bounds}"
    raise TypeError(f"unknown node {node!r}")


def _escape_literal(byte: int) -> str:
    if byte in _METACHARS:
        return "\\" + chr(byte)
    if byte == 0x0A:
        return "\\n"
    if byte == 0x09:
        return "\\t"
    if byte == 0x0D:
        return "\\r"
    if 0x20 <= byte <= 0x7E:
        return chr(byte)
    return f"\\x{byte:02x}"


def _escape_class_member(byte: int) -> str:
    if byte in (ord("]"), ord("\\"), ord("^"), ord("-")):
        return "\\" + chr(byte)
    if byte == 0x0A:
        return "\\n"
    if byte == 0x09:
        return "\\t"
    if byte == 0x0D:
        return "\\r"
    if 0x20 <= byte <= 0x7E:
        return chr(byte)
    return f"\\x{byte:02x}"


def format_class(klass: CharClass) -> str:
    if klass.is_universal():
        return "."
    if klass.size() == 1:
        return _escape_literal(klass.min_byte())
    negated = klass.size() > 128
    shown = klass.complement() if negated else klass
    parts = []
    for lo, hi in shown.ranges():
        if hi - lo >= 2:
            parts.append(f"{_escape_class_member(lo)}-{_escape_class_member(hi)}")
        else:
            parts.extend(_escape_class_member(b) for b in range(lo, hi + 1))
    return ("[^" if negated else "[") + "".join(parts) + "]"
