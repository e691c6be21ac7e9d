"""Normalizing and unfolding rewrites over regex ASTs.

All rewrites preserve the language. Normalization establishes the form
the automaton construction expects: no repetition with upper bound < 2,
no repetition with lower bound 0, and no repetition whose body can
match the empty string (such bodies are epsilon-stripped and the
bounds adjusted, since iteration counts cannot observe empty passes).
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    EPSILON,
    Alt,
    Class,
    Concat,
    Epsilon,
    Node,
    Repeat,
    Star,
    alt_all,
    concat_all,
    ensure_recursion_room,
    pretty,
    repeat_ids,
    repeats_in_order,
)

DEFAULT_NODE_LIMIT = 10**7


class UnfoldSizeError(ValueError):
    """Unfolding would exceed the configured node limit."""

    def __init__(self, limit: int):
        super().__init__(f"unfolded tree would exceed the node limit of {limit}")
        self.limit = limit


class _IdAlloc:
    """Monotonic instance-id source; retired ids are never handed out again."""

    def __init__(self, ast: Node):
        ids = repeat_ids(ast)
        self.next = max(ids) + 1 if ids else 0

    def fresh(self) -> int:
        self.next += 1
        return self.next - 1


def nullable(node: Node) -> bool:
    """Whether the node's language contains the empty string."""
    if isinstance(node, Epsilon):
        return True
    if isinstance(node, Class):
        return False
    if isinstance(node, Concat):
        return nullable(node.left) and nullable(node.right)
    if isinstance(node, Alt):
        return nullable(node.left) or nullable(node.right)
    if isinstance(node, Star):
        return True
    if isinstance(node, Repeat):
        return node.min == 0 or nullable(node.child)
    raise TypeError(f"unknown node {node!r}")


def _reid(node: Node, alloc: _IdAlloc) -> Node:
    """Copy a subtree with fresh instance ids (for duplicated occurrences)."""
    if isinstance(node, Concat):
        return Concat(_reid(node.left, alloc), _reid(node.right, alloc))
    if isinstance(node, Alt):
        return Alt(_reid(node.left, alloc), _reid(node.right, alloc))
    if isinstance(node, Star):
        return Star(_reid(node.child, alloc))
    if isinstance(node, Repeat):
        return Repeat(_reid(node.child, alloc), node.min, node.max, alloc.fresh())
    return node


def strip_epsilon(node: Node, alloc: _IdAlloc) -> Node | None:
    """An AST for L(node) minus the empty string; None if that is empty."""
    if isinstance(node, Epsilon):
        return None
    if isinstance(node, Class):
        return node
    if isinstance(node, Alt):
        left = strip_epsilon(node.left, alloc)
        right = strip_epsilon(node.right, alloc)
        if left is None:
            return right
        if right is None:
            return left
        return Alt(left, right)
    if isinstance(node, Star):
        body = strip_epsilon(node.child, alloc)
        if body is None:
            return None
        # (L \ eps) . L*  -- the star keeps the original body, re-id'd
        # because the body now occurs twice.
        return Concat(body, Star(_reid(node.child, alloc)))
    if isinstance(node, Concat):
        if not (nullable(node.left) and nullable(node.right)):
            return node
        left = strip_epsilon(node.left, alloc)
        right = strip_epsilon(node.right, alloc)
        if left is None:
            return right
        if right is None:
            return Concat(left, node.right)
        return Alt(Concat(left, _reid(node.right, alloc)), right)
    if isinstance(node, Repeat):
        if nullable(node.child):
            body = strip_epsilon(node.child, alloc)
            if body is None:
                return None
            return Repeat(body, 1, node.max, node.instance_id)
        if node.min == 0:
            return Repeat(node.child, 1, node.max, node.instance_id)
        return node
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def normalize(node: Node) -> Node:
    """Rewrite to the normal form assumed by the automaton construction.

    Applied to a fixpoint: repetitions with upper bound < 2 are unfolded,
    class-only alternations are merged into a single class, repetitions
    with nullable bodies are epsilon-stripped, and surviving repetitions
    with lower bound 0 become (eps | r{1,max}) so all counters start at 1.
    """
    alloc = _IdAlloc(node)
    for _ in range(200):
        ensure_recursion_room(node)
        rewritten = _norm(node, alloc)
        if rewritten == node:
            return rewritten
        node = rewritten
    raise RuntimeError("normalization did not reach a fixpoint")


def _norm(node: Node, alloc: _IdAlloc) -> Node:
    if isinstance(node, (Epsilon, Class)):
        return node
    if isinstance(node, Concat):
        left = _norm(node.left, alloc)
        right = _norm(node.right, alloc)
        if isinstance(left, Epsilon):
            return right
        if isinstance(right, Epsilon):
            return left
        return Concat(left, right)
    if isinstance(node, Alt):
        return _merge_alt(node, alloc)
    if isinstance(node, Star):
        child = _norm(node.child, alloc)
        if isinstance(child, Epsilon):
            return EPSILON
        if isinstance(child, Star):
            return child
        return Star(child)
    if isinstance(node, Repeat):
        return _norm_repeat(node, alloc)
    raise TypeError(f"unknown node {node!r}")


def _merge_alt(node: Alt, alloc: _IdAlloc) -> Node:
    branches: list[Node] = []
    _flatten_alt(node, alloc, branches)
    classes = [b for b in branches if isinstance(b, Class)]
    if len(classes) >= 2:
        merged = Class(_union_all(classes))
        out: list[Node] = []
        placed = False
        for b in branches:
            if isinstance(b, Class):
                if not placed:
                    out.append(merged)
                    placed = True
            else:
                out.append(b)
        branches = out
    return alt_all(branches)


def _flatten_alt(node: Node, alloc: _IdAlloc, out: list[Node]) -> None:
    if isinstance(node, Alt):
        _flatten_alt(node.left, alloc, out)
        _flatten_alt(node.right, alloc, out)
    else:
        out.append(_norm(node, alloc))


def _union_all(classes: list[Class]) -> "CharClass":
    acc = classes[0].klass
    for c in classes[1:]:
        acc = acc | c.klass
    return acc


def _norm_repeat(node: Repeat, alloc: _IdAlloc) -> Node:
    child = _norm(node.child, alloc)
    lo, hi = node.min, node.max
    if nullable(child):
        # Iteration counts cannot see empty body passes, so fold them into
        # the bounds: B{m,n} with nullable B equals B'{0,n}.
        stripped = strip_epsilon(child, alloc)
        if stripped is None:
            return EPSILON
        child, lo = stripped, 0
    if hi == 0:
        return EPSILON
    if hi == 1:
        return child if lo == 1 else Alt(child, EPSILON)
    if lo == 0:
        return Alt(EPSILON, Repeat(child, 1, hi, node.instance_id))
    return Repeat(child, lo, hi, node.instance_id)


# ---------------------------------------------------------------------------
# Instance enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstanceInfo:
    instance_id: int
    min: int
    max: int
    description: str


def count_instances(node: Node) -> list[InstanceInfo]:
    """Surviving Repeat instances in left-to-right source order."""
    return [
        InstanceInfo(r.instance_id, r.min, r.max, pretty(r.child))
        for r in repeats_in_order(node)
    ]


def max_upper_bound(node: Node) -> int:
    """The largest repetition upper bound over all instances (0 if none)."""
    reps = repeats_in_order(node)
    return max((r.max for r in reps), default=0)


def nested_outer_instances(node: Node) -> list[int]:
    """Ids of Repeat instances whose body contains another Repeat."""
    out: list[int] = []
    for rep in repeats_in_order(node):
        if repeats_in_order(rep.child):
            out.append(rep.instance_id)
    return out


# ---------------------------------------------------------------------------
# Unfolding
# ---------------------------------------------------------------------------


class _Unfolder:
    def __init__(self, ast: Node, should_unfold, node_limit: int):
        self.alloc = _IdAlloc(ast)
        self.should_unfold = should_unfold
        self.limit = node_limit
        self.created = 0

    def _tick(self, n: int = 1) -> None:
        self.created += n
        if self.created > self.limit:
            raise UnfoldSizeError(self.limit)

    def run(self, node: Node) -> Node:
        if isinstance(node, (Epsilon, Class)):
            return node
        if isinstance(node, Concat):
            self._tick()
            return Concat(self.run(node.left), self.run(node.right))
        if isinstance(node, Alt):
            self._tick()
            return Alt(self.run(node.left), self.run(node.right))
        if isinstance(node, Star):
            self._tick()
            return Star(self.run(node.child))
        if isinstance(node, Repeat):
            child = self.run(node.child)
            if not self.should_unfold(node):
                self._tick()
                return Repeat(child, node.min, node.max, node.instance_id)
            return self._expand(child, node.min, node.max)
        raise TypeError(f"unknown node {node!r}")

    def _dup(self, node: Node) -> Node:
        """Fresh copy; nested surviving repeats get fresh instance ids."""
        self._tick()
        if isinstance(node, Concat):
            return Concat(self._dup(node.left), self._dup(node.right))
        if isinstance(node, Alt):
            return Alt(self._dup(node.left), self._dup(node.right))
        if isinstance(node, Star):
            return Star(self._dup(node.child))
        if isinstance(node, Repeat):
            return Repeat(self._dup(node.child), node.min, node.max, self.alloc.fresh())
        return node

    def _expand(self, child: Node, lo: int, hi: int) -> Node:
        # r{m,n} -> r^m . (eps | r (eps | r ...)) with right-nested optionals.
        optional: Node | None = None
        for _ in range(hi - lo):
            body = self._dup(child)
            self._tick()
            optional = Alt(EPSILON, body if optional is None else Concat(body, optional))
        parts: list[Node] = [self._dup(child) for _ in range(lo)]
        if optional is not None:
            parts.append(optional)
        if not parts:
            return EPSILON
        self._tick(max(0, len(parts) - 1))
        return concat_all(parts)


def unfold(node: Node, threshold: int | None, node_limit: int = DEFAULT_NODE_LIMIT) -> Node:
    """Unfold every repetition with upper bound <= threshold.

    ``threshold=None`` means full unfolding (the result is counting-free).
    Raises UnfoldSizeError if the result would exceed ``node_limit`` nodes.
    """
    if threshold is None:
        pick = lambda rep: True
    else:
        pick = lambda rep: rep.max <= threshold
    ensure_recursion_room(node)
    return _Unfolder(node, pick, node_limit).run(node)


def unfold_instances(node: Node, ids: set[int], node_limit: int = DEFAULT_NODE_LIMIT) -> Node:
    """Unfold exactly the Repeat instances whose ids are given."""
    ensure_recursion_room(node)
    return _Unfolder(node, lambda rep: rep.instance_id in ids, node_limit).run(node)
