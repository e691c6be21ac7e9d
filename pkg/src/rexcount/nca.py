"""Nondeterministic counter automata and the Glushkov-style translation.

States are character-class occurrences of the (normalized) regex plus
one initial state. Each surviving repetition instance owns one counter,
shared by the states of its body: entering the body assigns 1,
re-entering the body from its last position increments under an upper
bound guard, and leaving the body is guarded by the [min, max] range.
Counters of enclosing instances are copied through unchanged.

A leading universal star (``.*`` at the very start of the pattern) is
fused into the initial state, which then carries the self-loop on the
full alphabet; this reproduces the textbook automata for unanchored
patterns and is what start-anywhere hardware enablement maps back to.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .charclass import CharClass
from .rewrite import nullable
from .syntax import Alt, Class, Concat, Epsilon, Node, Repeat, Star


class StructuralError(ValueError):
    """The automaton violates a structural invariant."""


# ---------------------------------------------------------------------------
# Guards and actions
# ---------------------------------------------------------------------------

LT, EQ, BETWEEN = "lt", "eq", "between"


@dataclass(frozen=True, order=True)
class Atom:
    """One per-counter guard conjunct."""

    counter: int
    kind: str  # lt: x < hi; eq: x == lo; between: lo <= x <= hi
    lo: int
    hi: int

    def holds(self, value: int) -> bool:
        if self.kind == LT:
            return value < self.hi
        if self.kind == EQ:
            return value == self.lo
        return self.lo <= value <= self.hi

    def render(self) -> str:
        x = f"x{self.counter}"
        if self.kind == LT:
            return f"{x}<{self.hi}"
        if self.kind == EQ:
            return f"{x}={self.lo}"
        return f"{self.lo}<={x}<={self.hi}"


def lt(counter: int, bound: int) -> Atom:
    return Atom(counter, LT, 0, bound)


def eq(counter: int, value: int) -> Atom:
    return Atom(counter, EQ, value, value)


def between(counter: int, lo: int, hi: int) -> Atom:
    if lo == hi:
        return eq(counter, lo)
    return Atom(counter, BETWEEN, lo, hi)


@dataclass(frozen=True)
class Guard:
    """Conjunction of atoms, at most one per counter, sorted by counter."""

    atoms: tuple[Atom, ...] = ()

    def __post_init__(self) -> None:
        counters = [a.counter for a in self.atoms]
        if len(set(counters)) != len(counters):
            raise StructuralError("guard mentions a counter twice")
        if list(self.atoms) != sorted(self.atoms):
            object.__setattr__(self, "atoms", tuple(sorted(self.atoms)))

    def is_true(self) -> bool:
        return not self.atoms

    def render(self) -> str:
        return " & ".join(a.render() for a in self.atoms) if self.atoms else "true"


TRUE = Guard()

SET, COPY, INC = "set", "copy", "inc"


@dataclass(frozen=True, order=True)
class ActionOp:
    """Assignment for one destination counter."""

    dst: int
    kind: str  # set: dst := arg; copy: dst := arg; inc: dst := arg + 1
    arg: int

    def render(self) -> str:
        if self.kind == SET:
            return f"x{self.dst}:={self.arg}"
        if self.kind == COPY:
            return f"x{self.dst}:=x{self.arg}"
        return f"x{self.arg}++"


@dataclass(frozen=True)
class Action:
    ops: tuple[ActionOp, ...] = ()

    def __post_init__(self) -> None:
        if list(self.ops) != sorted(self.ops):
            object.__setattr__(self, "ops", tuple(sorted(self.ops)))

    def render(self) -> str:
        return ", ".join(op.render() for op in self.ops) if self.ops else "-"


NO_ACTION = Action()


@dataclass(frozen=True)
class Transition:
    src: int
    klass: CharClass
    guard: Guard
    dst: int
    action: Action

    def __post_init__(self) -> None:
        if self.klass.is_empty():
            raise StructuralError("transition class is empty")


class Token(NamedTuple):
    """A state paired with a valuation of that state's counters.

    ``values`` follows the state's sorted counter order.
    """

    state: int
    values: tuple[int, ...]


Configuration = frozenset  # of Token


@dataclass(frozen=True)
class InstanceMeta:
    """Where a repetition instance lives inside the automaton."""

    instance_id: int
    min: int
    max: int
    body_states: tuple[int, ...]
    first_states: tuple[int, ...]
    last_states: tuple[int, ...]


# ---------------------------------------------------------------------------
# The automaton
# ---------------------------------------------------------------------------


class Nca:
    """Homogeneous, epsilon-free counter automaton (single initial state 0)."""

    def __init__(
        self,
        n_states: int,
        state_class: list[CharClass | None],
        counters_of: list[tuple[int, ...]],
        transitions: list[Transition],
        final: dict[int, Guard],
        repetition_map: dict[int, int],
        counter_bounds: dict[int, int],
        instances: dict[int, InstanceMeta],
        initial_self_loop: bool,
        source: Node | None = None,
    ):
        self.n_states = n_states
        self.state_class = state_class
        self.counters_of = counters_of
        self.transitions = sorted(
            transitions, key=lambda t: (t.src, t.dst, t.klass.bits, t.guard.atoms, t.action.ops)
        )
        self.final = final
        self.repetition_map = repetition_map
        self.counter_bounds = counter_bounds
        self.instances = instances
        self.initial = 0
        self.initial_self_loop = initial_self_loop
        self.source = source
        self._runtime = None
        self.validate()

    # -- structure ---------------------------------------------------------

    def out(self, state: int) -> list[Transition]:
        return [t for t in self.transitions if t.src == state]

    def validate(self) -> None:
        for t in self.transitions:
            if not (0 <= t.src < self.n_states and 0 <= t.dst < self.n_states):
                raise StructuralError("transition endpoint out of range")
            # Homogeneity: the class on a transition is the class of its
            # destination state.
            if self.state_class[t.dst] is None or t.klass != self.state_class[t.dst]:
                raise StructuralError(f"inhomogeneous transition into state {t.dst}")
            for a in t.guard.atoms:
                if a.counter not in self.counters_of[t.src]:
                    raise StructuralError("guard mentions a counter foreign to its source")
            dsts = [op.dst for op in t.action.ops]
            if sorted(dsts) != sorted(self.counters_of[t.dst]):
                raise StructuralError("action must assign every destination counter exactly once")
            for op in t.action.ops:
                if op.kind in (COPY, INC) and op.arg not in self.counters_of[t.src]:
                    raise StructuralError("action reads a counter foreign to its source")
                if op.kind == INC:
                    guard_of = {a.counter: a for a in t.guard.atoms}
                    a = guard_of.get(op.arg)
                    if a is None or a.kind != LT:
                        raise StructuralError("increment without an upper-bound guard")
        for counter in self.repetition_map:
            if counter not in self.counter_bounds or self.counter_bounds[counter] < 1:
                raise StructuralError("counter without a positive bound")
        insts = list(self.repetition_map.values())
        if len(set(insts)) != len(insts):
            raise StructuralError("repetition_map is not injective")

    def bound_of(self, counter: int) -> int:
        """Least bound under which every increment of ``counter`` is guarded.

        Reads the bound from the Lt guards on incrementing transitions and
        checks it against every constant assigned to the counter.
        """
        known = False
        bound = 0
        assigned: list[int] = []
        for t in self.transitions:
            for op in t.action.ops:
                if op.dst != counter and not (op.kind == INC and op.arg == counter):
                    continue
                if op.kind == INC and op.arg == counter:
                    guard_of = {a.counter: a for a in t.guard.atoms}
                    a = guard_of.get(counter)
                    if a is None or a.kind != LT:
                        raise StructuralError(f"counter x{counter} has an unguarded increment")
                    known = True
                    bound = max(bound, a.hi)
                elif op.kind == SET and op.dst == counter:
                    assigned.append(op.arg)
        if counter not in self.repetition_map:
            raise StructuralError(f"counter x{counter} does not occur in the automaton")
        if not known:
            raise StructuralError(f"counter x{counter} is never incremented; no bound to read")
        if any(c > bound for c in assigned):
            raise StructuralError(f"counter x{counter} is assigned a constant above its bound")
        return bound

    # -- execution tables ----------------------------------------------------

    def runtime(self) -> "_Runtime":
        if self._runtime is None:
            self._runtime = _Runtime(self)
        return self._runtime

    def initial_config(self) -> Configuration:
        return frozenset({Token(0, ())})

    def valuation_of(self, token: Token) -> dict[int, int]:
        return dict(zip(self.counters_of[token.state], token.values))

    # -- debug output --------------------------------------------------------

    def dump_table(self) -> str:
        from .syntax import format_class

        lines = [f"states: {self.n_states}  (initial: 0{' with self-loop' if self.initial_self_loop else ''})"]
        for q in range(self.n_states):
            regs = ",".join(f"x{c}" for c in self.counters_of[q]) or "-"
            fin = f"  final[{self.final[q].render()}]" if q in self.final else ""
            lines.append(f"  q{q}: counters {regs}{fin}")
        lines.append("transitions:")
        for t in self.transitions:
            lines.append(
                f"  q{t.src} --{format_class(t.klass)}, {t.guard.render()} / {t.action.render()}--> q{t.dst}"
            )
        return "\n".join(lines)

    def to_dot(self) -> str:
        from .syntax import format_class

        lines = ["digraph nca {", "  rankdir=LR;"]
        for q in range(self.n_states):
            regs = ",".join(f"x{c}" for c in self.counters_of[q])
            label = f"q{q}" + (f": {regs}" if regs else "")
            shape = "doublecircle" if q in self.final else "circle"
            lines.append(f'  q{q} [label="{label}", shape={shape}];')
        for t in self.transitions:
            label = format_class(t.klass).replace('"', '\\"')
            if not t.guard.is_true():
                label += f", {t.guard.render()}"
            if t.action.ops:
                label += f" / {t.action.render()}"
            lines.append(f'  q{t.src} -> q{t.dst} [label="{label}"];')
        lines.append("}")
        return "\n".join(lines)


class _Runtime:
    """Index-lowered transition tables for fast token execution."""

    def __init__(self, nca: Nca):
        self.nca = nca
        n = nca.n_states
        self.out: list[list[tuple[int, int, tuple, tuple]]] = [[] for _ in range(n)]
        for t in nca.transitions:
            src_idx = {c: i for i, c in enumerate(nca.counters_of[t.src])}
            guard = tuple((src_idx[a.counter], a.kind, a.lo, a.hi) for a in t.guard.atoms)
            ops = []
            for op in t.action.ops:  # ops sorted by dst counter == dst value order
                if op.kind == SET:
                    ops.append((0, op.arg))
                elif op.kind == COPY:
                    ops.append((1, src_idx[op.arg]))
                else:
                    ops.append((2, src_idx[op.arg]))
            self.out[t.src].append((t.klass.bits, t.dst, guard, tuple(ops)))
        self.final: dict[int, tuple] = {}
        for q, g in nca.final.items():
            idx = {c: i for i, c in enumerate(nca.counters_of[q])}
            self.final[q] = tuple((idx[a.counter], a.kind, a.lo, a.hi) for a in g.atoms)

    @staticmethod
    def _holds(guard: tuple, values: tuple[int, ...]) -> bool:
        for idx, kind, lo, hi in guard:
            v = values[idx]
            if kind == LT:
                if not v < hi:
                    return False
            elif kind == EQ:
                if v != lo:
                    return False
            elif not lo <= v <= hi:
                return False
        return True

    def token_moves(self, token: Token) -> list[tuple[int, int, tuple[int, ...]]]:
        """Enabled moves of one token: (class_bits, dst, new_values)."""
        state, values = token
        moves = []
        for bits, dst, guard, ops in self.out[state]:
            if guard and not self._holds(guard, values):
                continue
            new = tuple(arg if code == 0 else values[arg] if code == 1 else values[arg] + 1 for code, arg in ops)
            moves.append((bits, dst, new))
        return moves

    def is_final(self, token: Token) -> bool:
        guard = self.final.get(token.state)
        if guard is None:
            return False
        return self._holds(guard, token.values)


# ---------------------------------------------------------------------------
# Glushkov construction
# ---------------------------------------------------------------------------


@dataclass
class _Pos:
    state: int
    klass: CharClass
    chain: tuple[int, ...]  # enclosing instance ids, outermost first


class _Builder:
    def __init__(self, merged_first: bool):
        self.positions: list[_Pos] = []
        self.edges: list[tuple[int, int, tuple[int, ...], int | None]] = []
        self.bounds: dict[int, tuple[int, int]] = {}
        self.instances: dict[int, InstanceMeta] = {}
        self.merged_first = merged_first

    def new_pos(self, klass: CharClass, chain: tuple[int, ...]) -> int:
        if self.merged_first and not self.positions:
            state = 0
        else:
            state = len(self.positions) + (0 if self.merged_first else 1)
        self.positions.append(_Pos(state, klass, chain))
        return state


def _leading_atom(node: Node) -> Node:
    while isinstance(node, Concat):
        node = node.left
    return node


def _check_normalized(ast: Node) -> None:
    from .syntax import repeats_in_order

    for rep in repeats_in_order(ast):
        if rep.min < 1 or rep.max < 2 or nullable(rep.child):
            raise ValueError("glushkov requires a normalized AST (run rewrite.normalize first)")


def glushkov(ast: Node) -> Nca:
    """Translate a normalized AST into an equivalent homogeneous NCA."""
    from .syntax import ensure_recursion_room

    ensure_recursion_room(ast)
    _check_normalized(ast)

    lead = _leading_atom(ast)
    merge = isinstance(lead, Star) and isinstance(lead.child, Class) and lead.child.klass.is_universal()
    b = _Builder(merge)

    root_nullable, first, last = _walk(ast, (), b)

    n_states = len(b.positions) + (0 if merge else 1)
    state_class: list[CharClass | None] = [None] * n_states
    chains: dict[int, tuple[int, ...]] = {0: ()}
    for p in b.positions:
        state_class[p.state] = p.klass
        chains[p.state] = p.chain

    transitions: set[Transition] = set()

    def add_edge(u: int, v: int, anc: tuple[int, ...], loop: int | None) -> None:
        cu, cv = chains[u], chains[v]
        skip = len(anc) + (1 if loop is not None else 0)
        exited = cu[skip:]
        entered = cv[skip:]
        atoms = [between(j, *b.bounds[j]) for j in exited]
        if loop is not None:
            atoms.append(lt(loop, b.bounds[loop][1]))
        ops = []
        for j in cv:
            if j == loop:
                ops.append(ActionOp(j, INC, j))
            elif j in entered:
                ops.append(ActionOp(j, SET, 1))
            else:
                ops.append(ActionOp(j, COPY, j))
        transitions.add(
            Transition(u, state_class[v], Guard(tuple(atoms)), v, Action(tuple(ops)))
        )

    for p in first:
        add_edge(0, p, (), None)
    for u, v, anc, loop in b.edges:
        add_edge(u, v, anc, loop)

    final: dict[int, Guard] = {}
    for p in last:
        final[p] = Guard(tuple(between(j, *b.bounds[j]) for j in chains[p]))
    if root_nullable:
        final[0] = TRUE

    counters_of = [tuple(sorted(chains.get(q, ()))) for q in range(n_states)]

    repetition_map = {i: i for i in b.bounds}
    counter_bounds = {i: hi for i, (_, hi) in b.bounds.items()}

    return Nca(
        n_states=n_states,
        state_class=state_class,
        counters_of=counters_of,
        transitions=list(transitions),
        final=final,
        repetition_map=repetition_map,
        counter_bounds=counter_bounds,
        instances=b.instances,
        initial_self_loop=merge,
        source=ast,
    )


def _walk(node: Node, stack: tuple[int, ...], b: _Builder):
    """Returns (nullable, first positions, last positions); emits edges."""
    if isinstance(node, Epsilon):
        return True, [], []
    if isinstance(node, Class):
        p = b.new_pos(node.klass, stack)
        return False, [p], [p]
    if isinstance(node, Concat):
        ln, lf, ll = _walk(node.left, stack, b)
        rn, rf, rl = _walk(node.right, stack, b)
        for u in ll:
            for v in rf:
                b.edges.append((u, v, stack, None))
        first = lf + rf if ln else lf
        last = rl + ll if rn else rl
        return ln and rn, first, last
    if isinstance(node, Alt):
        ln, lf, ll = _walk(node.left, stack, b)
        rn, rf, rl = _walk(node.right, stack, b)
        return ln or rn, lf + rf, ll + rl
    if isinstance(node, Star):
        _, f, l = _walk(node.child, stack, b)
        for u in l:
            for v in f:
                b.edges.append((u, v, stack, None))
        return True, f, l
    if isinstance(node, Repeat):
        i = node.instance_id
        b.bounds[i] = (node.min, node.max)
        start = len(b.positions)
        _, f, l = _walk(node.child, stack + (i,), b)
        body = tuple(p.state for p in b.positions[start:])
        b.instances[i] = InstanceMeta(
            instance_id=i,
            min=node.min,
            max=node.max,
            body_states=body,
            first_states=tuple(f),
            last_states=tuple(l),
        )
        for u in l:
            for v in f:
                b.edges.append((u, v, stack, i))
        return False, f, l
    raise TypeError(f"unknown node {node!r}")
