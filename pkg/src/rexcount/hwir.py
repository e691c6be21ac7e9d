"""Hardware automaton IR: compilation, serialization, and simulation.

The IR is a port-wired graph of three node kinds:

* ``hState``   -- a homogeneous state holding a character class, with an
  enablement mode (onStartOfData / onActivateIn / always) and a report
  flag; ports: in ``i``, out ``o``.
* ``counter``  -- scalar cell for an unambiguous repetition; ports: in
  ``pre``/``fst``/``lst``, out ``en_fst``/``en_out``.
* ``bitvector`` -- shift-register cell for an ambiguous single-class
  repetition; ports: in ``pre``/``body``, out ``en_body``/``en_out``.

Counting nodes carry a report flag so a repetition that ends the
pattern can signal acceptance through its range check (an hState's
report is unconditional and cannot express the [min, max] guard).

The compiler decides per instance: unfold below the threshold, counter
for unambiguous instances whose body has unique first/last states,
bit vector for ambiguous single-class instances, and unfolding for
everything else (nested counting, inconclusive verdicts, odd shapes).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

from .analysis import DEFAULT_BUDGET, Verdict, analyze
from .charclass import CharClass
from .engine import BitVectorCell, CounterCell, MatchEvent
from .nca import Nca, glushkov
from .rewrite import (
    DEFAULT_NODE_LIMIT,
    max_upper_bound,
    nested_outer_instances,
    normalize,
    unfold,
    unfold_instances,
)
from .syntax import Class, Node, Repeat, pretty, repeats_in_order

IR_VERSION = 1

ENABLE_START, ENABLE_INPUT, ENABLE_ALWAYS = "onStartOfData", "onActivateIn", "always"
_ENABLES = (ENABLE_START, ENABLE_INPUT, ENABLE_ALWAYS)

_PORTS_IN = {"hState": ("i",), "counter": ("pre", "fst", "lst"), "bitvector": ("pre", "body")}
_PORTS_OUT = {"hState": ("o",), "counter": ("en_fst", "en_out"), "bitvector": ("en_body", "en_out")}

PRE_PULSE, PRE_ALWAYS = "pulse", "always"


class IrValidationError(ValueError):
    pass


@dataclass(frozen=True)
class HState:
    id: str
    klass: CharClass
    enable: str = ENABLE_INPUT
    report: bool = False
    kind: str = field(default="hState", init=False)


@dataclass(frozen=True)
class CounterNode:
    id: str
    min: int
    max: int
    instance: int
    report: bool = False
    pre_start: str | None = None  # synthetic pre source when entered from the start
    kind: str = field(default="counter", init=False)


@dataclass(frozen=True)
class BitVectorNode:
    id: str
    size: int
    min: int
    max: int
    instance: int
    report: bool = False
    pre_start: str | None = None
    kind: str = field(default="bitvector", init=False)


IrNode = HState | CounterNode | BitVectorNode


@dataclass(frozen=True, order=True)
class IrConnection:
    from_node: str
    from_port: str
    to_node: str
    to_port: str


@dataclass
class AutomatonIr:
    nodes: list[IrNode]
    connections: list[IrConnection]
    metadata: dict

    def __post_init__(self) -> None:
        self.nodes = sorted(self.nodes, key=lambda n: n.id)
        self.connections = sorted(set(self.connections))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AutomatonIr)
            and self.nodes == other.nodes
            and self.connections == other.connections
            and self.metadata == other.metadata
        )

    def node(self, node_id: str) -> IrNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def node_count(self) -> int:
        return len(self.nodes)

    def counts(self) -> dict[str, int]:
        out = {"hState": 0, "counter": 0, "bitvector": 0}
        for n in self.nodes:
            out[n.kind] += 1
        return out

    # -- validation ----------------------------------------------------------

    def validate(self) -> None:
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise IrValidationError("duplicate node ids")
        by_id = {n.id: n for n in self.nodes}
        for n in self.nodes:
            if isinstance(n, HState):
                if n.enable not in _ENABLES:
                    raise IrValidationError(f"node {n.id}: unknown enable {n.enable!r}")
                if n.klass.is_empty():
                    raise IrValidationError(f"node {n.id}: empty character class")
            else:
                if not 1 <= n.min <= n.max:
                    raise IrValidationError(f"node {n.id}: require 1 <= min <= max")
                if isinstance(n, BitVectorNode) and n.size != n.max:
                    raise IrValidationError(f"node {n.id}: bitvector size must equal max")
                if n.pre_start not in (None, PRE_PULSE, PRE_ALWAYS):
                    raise IrValidationError(f"node {n.id}: bad pre_start {n.pre_start!r}")
        for c in self.connections:
            for node_id, port, table, side in (
                (c.from_node, c.from_port, _PORTS_OUT, "output"),
                (c.to_node, c.to_port, _PORTS_IN, "input"),
            ):
                node = by_id.get(node_id)
                if node is None:
                    raise IrValidationError(f"connection {self._describe(c)}: unknown node {node_id!r}")
                if port not in table[node.kind]:
                    raise IrValidationError(
                        f"connection {self._describe(c)}: {node.kind} has no {side} port {port!r}"
                    )
        for n in self.nodes:
            if isinstance(n, CounterNode):
                for port in ("fst", "lst"):
                    sources = [c for c in self.connections if c.to_node == n.id and c.to_port == port]
                    if len(sources) != 1:
                        raise IrValidationError(f"counter {n.id} needs exactly one {port} source")
            if isinstance(n, BitVectorNode):
                sources = [c for c in self.connections if c.to_node == n.id and c.to_port == "body"]
                if len(sources) != 1:
                    raise IrValidationError(f"bitvector {n.id} needs exactly one body source")
        self._check_report_reachability(by_id)

    def _check_report_reachability(self, by_id: dict) -> None:
        adjacency: dict[str, set[str]] = {n.id: set() for n in self.nodes}
        for c in self.connections:
            adjacency[c.from_node].add(c.to_node)
        roots = [n.id for n in self.nodes if isinstance(n, HState) and n.enable != ENABLE_INPUT]
        roots += [n.id for n in self.nodes if not isinstance(n, HState) and n.pre_start is not None]
        seen = set(roots)
        stack = list(roots)
        while stack:
            for nxt in adjacency[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        for n in self.nodes:
            if getattr(n, "report", False) and n.id not in seen:
                raise IrValidationError(f"report node {n.id} unreachable from any start-enabled node")

    @staticmethod
    def _describe(c: IrConnection) -> str:
        return f"{c.from_node}.{c.from_port}->{c.to_node}.{c.to_port}"


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def _node_obj(n: IrNode) -> dict:
    if isinstance(n, HState):
        return {"id": n.id, "kind": n.kind, "class": n.klass.to_hex(), "enable": n.enable, "report": n.report}
    obj = {"id": n.id, "kind": n.kind, "min": n.min, "max": n.max, "instance": n.instance, "report": n.report}
    if isinstance(n, BitVectorNode):
        obj["size"] = n.size
    if n.pre_start is not None:
        obj["pre_start"] = n.pre_start
    return obj


def emit_json(ir: AutomatonIr) -> bytes:
    ir.validate()
    doc = {
        "version": IR_VERSION,
        "metadata": ir.metadata,
        "nodes": [_node_obj(n) for n in ir.nodes],
        "connections": [
            {"from": [c.from_node, c.from_port], "to": [c.to_node, c.to_port]} for c in ir.connections
        ],
    }
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")


def load_json(data: bytes | str) -> AutomatonIr:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise IrValidationError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != IR_VERSION:
        raise IrValidationError(f"unsupported IR document version {doc.get('version')!r}")
    nodes: list[IrNode] = []
    for obj in doc.get("nodes", []):
        kind = obj.get("kind")
        try:
            if kind == "hState":
                nodes.append(
                    HState(obj["id"], CharClass.from_hex(obj["class"]), obj["enable"], bool(obj["report"]))
                )
            elif kind == "counter":
                nodes.append(
                    CounterNode(obj["id"], obj["min"], obj["max"], obj["instance"], bool(obj["report"]), obj.get("pre_start"))
                )
            elif kind == "bitvector":
                nodes.append(
                    BitVectorNode(obj["id"], obj["size"], obj["min"], obj["max"], obj["instance"], bool(obj["report"]), obj.get("pre_start"))
                )
            else:
                raise IrValidationError(f"node {obj.get('id')!r}: unknown kind {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, IrValidationError):
                raise
            raise IrValidationError(f"node {obj.get('id')!r}: {exc}") from exc
    connections = []
    for obj in doc.get("connections", []):
        try:
            (fn, fp), (tn, tp) = obj["from"], obj["to"]
        except (KeyError, TypeError, ValueError) as exc:
            raise IrValidationError(f"malformed connection {obj!r}") from exc
        connections.append(IrConnection(fn, fp, tn, tp))
    ir = AutomatonIr(nodes, connections, doc.get("metadata", {}))
    ir.validate()
    return ir


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------


@dataclass
class CompileOptions:
    unfold_threshold: int = 0
    force_unfold: bool = False
    budget: int = DEFAULT_BUDGET
    node_limit: int = DEFAULT_NODE_LIMIT
    analysis_mode: str = "hybrid"


def compile_pattern(pattern: str, opts: CompileOptions | None = None) -> AutomatonIr:
    from .syntax import parse

    return compile_ast(parse(pattern), opts)


def compile_ast(ast: Node, opts: CompileOptions | None = None) -> AutomatonIr:
    """Compile a regex AST into the automaton IR.

    Analysis budget exhaustion downgrades the instance to unfolding and
    records a diagnostic; only node-limit overflow fails compilation.
    """
    opts = opts or CompileOptions()
    ast = normalize(ast)
    source = pretty(ast)
    diagnostics: list[str] = []
    placements: dict[int, str] = {}

    if opts.force_unfold:
        for rep in repeats_in_order(ast):
            placements[rep.instance_id] = "unfolded"
        ast = normalize(unfold(ast, None, opts.node_limit))
    else:
        for _ in range(100):
            reps = repeats_in_order(ast)
            if not reps:
                break
            nested = set(nested_outer_instances(ast))
            to_unfold: set[int] = set()
            inner_ids = {r.instance_id for outer in reps if outer.instance_id in nested for r in repeats_in_order(outer.child)}
            report = analyze(ast, opts.analysis_mode, budget=opts.budget, record_witness=False)
            nca = glushkov(ast)
            for rep in reps:
                i = rep.instance_id
                if rep.max <= opts.unfold_threshold:
                    to_unfold.add(i)
                    continue
                if i in nested:
                    to_unfold.add(i)
                    diagnostics.append(f"instance {i}: nested counting, outer instance unfolded")
                    continue
                if i in inner_ids:
                    continue  # decided after its enclosing instance unfolds
                verdict = report.instance(i)
                meta = nca.instances[i]
                if verdict.verdict is Verdict.INCONCLUSIVE:
                    to_unfold.add(i)
                    diagnostics.append(f"instance {i}: analysis inconclusive ({verdict.reason.value}), unfolded")
                elif verdict.verdict is Verdict.AMBIGUOUS:
                    if isinstance(rep.child, Class):
                        placements[i] = "bitvector"
                    else:
                        to_unfold.add(i)
                        diagnostics.append(f"instance {i}: ambiguous with non-class body, unfolded")
                else:
                    if len(meta.first_states) == 1 and len(meta.last_states) == 1:
                        placements[i] = "counter"
                    else:
                        to_unfold.add(i)
                        diagnostics.append(f"instance {i}: body first/last states not unique, unfolded")
            if not to_unfold:
                break
            for i in to_unfold:
                placements[i] = "unfolded"
            # Inner instances are duplicated with fresh ids when their outer
            # unfolds; drop any stale placements.
            for i in inner_ids:
                placements.pop(i, None)
            ast = normalize(unfold_instances(ast, to_unfold, opts.node_limit))
        else:
            raise RuntimeError("compilation did not reach a placement fixpoint")

    nca = glushkov(ast)
    surviving = {r.instance_id for r in repeats_in_order(ast)}
    placed = {i: placements[i] for i in surviving}
    ir = _build_ir(nca, placed)
    ir.metadata = {
        "source": source,
        "unfold_threshold": opts.unfold_threshold,
        "force_unfold": opts.force_unfold,
        "analysis_mode": opts.analysis_mode,
        "initial": "start_anywhere" if nca.initial_self_loop else "anchored",
        "placements": {str(i): p for i, p in sorted(placements.items())},
        "diagnostics": diagnostics,
    }
    ir.validate()
    return ir


def _build_ir(nca: Nca, placed: dict[int, str]) -> AutomatonIr:
    state_of_instance: dict[int, int] = {}
    instance_of_state: dict[int, int] = {}
    for i in placed:
        for q in nca.instances[i].body_states:
            instance_of_state[q] = i
        state_of_instance[i] = -1

    def node_id(q: int) -> str:
        return f"s{q}"

    def module_id(i: int) -> str:
        return ("c" if placed[i] == "counter" else "v") + str(i)

    enables: dict[int, str] = {}
    reports: dict[int, bool] = {}
    module_report: dict[int, bool] = {}
    start_enable = ENABLE_ALWAYS if nca.initial_self_loop else ENABLE_START

    for q, guard in nca.final.items():
        if q == 0:
            continue  # the bare initial's acceptance is the unreported empty prefix
        if guard.is_true():
            reports[q] = True
        else:
            # Nest-free placement: the guard is this instance's range check.
            i = instance_of_state[q]
            module_report[i] = True

    connections: set[IrConnection] = set()
    pre_sources: dict[int, set[tuple]] = {i: set() for i in placed}
    pre_start: dict[int, str | None] = {i: None for i in placed}

    def exit_signal(q: int) -> tuple[str, str]:
        """The signal carrying 'state q fired and its instance may exit'."""
        i = instance_of_state.get(q)
        if i is not None and q in nca.instances[i].last_states:
            return (module_id(i), "en_out")
        return (node_id(q), "o")

    for t in nca.transitions:
        src, dst = t.src, t.dst
        si = instance_of_state.get(src)
        di = instance_of_state.get(dst)
        if src == nca.initial:
            if dst == nca.initial:
                continue  # the merged self-loop is the virtual always-on source
            enables[dst] = start_enable
            if di is not None and dst in nca.instances[di].first_states:
                pre_start[di] = PRE_ALWAYS if nca.initial_self_loop else PRE_PULSE
            continue
        if si is not None and si == di:
            meta = nca.instances[si]
            if any(op.kind == "inc" for op in t.action.ops):
                # The body loop runs through the module's re-entry gate.
                port = "en_fst" if placed[si] == "counter" else "en_body"
                connections.add(IrConnection(module_id(si), port, node_id(dst), "i"))
            else:
                connections.add(IrConnection(node_id(src), "o", node_id(dst), "i"))
            continue
        sig_node, sig_port = exit_signal(src)
        connections.add(IrConnection(sig_node, sig_port, node_id(dst), "i"))
        if di is not None and dst in nca.instances[di].first_states:
            pre_sources[di].add((sig_node, sig_port))

    nodes: list[IrNode] = []
    for q in range(nca.n_states):
        if q == nca.initial:
            if nca.initial_self_loop and nca.initial in nca.final:
                # A final universal self-loop must keep reporting in hardware.
                nodes.append(HState(node_id(q), nca.state_class[q], ENABLE_ALWAYS, True))
            continue
        nodes.append(
            HState(
                node_id(q),
                nca.state_class[q],
                enables.get(q, ENABLE_INPUT),
                reports.get(q, False),
            )
        )

    for i, kind in placed.items():
        meta = nca.instances[i]
        if kind == "counter":
            fst, lst = meta.first_states[0], meta.last_states[0]
            connections.add(IrConnection(node_id(fst), "o", module_id(i), "fst"))
            connections.add(IrConnection(node_id(lst), "o", module_id(i), "lst"))
            nodes.append(
                CounterNode(module_id(i), meta.min, meta.max, i, module_report.get(i, False), pre_start[i])
            )
        else:
            body = meta.body_states[0]
            connections.add(IrConnection(node_id(body), "o", module_id(i), "body"))
            nodes.append(
                BitVectorNode(module_id(i), meta.max, meta.min, meta.max, i, module_report.get(i, False), pre_start[i])
            )
        for sig_node, sig_port in pre_sources[i]:
            connections.add(IrConnection(sig_node, sig_port, module_id(i), "pre"))

    return AutomatonIr(nodes, sorted(connections), {})


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


@dataclass
class ActivityTrace:
    """Per-cycle activity counts; the cost model's input."""

    active_hstates: list[int] = field(default_factory=list)
    counter_ops: list[int] = field(default_factory=list)
    bitvector_ops: list[int] = field(default_factory=list)

    @property
    def cycles(self) -> int:
        return len(self.active_hstates)

    def totals(self) -> dict[str, int]:
        return {
            "cycles": self.cycles,
            "hstate_activations": sum(self.active_hstates),
            "counter_ops": sum(self.counter_ops),
            "bitvector_ops": sum(self.bitvector_ops),
        }


class _Cell:
    __slots__ = ("node", "cell", "fst_src", "lst_src", "body_src", "pre_hstates", "pre_ports", "pre_virtual", "latch")

    def __init__(self, node):
        self.node = node
        if isinstance(node, CounterNode):
            self.cell = CounterCell(node.min, node.max)
        else:
            self.cell = BitVectorCell(node.size, node.min, node.max)
        self.fst_src = self.lst_src = self.body_src = None
        self.pre_hstates: list[str] = []
        self.pre_ports: list[tuple[str, str]] = []
        self.pre_virtual = node.pre_start
        self.latch = False


class Machine:
    """Cycle-per-byte executor for an AutomatonIr.

    hStates fire when enabled in the previous cycle and the byte is in
    their class; counting cells update from their port signals. A report
    is raised when a reporting hState fires or a reporting cell's en_out
    fires.
    """

    def __init__(self, ir: AutomatonIr):
        ir.validate()
        self.ir = ir
        self.hstates: dict[str, HState] = {n.id: n for n in ir.nodes if isinstance(n, HState)}
        self.cells: dict[str, _Cell] = {
            n.id: _Cell(n) for n in ir.nodes if not isinstance(n, HState)
        }
        # Signal routing: (node, port) -> hStates to enable next cycle.
        self.targets: dict[tuple[str, str], list[str]] = {}
        for c in ir.connections:
            key = (c.from_node, c.from_port)
            if c.to_node in self.hstates:
                self.targets.setdefault(key, []).append(c.to_node)
            else:
                cell = self.cells[c.to_node]
                if c.to_port == "fst":
                    cell.fst_src = c.from_node
                elif c.to_port == "lst":
                    cell.lst_src = c.from_node
                elif c.to_port == "body":
                    cell.body_src = c.from_node
                elif c.to_port == "pre":
                    if c.from_node in self.hstates:
                        cell.pre_hstates.append(c.from_node)
                    else:
                        cell.pre_ports.append(key)
        self.always = {h.id for h in self.hstates.values() if h.enable == ENABLE_ALWAYS}
        self.report_hstates = {h.id for h in self.hstates.values() if h.report}
        self.report_cells = {c.node.id for c in self.cells.values() if c.node.report}
        self.reset()

    def reset(self) -> None:
        self.enabled = set(self.always) | {
            h.id for h in self.hstates.values() if h.enable == ENABLE_START
        }
        for cell in self.cells.values():
            if isinstance(cell.cell, CounterCell):
                cell.cell.active = False
                cell.cell.value = 0
            else:
                cell.cell.reset()
            cell.latch = cell.pre_virtual is not None
        self.offset = 0

    def cycle(self, byte: int) -> bool:
        """Advance one byte; True if anything reported this cycle."""
        active = {h for h in self.enabled if self.hstates[h].klass.contains(byte)}
        fired: dict[tuple[str, str], bool] = {}
        counter_ops = bv_ops = 0

        for cell in self.cells.values():
            node_key = cell.node.id
            if isinstance(cell.cell, CounterCell):
                fst = cell.fst_src in active
                lst = cell.lst_src in active
                en_fst, en_out = cell.cell.step(cell.latch, fst, lst)
                if fst or lst:
                    counter_ops += 1
                fired[(node_key, "en_fst")] = en_fst
                fired[(node_key, "en_out")] = en_out
            else:
                body = cell.body_src in active
                if body:
                    cell.cell.shift()
                    if cell.latch:
                        cell.cell.set_first()
                    bv_ops += 1
                else:
                    cell.cell.reset()
                bv = cell.cell
                fired[(node_key, "en_body")] = bv.max >= 2 and bv.disjunct(1, bv.max - 1)
                fired[(node_key, "en_out")] = bv.disjunct(bv.min, bv.max)

        nxt = set(self.always)
        for h in active:
            nxt.update(self.targets.get((h, "o"), ()))
        for key, on in fired.items():
            if on:
                nxt.update(self.targets.get(key, ()))
        self.enabled = nxt

        for cell in self.cells.values():
            cell.latch = (
                cell.pre_virtual == PRE_ALWAYS
                or any(h in active for h in cell.pre_hstates)
                or any(fired.get(key, False) for key in cell.pre_ports)
            )

        self.offset += 1
        self._trace_sample = (len(active), counter_ops, bv_ops)
        return bool(active & self.report_hstates) or any(
            fired.get((cid, "en_out"), False) for cid in self.report_cells
        )

    def run(self, data: bytes, rule_id: int = 0, trace: ActivityTrace | None = None) -> list[MatchEvent]:
        self.reset()
        events = []
        for byte in data:
            if self.cycle(byte):
                events.append(MatchEvent(rule_id, self.offset))
            if trace is not None:
                a, c, b = self._trace_sample
                trace.active_hstates.append(a)
                trace.counter_ops.append(c)
                trace.bitvector_ops.append(b)
        return events

    # -- introspection for adequacy checks ----------------------------------

    def cell_for_instance(self, instance_id: int):
        for cell in self.cells.values():
            if cell.node.instance == instance_id:
                return cell.cell
        raise KeyError(instance_id)

    def memory_bits(self) -> dict[str, int]:
        counter_bits = sum(
            c.cell.memory_bits() for c in self.cells.values() if isinstance(c.cell, CounterCell)
        )
        bv_bits = sum(
            c.cell.memory_bits() for c in self.cells.values() if isinstance(c.cell, BitVectorCell)
        )
        return {
            "hstate_bits": len(self.hstates),
            "counter_bits": counter_bits,
            "bitvector_bits": bv_bits,
        }


def simulate_ir(ir: AutomatonIr, data: bytes, rule_id: int = 0) -> tuple[list[MatchEvent], ActivityTrace]:
    """Cycle-per-byte simulation, returning match events and the trace."""
    machine = Machine(ir)
    trace = ActivityTrace()
    events = machine.run(bytes(data), rule_id, trace)
    return events, trace


class OptimizedMatcher:
    """Engine backend running the compiled cell machine."""

    def __init__(self, ir: AutomatonIr, rule_id: int = 0):
        self.ir = ir
        self.rule_id = rule_id
        self.machine = Machine(ir)

    def run(self, data) -> list[MatchEvent]:
        if hasattr(data, "read"):
            data = data.read()
        return self.machine.run(bytes(data), self.rule_id)

    def memory_bits(self) -> dict[str, int]:
        return self.machine.memory_bits()
