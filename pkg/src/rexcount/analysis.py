"""Counter-ambiguity analyses.

A repetition instance is counter-ambiguous when some input drives two
tokens with different counter values onto one state. The exact check is
breadth-first reachability in the pairwise product of the token
transition system (pairs are kept in canonical order to halve the
space). The over-approximate check stars out every other repetition
and is sound for "unambiguous" only; the hybrid driver tries the
approximation per instance and falls back to the exact algorithm.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .charclass import cls
from .engine import run_config
from .nca import Nca, glushkov
from .rewrite import normalize
from .syntax import (
    Alt,
    Class,
    Concat,
    EPSILON,
    Node,
    Repeat,
    Star,
    pretty,
    repeats_in_order,
)

DEFAULT_BUDGET = 10**7


class Verdict(str, Enum):
    UNAMBIGUOUS = "unambiguous"
    AMBIGUOUS = "ambiguous"
    INCONCLUSIVE = "inconclusive"


class Reason(str, Enum):
    BUDGET = "budget"
    APPROX = "approx"


@dataclass
class InstanceVerdict:
    instance_id: int
    min: int
    max: int
    verdict: Verdict
    witness: bytes | None = None
    witness_state: int | None = None
    witness_valuations: tuple[dict, dict] | None = None
    reason: Reason | None = None
    pairs_created: int = 0
    micros: int = 0

    def to_json_obj(self) -> dict:
        obj = {
            "id": self.instance_id,
            "min": self.min,
            "max": self.max,
            "verdict": self.verdict.value,
            "pairs_created": self.pairs_created,
            "micros": self.micros,
        }
        if self.reason is not None:
            obj["reason"] = self.reason.value
        if self.witness is not None:
            obj["witness"] = escape_bytes(self.witness)
        return obj


@dataclass
class AmbiguityReport:
    pattern: str
    mode: str
    instances: list[InstanceVerdict]
    pairs_created: int = 0
    micros: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> Verdict:
        if any(v.verdict is Verdict.AMBIGUOUS for v in self.instances):
            return Verdict.AMBIGUOUS
        if any(v.verdict is Verdict.INCONCLUSIVE for v in self.instances):
            return Verdict.INCONCLUSIVE
        return Verdict.UNAMBIGUOUS

    def instance(self, instance_id: int) -> InstanceVerdict:
        for v in self.instances:
            if v.instance_id == instance_id:
                return v
        raise KeyError(instance_id)

    def to_json_obj(self) -> dict:
        return {
            "regex": self.pattern,
            "mode": self.mode,
            "verdict": self.verdict.value,
            "pairs_created": self.pairs_created,
            "micros": self.micros,
            "instances": [v.to_json_obj() for v in self.instances],
        }


def escape_bytes(data: bytes) -> str:
    out = []
    for b in data:
        if b == 0x5C:
            out.append("\\\\")
        elif 0x20 <= b <= 0x7E:
            out.append(chr(b))
        else:
            out.append(f"\\x{b:02x}")
    return "".join(out)


# ---------------------------------------------------------------------------
# Exact analysis: pair reachability in the product of token systems
# ---------------------------------------------------------------------------


def exact_ambiguity(
    nca: Nca,
    budget: int = DEFAULT_BUDGET,
    record_witness: bool = True,
    focus: set[int] | None = None,
) -> AmbiguityReport:
    """Decide counter-ambiguity per repetition instance by exact search.

    Explores canonical token pairs breadth-first, producing a shortest
    witness for every ambiguous instance. Budget counts created pairs;
    instances still open at exhaustion become inconclusive.
    """
    start = time.perf_counter_ns()
    instance_ids = sorted(set(nca.repetition_map.values()))
    if focus is not None:
        instance_ids = [i for i in instance_ids if i in focus]
    verdicts: dict[int, InstanceVerdict] = {}
    meta = {i: nca.instances[i] for i in instance_ids}

    pairs_created = 0
    if instance_ids:
        rt = nca.runtime()
        moves_memo: dict = {}

        def moves(token):
            got = moves_memo.get(token)
            if got is None:
                got = rt.token_moves(token)
                moves_memo[token] = got
            return got

        t0 = (0, ())
        init_pair = (t0, t0)
        visited = {init_pair}
        parents: dict | None = {init_pair: (None, None)} if record_witness else None
        queue = deque([init_pair])
        pairs_created = 1
        unresolved = set(instance_ids)
        exhausted = False

        def resolve_ambiguous(pair) -> None:
            nonlocal unresolved
            (q, v1), (_, v2) = pair
            counters = nca.counters_of[q]
            hit = {
                nca.repetition_map[c]
                for idx, c in enumerate(counters)
                if v1[idx] != v2[idx]
            }
            hit &= unresolved
            if not hit:
                return
            witness = _rebuild_witness(parents, pair) if parents is not None else None
            now = (time.perf_counter_ns() - start) // 1000
            for i in hit:
                verdicts[i] = InstanceVerdict(
                    instance_id=i,
                    min=meta[i].min,
                    max=meta[i].max,
                    verdict=Verdict.AMBIGUOUS,
                    witness=witness,
                    witness_state=q,
                    witness_valuations=(
                        dict(zip(counters, v1)),
                        dict(zip(counters, v2)),
                    ),
                    pairs_created=pairs_created,
                    micros=now,
                )
            unresolved -= hit

        while queue and unresolved:
            t1, t2 = queue.popleft()
            m1 = moves(t1)
            m2 = m1 if t2 == t1 else moves(t2)
            for bits1, dst1, vals1 in m1:
                for bits2, dst2, vals2 in m2:
                    inter = bits1 & bits2
                    if not inter:
                        continue
                    a, b = (dst1, vals1), (dst2, vals2)
                    child = (a, b) if a <= b else (b, a)
                    if child in visited:
                        continue
                    visited.add(child)
                    pairs_created += 1
                    if parents is not None:
                        parents[child] = ((t1, t2), (inter & -inter).bit_length() - 1)
                    if child[0][0] == child[1][0] and child[0][1] != child[1][1]:
                        resolve_ambiguous(child)
                        if not unresolved:
                            break
                    queue.append(child)
                if not unresolved:
                    break
            if pairs_created > budget:
                exhausted = True
                break

        now = (time.perf_counter_ns() - start) // 1000
        for i in instance_ids:
            if i in verdicts:
                continue
            if exhausted:
                verdicts[i] = InstanceVerdict(
                    i, meta[i].min, meta[i].max, Verdict.INCONCLUSIVE,
                    reason=Reason.BUDGET, pairs_created=pairs_created, micros=now,
                )
            else:
                verdicts[i] = InstanceVerdict(
                    i, meta[i].min, meta[i].max, Verdict.UNAMBIGUOUS,
                    pairs_created=pairs_created, micros=now,
                )

    total_micros = (time.perf_counter_ns() - start) // 1000
    pattern = pretty(nca.source) if nca.source is not None else ""
    return AmbiguityReport(
        pattern=pattern,
        mode="exact",
        instances=[verdicts[i] for i in instance_ids],
        pairs_created=pairs_created,
        micros=total_micros,
    )


def _rebuild_witness(parents: dict, pair) -> bytes:
    out = bytearray()
    while True:
        parent, byte = parents[pair]
        if parent is None:
            break
        out.append(byte)
        pair = parent
    out.reverse()
    return bytes(out)


# ---------------------------------------------------------------------------
# Degree threshold queries (d-fold product)
# ---------------------------------------------------------------------------


def degree_at_least(nca: Nca, state: int, d: int, budget: int = DEFAULT_BUDGET) -> str:
    """Is the counter-ambiguity degree of ``state`` at least ``d``?

    Reachability over canonically sorted d-tuples of tokens; returns
    "yes", "no", or "inconclusive" (budget).
    """
    if d < 2:
        raise ValueError("degree queries need d >= 2")
    if not nca.counters_of[state]:
        return "no"  # a pure state carries at most the empty valuation
    rt = nca.runtime()
    moves_memo: dict = {}

    def moves(token):
        got = moves_memo.get(token)
        if got is None:
            got = rt.token_moves(token)
            moves_memo[token] = got
        return got

    t0 = (0, ())
    init = tuple([t0] * d)
    visited = {init}
    queue = deque([init])
    created = 1
    while queue:
        tup = queue.popleft()
        options = [moves(t) for t in tup]
        for combo in _product_nonempty(options):
            masks = combo[0][0]
            for bits, _, _ in combo[1:]:
                masks &= bits
                if not masks:
                    break
            if not masks:
                continue
            child = tuple(sorted((dst, vals) for _, dst, vals in combo))
            if child in visited:
                continue
            visited.add(child)
            created += 1
            if created > budget:
                return "inconclusive"
            if all(t[0] == state for t in child) and len({t[1] for t in child}) == d:
                return "yes"
            queue.append(child)
    return "no"


def _product_nonempty(options):
    if not options:
        yield ()
        return
    head, *rest = options
    for h in head:
        for r in _product_nonempty(rest):
            yield (h, *r)


# ---------------------------------------------------------------------------
# Over-approximate and hybrid analyses
# ---------------------------------------------------------------------------


def _star_others(node: Node, keep: int) -> Node:
    """Replace every repetition except ``keep`` by a star of its body."""
    if isinstance(node, Concat):
        return Concat(_star_others(node.left, keep), _star_others(node.right, keep))
    if isinstance(node, Alt):
        return Alt(_star_others(node.left, keep), _star_others(node.right, keep))
    if isinstance(node, Star):
        return Star(_star_others(node.child, keep))
    if isinstance(node, Repeat):
        child = _star_others(node.child, keep)
        if node.instance_id == keep:
            return Repeat(child, node.min, node.max, node.instance_id)
        return Star(child)
    return node


def approximate_ambiguity(
    ast: Node,
    instance_id: int,
    budget: int = DEFAULT_BUDGET,
) -> InstanceVerdict:
    """Sound unambiguity check for one instance via the starred automaton.

    Every other bounded repetition is over-approximated by a star, which
    only adds paths: if the approximated automaton is counter-unambiguous
    for this instance, so is the original. An ambiguous finding on the
    approximation is inconclusive.
    """
    if instance_id not in {r.instance_id for r in repeats_in_order(ast)}:
        raise KeyError(f"no repetition instance {instance_id}")
    approx = _star_others(ast, instance_id)
    nca = glushkov(approx)
    report = exact_ambiguity(nca, budget=budget, record_witness=False, focus={instance_id})
    inner = report.instance(instance_id)
    if inner.verdict is Verdict.UNAMBIGUOUS:
        verdict, reason = Verdict.UNAMBIGUOUS, None
    elif inner.verdict is Verdict.AMBIGUOUS:
        verdict, reason = Verdict.INCONCLUSIVE, Reason.APPROX
    else:
        verdict, reason = Verdict.INCONCLUSIVE, inner.reason
    return InstanceVerdict(
        instance_id=instance_id,
        min=inner.min,
        max=inner.max,
        verdict=verdict,
        reason=reason,
        pairs_created=report.pairs_created,
        micros=report.micros,
    )


def hybrid_ambiguity(
    ast: Node,
    budget: int = DEFAULT_BUDGET,
    record_witness: bool = True,
) -> AmbiguityReport:
    """Approximate each instance; on the first inconclusive one, go exact.

    The budget applies to each internal exploration; reported pair counts
    and times are summed across phases.
    """
    start = time.perf_counter_ns()
    reps = repeats_in_order(ast)
    pattern = pretty(ast)
    total_pairs = 0
    approx_verdicts: list[InstanceVerdict] = []
    need_exact = False
    for rep in reps:
        v = approximate_ambiguity(ast, rep.instance_id, budget)
        total_pairs += v.pairs_created
        if v.verdict is not Verdict.UNAMBIGUOUS:
            need_exact = True
            break
        approx_verdicts.append(v)

    if not need_exact:
        micros = (time.perf_counter_ns() - start) // 1000
        return AmbiguityReport(pattern, "hybrid", approx_verdicts, total_pairs, micros)

    exact = exact_ambiguity(glushkov(ast), budget=budget, record_witness=record_witness)
    total_pairs += exact.pairs_created
    proven = {v.instance_id for v in approx_verdicts}
    merged: list[InstanceVerdict] = []
    for v in exact.instances:
        if (
            v.verdict is Verdict.INCONCLUSIVE
            and v.instance_id in proven
        ):
            keep = next(a for a in approx_verdicts if a.instance_id == v.instance_id)
            merged.append(keep)
        else:
            merged.append(v)
    micros = (time.perf_counter_ns() - start) // 1000
    return AmbiguityReport(pattern, "hybrid", merged, total_pairs, micros)


def analyze(ast: Node, mode: str = "hybrid", budget: int = DEFAULT_BUDGET, record_witness: bool = True) -> AmbiguityReport:
    """Analysis entry point over a normalized AST."""
    ast = normalize(ast)
    if mode == "exact":
        report = exact_ambiguity(glushkov(ast), budget=budget, record_witness=record_witness)
        report.pattern = pretty(ast)
        return report
    if mode == "hybrid":
        return hybrid_ambiguity(ast, budget=budget, record_witness=record_witness)
    if mode == "approx":
        start = time.perf_counter_ns()
        verdicts = [approximate_ambiguity(ast, r.instance_id, budget) for r in repeats_in_order(ast)]
        micros = (time.perf_counter_ns() - start) // 1000
        return AmbiguityReport(pretty(ast), "approx", verdicts, sum(v.pairs_created for v in verdicts), micros)
    raise ValueError(f"unknown analysis mode {mode!r}")


# ---------------------------------------------------------------------------
# Witness validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WitnessCheck:
    confirmed: bool
    state: int | None = None
    valuations: tuple[dict, dict] | None = None


def verify_witness(nca: Nca, witness: bytes) -> WitnessCheck:
    """Replay a witness under the reference semantics.

    Confirmed iff some state ends up holding two tokens with different
    counter valuations.
    """
    config = run_config(nca, witness)
    by_state: dict[int, list] = {}
    for token in config:
        by_state.setdefault(token.state, []).append(token.values)
    for state in sorted(by_state):
        vals = sorted(by_state[state])
        if len(vals) >= 2:
            counters = nca.counters_of[state]
            return WitnessCheck(
                True, state, (dict(zip(counters, vals[0])), dict(zip(counters, vals[1])))
            )
    return WitnessCheck(False)


# ---------------------------------------------------------------------------
# Hard-instance generator (subset-sum reduction)
# ---------------------------------------------------------------------------


def subset_sum_regex(members: list[int], target: int) -> Node:
    """The reduction regex ((a{n1}+eps)...(a{nm}+eps)#b + a{T}#bb)b{2}.

    Its rightmost repetition instance is counter-ambiguous iff some
    subset of ``members`` sums to ``target``; a hard-instance generator
    for the exact analysis.
    """
    if not members or any(n < 1 for n in members) or target < 1:
        raise ValueError("members must be nonempty naturals and target >= 1")
    a, b, hash_ = cls("a"), cls("b"), cls("#")
    next_id = 0

    def rep(klass, n: int) -> Node:
        nonlocal next_id
        next_id += 1
        return Repeat(Class(klass), n, n, next_id - 1)

    branch1: Node | None = None
    for n in members:
        optional = Alt(rep(a, n), EPSILON)
        branch1 = optional if branch1 is None else Concat(branch1, optional)
    branch1 = Concat(branch1, Concat(Class(hash_), Class(b)))
    branch2 = Concat(rep(a, target), Concat(Class(hash_), Concat(Class(b), Class(b))))
    return Concat(Alt(branch1, branch2), rep(b, 2))


def rightmost_instance_id(ast: Node) -> int:
    reps = repeats_in_order(ast)
    if not reps:
        raise ValueError("no repetition instances")
    return reps[-1].instance_id
