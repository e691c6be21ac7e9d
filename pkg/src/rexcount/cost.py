"""Energy and area estimation for compiled automata.

Defaults correspond to the published component measurements of the
in-memory CAM-array bank unit (512 states with local switching), the
17-bit counter module, and the 2000-bit vector module. All parameters
are user-editable through a key/value file, so the model can be
recalibrated for a different process or accounting.

Accounting choices (see README for discussion):

* the bank figures are charged per allocated 512-state PE unit -- CAM
  search is broadcast, so allocated arrays burn energy every cycle,
  idle or not;
* counter and bit-vector modules consume energy only on operations
  counted by the activity trace; idle modules are free;
* area is allocation-based: PE units plus counter and vector modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .hwir import ActivityTrace, AutomatonIr, BitVectorNode, CounterNode, HState


@dataclass(frozen=True)
class CostParams:
    # per-component measurements
    bank_energy: float = 16780.0  # fJ per PE unit per cycle
    bank_delay: float = 325.0  # ps
    bank_area: float = 3919.0  # um^2 per PE unit
    counter_energy: float = 288.0  # fJ per op
    counter_delay: float = 101.0  # ps
    counter_area: float = 237.0  # um^2
    bitvector_energy: float = 3340.0  # fJ per op (2000-bit vector)
    bitvector_delay: float = 71.0  # ps
    bitvector_area: float = 6382.0  # um^2
    # structure
    stes_per_pe: int = 512
    pes_per_bank: int = 128
    counters_per_pe: int = 8
    bitvector_capacity_bits: int = 2000

    def __post_init__(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"parameter {f.name} must be positive")


def load_params(path) -> CostParams:
    """Read ``name = value`` lines (# comments allowed) over the defaults."""
    valid = {f.name: f.type for f in fields(CostParams)}
    overrides: dict[str, float | int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, _, value = line.partition("=")
            else:
                key, _, value = line.partition(" ")
            key, value = key.strip(), value.strip()
            if key not in valid:
                raise ValueError(f"{path}:{lineno}: unknown parameter {key!r}")
            overrides[key] = int(value) if valid[key] == "int" else float(value)
    return replace(CostParams(), **overrides)


def dump_params(params: CostParams) -> str:
    return "".join(f"{f.name} = {getattr(params, f.name)}\n" for f in fields(CostParams))


# ---------------------------------------------------------------------------
# Allocation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Allocation:
    hstates: int
    counters: int
    pes: int
    banks: int
    vectors: int
    bitvector_bits_used: int
    bitvector_bits_allocated: int

    @property
    def wasted_bits(self) -> int:
        return self.bitvector_bits_allocated - self.bitvector_bits_used


def allocate(ir: AutomatonIr, params: CostParams | None = None) -> Allocation:
    """First-fit packing of IR nodes onto the hardware structure.

    hStates fill PEs, counters fill per-PE counter slots, and bit-vector
    instances share physical vectors: first-fit by decreasing size, with
    oversized instances chaining ceil(size/capacity) dedicated vectors.
    """
    params = params or CostParams()
    n_h = sum(1 for n in ir.nodes if isinstance(n, HState))
    n_c = sum(1 for n in ir.nodes if isinstance(n, CounterNode))
    sizes = sorted((n.size for n in ir.nodes if isinstance(n, BitVectorNode)), reverse=True)

    cap = params.bitvector_capacity_bits
    vectors = 0
    free: list[int] = []  # remaining capacity per open shared vector
    used_bits = 0
    for size in sizes:
        used_bits += size
        if size > cap:
            vectors += math.ceil(size / cap)
            continue
        for idx, room in enumerate(free):
            if room >= size:
                free[idx] = room - size
                break
        else:
            vectors += 1
            free.append(cap - size)

    pes = max(math.ceil(n_h / params.stes_per_pe), math.ceil(n_c / params.counters_per_pe))
    if pes == 0 and (n_h or n_c or vectors):
        pes = 1
    banks = math.ceil(pes / params.pes_per_bank)
    return Allocation(
        hstates=n_h,
        counters=n_c,
        pes=pes,
        banks=banks,
        vectors=vectors,
        bitvector_bits_used=used_bits,
        bitvector_bits_allocated=vectors * cap,
    )


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------


class TraceMismatchError(ValueError):
    pass


@dataclass
class CostReport:
    energy_per_byte: float  # fJ
    total_area: float  # um^2
    energy_breakdown: dict[str, float]
    area_breakdown: dict[str, float]
    allocation: Allocation
    cycle_time_ps: float
    cycle_limited_by: str
    cycles: int

    def to_json_obj(self) -> dict:
        return {
            "energy_per_byte_fj": self.energy_per_byte,
            "total_area_um2": self.total_area,
            "energy_breakdown_fj": self.energy_breakdown,
            "area_breakdown_um2": self.area_breakdown,
            "cycle_time_ps": self.cycle_time_ps,
            "cycle_limited_by": self.cycle_limited_by,
            "cycles": self.cycles,
            "allocated": {
                "banks": self.allocation.banks,
                "pes": self.allocation.pes,
                "hstates": self.allocation.hstates,
                "counters": self.allocation.counters,
                "bitvectors": self.allocation.vectors,
                "bitvector_bits": self.allocation.bitvector_bits_allocated,
                "wasted_bits": self.allocation.wasted_bits,
            },
        }

    def format_table(self) -> str:
        rows = [
            ("energy/byte", f"{self.energy_per_byte:.2f} fJ"),
            ("  bank", f"{self.energy_breakdown['bank']:.2f} fJ"),
            ("  counter", f"{self.energy_breakdown['counter']:.2f} fJ"),
            ("  bitvector", f"{self.energy_breakdown['bitvector']:.2f} fJ"),
            ("total area", f"{self.total_area:.2f} um^2"),
            ("  bank", f"{self.area_breakdown['bank']:.2f} um^2"),
            ("  counter", f"{self.area_breakdown['counter']:.2f} um^2"),
            ("  bitvector", f"{self.area_breakdown['bitvector']:.2f} um^2"),
            ("cycle time", f"{self.cycle_time_ps:.0f} ps ({self.cycle_limited_by})"),
            ("banks/PEs", f"{self.allocation.banks}/{self.allocation.pes}"),
            ("hStates", str(self.allocation.hstates)),
            ("counters", str(self.allocation.counters)),
            ("bit vectors", f"{self.allocation.vectors} ({self.allocation.wasted_bits} wasted bits)"),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def estimate(ir: AutomatonIr, trace: ActivityTrace, params: CostParams | None = None) -> CostReport:
    """Cost of running the compiled automaton, per input byte.

    Energy: allocated PE units pay the bank rate every cycle (in-memory
    search is activity-independent); counting modules pay per operation
    from the trace. Area is pure allocation.
    """
    params = params or CostParams()
    alloc = allocate(ir, params)
    counts = ir.counts()
    if sum(trace.counter_ops) and not counts["counter"]:
        raise TraceMismatchError("trace has counter activity but the IR has no counters")
    if sum(trace.bitvector_ops) and not counts["bitvector"]:
        raise TraceMismatchError("trace has bit-vector activity but the IR has no bit vectors")
    if any(a > counts["hState"] for a in trace.active_hstates):
        raise TraceMismatchError("trace activates more hStates than the IR contains")

    cycles = trace.cycles
    per_byte = lambda total: total / cycles if cycles else 0.0
    energy = {
        "bank": alloc.pes * (params.bank_energy / params.pes_per_bank),
        "counter": per_byte(sum(trace.counter_ops)) * params.counter_energy,
        "bitvector": per_byte(sum(trace.bitvector_ops)) * params.bitvector_energy,
    }
    area = {
        "bank": alloc.pes * params.bank_area,
        "counter": alloc.counters * params.counter_area,
        "bitvector": alloc.vectors * params.bitvector_area,
    }
    delays = {
        "bank": params.bank_delay,
        "counter": params.counter_delay if counts["counter"] else 0.0,
        "bitvector": params.bitvector_delay if counts["bitvector"] else 0.0,
    }
    limiter = max(delays, key=lambda k: delays[k])
    return CostReport(
        energy_per_byte=sum(energy.values()),
        total_area=sum(area.values()),
        energy_breakdown=energy,
        area_breakdown=area,
        allocation=alloc,
        cycle_time_ps=delays[limiter],
        cycle_limited_by=limiter,
        cycles=cycles,
    )
