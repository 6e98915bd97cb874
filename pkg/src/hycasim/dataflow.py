"""Timeline model of DPPU recomputation alongside the 2-D array.

Per iteration (one complete output feature per PE) the output buffer port
is owned first by the array for ``delay_d`` cycles, then by the DPPU for
one cycle per repaired fault, then idles until the next iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .config import GROUPED, UNIFIED, ArrayConfig, dppu_layout
from .faults import FaultMap
from .perf import CONV, LayerSpec
from .repair import dppu_effective_capacity

PING, PONG = "ping", "pong"


class ScheduleInfeasible(ValueError):
    """The recomputation cannot be hidden behind the layer's iterations."""


class RegisterFileConflict(AssertionError):
    def __init__(self, cycle: int, reason: str):
        self.cycle = cycle
        super().__init__(f"cycle {cycle}: {reason}")


@dataclass(frozen=True)
class IterationSchedule:
    t_iteration: int
    t_2d_write: int
    t_dppu_write: int
    idle: int
    dppu_busy_cycles: int

    @property
    def port_busy(self) -> int:
        return self.t_2d_write + self.t_dppu_write


@dataclass(frozen=True)
class DppuUtilization:
    structure: str
    cycles_per_fault: int
    utilization: Fraction
    faults_per_pass: int = 1
    # circular-shift steps overlapped with the segment reads
    shift_cycles: int = 0


def _structure(cfg: ArrayConfig, structure: Optional[str]) -> str:
    s = (structure or cfg.dppu_structure).lower()
    if s not in (UNIFIED, GROUPED):
        raise ValueError(f"unknown DPPU structure {structure!r}")
    return s


def dppu_utilization(cfg: ArrayConfig, structure: Optional[str] = None) -> DppuUtilization:
    """Lane utilization when each fault brings ``cols`` operand pairs.

    Grouped: each group walks a fault's operand row segment by segment
    through the banked, circularly shifted register files. Unified: all lanes
    share one adder tree, so a fault either needs several passes or leaves
    lanes idle unless the size divides evenly into the operand count.
    """
    structure = _structure(cfg, structure)
    cols = cfg.cols
    if structure == GROUPED:
        group = min(cfg.dppu_group_size, cfg.dppu_size)
        segments = math.ceil(cols / group)
        return DppuUtilization(GROUPED, segments, Fraction(cols, group * segments),
                               shift_cycles=segments - 1)
    size = cfg.dppu_size
    if size >= cols:
        per_pass = size // cols
        return DppuUtilization(UNIFIED, 1, Fraction(per_pass * cols, size), per_pass)
    passes = math.ceil(cols / size)
    return DppuUtilization(UNIFIED, passes, Fraction(cols, size * passes))


def effective_repair_capacity(cfg: ArrayConfig, structure: Optional[str] = None,
                              fault_map: Optional[FaultMap] = None) -> int:
    util = dppu_utilization(cfg, structure).utilization
    return math.floor(dppu_effective_capacity(cfg, fault_map) * util)


def _busy_cycles(cfg: ArrayConfig, structure: str, fault_count: int) -> int:
    if fault_count == 0:
        return 0
    util = dppu_utilization(cfg, structure)
    if structure == GROUPED:
        n_groups = len(dppu_layout(cfg))
        return math.ceil(fault_count / n_groups) * util.cycles_per_fault
    return math.ceil(fault_count / util.faults_per_pass) * util.cycles_per_fault


def build_schedule(cfg: ArrayConfig, layer, fault_count: int,
                   structure: Optional[str] = None) -> IterationSchedule:
    """Three-phase output-port schedule for one iteration of a conv layer.

    ``layer`` is a :class:`LayerSpec` or a ``(c, k)`` pair.
    """
    if isinstance(layer, LayerSpec):
        if layer.kind != CONV:
            raise ValueError(f"{layer.name}: schedule is defined for conv layers")
        c, k = layer.c, layer.k
    else:
        c, k = layer
    if fault_count < 0:
        raise ValueError("fault_count must be >= 0")
    structure = _structure(cfg, structure)
    capacity = effective_repair_capacity(cfg, structure)
    if fault_count > capacity:
        raise ScheduleInfeasible(
            f"{fault_count} faults exceed the DPPU repair capacity of {capacity}")
    t_iter = c * k * k
    t_2d = cfg.delay_d
    if t_2d + fault_count > t_iter:
        raise ScheduleInfeasible(
            f"output port conflict: delay {t_2d} + {fault_count} DPPU writes > "
            f"iteration of {t_iter} cycles")
    busy = _busy_cycles(cfg, structure, fault_count)
    if busy > cfg.delay_d:
        raise ScheduleInfeasible(
            f"recompute needs {busy} cycles but operands live only {cfg.delay_d}")
    return IterationSchedule(t_iter, t_2d, fault_count, t_iter - t_2d - fault_count, busy)


@dataclass(frozen=True)
class RFTraceRecord:
    cycle: int
    bank_write: str
    bank_read: Optional[str]
    source_start: Optional[int]
    source_end: Optional[int]

    @property
    def owner(self) -> str:
        return "dppu" if self.bank_read is not None else "array"


def _bank(window: int) -> str:
    return PING if window % 2 == 0 else PONG


def register_file_trace(cfg: ArrayConfig, start: int, stop: int,
                        dppu_lag: Optional[int] = None) -> list:
    """Per-cycle Ping-Pong occupancy of the weight/input register files.

    The array side fills one bank for ``delay_d`` cycles, then swaps. The
    DPPU, lagging ``dppu_lag`` cycles (``delay_d`` by default), reads the
    bank filled during the previous window. Raises
    :class:`RegisterFileConflict` at the first cycle where the DPPU would
    read the bank being written or data that was already overwritten.
    """
    d = cfg.delay_d
    lag = d if dppu_lag is None else dppu_lag
    if stop - start > 2 * d:
        raise ValueError(f"trace window longer than 2*delay_d ({2 * d})")
    if start < 0 or stop < start:
        raise ValueError("bad trace window")
    out = []
    for t in range(start, stop):
        window = t // d
        wbank = _bank(window)
        if t < lag:
            out.append(RFTraceRecord(t, wbank, None, None, None))
            continue
        src = (t - lag) // d
        rbank = _bank(src)
        if src == window:
            raise RegisterFileConflict(t, f"DPPU reads {rbank} while it is being written")
        if src < window - 1:
            raise RegisterFileConflict(
                t, f"data from cycles [{src * d}, {(src + 1) * d}) was overwritten at cycle "
                   f"{(src + 2) * d}")
        out.append(RFTraceRecord(t, wbank, rbank, src * d, (src + 1) * d))
    return out


def trace_csv(records) -> str:
    lines = ["cycle,bank_write,bank_read,owner"]
    for r in records:
        lines.append(f"{r.cycle},{r.bank_write},{r.bank_read or '-'},{r.owner}")
    return "\n".join(lines) + "\n"
