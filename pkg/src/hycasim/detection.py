"""Runtime fault detection with one reserved DPPU group.

For every PE in turn the checking list buffer captures the accumulator
before (BAR) and ``S`` MAC steps after (AR) a window, while the reserved
group recomputes the same ``S`` products cleanly (PR). A PE is marked
faulty when ``AR != BAR + PR`` under 32-bit wrapping arithmetic. Newly
detected faults enter the fault PE table and are repaired from the next
layer on.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import ArrayConfig, PECoord, check_config
from .dataflow import effective_repair_capacity
from .emulator import ArrayState, random_stuck_mask
from .faults import FaultMap
from .perf import LayerSpec, layer_cycles


def _wrap32(v: int) -> int:
    v &= 0xFFFFFFFF
    return v - (1 << 32) if v & 0x80000000 else v


def scan_cycles(rows: int, cols: int) -> int:
    """Cycles to check every PE once; does not depend on the group size."""
    return rows * cols + cols


@dataclass(frozen=True)
class DetectionConfig:
    reserved_group_size: int = 8
    accum_width_w: int = 4
    cols: int = 32
    scan_period: int = 0  # 0 -> back to back
    window_offset: int = 0

    def __post_init__(self):
        if self.reserved_group_size < 1:
            raise ValueError("reserved_group_size must be >= 1")
        if self.scan_period < 0 or self.window_offset < 0:
            raise ValueError("scan_period and window_offset must be >= 0")

    @classmethod
    def for_array(cls, cfg: ArrayConfig, **kw) -> "DetectionConfig":
        kw.setdefault("reserved_group_size", min(cfg.dppu_group_size, cfg.dppu_size))
        return cls(accum_width_w=cfg.accum_width_w, cols=cfg.cols, **kw)

    @property
    def clb_bytes(self) -> int:
        return 4 * self.accum_width_w * self.cols

    @property
    def clb_entries(self) -> int:
        """BAR/AR values the buffer holds across both Ping-Pong halves."""
        return self.clb_bytes // self.accum_width_w


@dataclass(frozen=True)
class ScanResult:
    detected: frozenset
    scan_cycles: int
    fpt_after: tuple
    overflow: tuple = ()
    checks: int = 0


def update_fpt(fpt: Iterable, detected: Iterable, entries: int):
    """Merge detections into the table, keeping the leftmost faults on overflow."""
    merged = sorted({PECoord(*p) for p in fpt} | {PECoord(*p) for p in detected},
                    key=lambda p: (p.col, p.row))
    return tuple(merged[:entries]), tuple(merged[entries:])


def scan_array(cfg: ArrayConfig, det: DetectionConfig, state: ArrayState,
               fpt: Iterable = ()) -> ScanResult:
    """Sequentially check every PE against a clean recomputation of one window."""
    check_config(cfg)
    if det.clb_entries < 2 * cfg.cols:
        raise ValueError("checking list buffer cannot hold a BAR/AR pair per column")
    total = state.macs_per_output
    start = min(det.window_offset, total)
    stop = min(start + det.reserved_group_size, total)
    detected = set()
    for r in range(cfg.rows):
        for c in range(cfg.cols):
            bar = state.accumulator(r, c, start)
            ar = state.accumulator(r, c, stop)
            pr = state.clean_partial(r, c, start, stop)
            if ar != _wrap32(bar + pr):
                detected.add(PECoord(r, c))
    fpt_after, overflow = update_fpt(fpt, detected, cfg.dppu_size)
    return ScanResult(frozenset(detected), scan_cycles(cfg.rows, cfg.cols), fpt_after,
                      overflow, cfg.rows * cfg.cols)


def capacity_while_scanning(cfg: ArrayConfig, det: Optional[DetectionConfig] = None,
                            fault_map: Optional[FaultMap] = None) -> int:
    """Repair capacity left once one DPPU group is busy with detection."""
    det = det or DetectionConfig.for_array(cfg)
    return max(0, effective_repair_capacity(cfg, fault_map=fault_map) - det.reserved_group_size)


def detection_rate(cfg: ArrayConfig, det: DetectionConfig, inp: np.ndarray, weights: np.ndarray,
                   trials: int, seed: int = 0, n_bits: int = 1, stride: int = 1) -> float:
    """Fraction of single-PE stuck-bit faults caught by one scan.

    Trial ``i`` draws the faulty PE and its stuck bits from ``seed + i``.
    Stuck bits that never disturb the scanned window go unnoticed, so the
    rate is below one.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    hits = 0
    for i in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed + i, 2]))
        pe = PECoord(int(rng.integers(cfg.rows)), int(rng.integers(cfg.cols)))
        state = ArrayState(cfg, inp, weights, {pe: random_stuck_mask(rng, n_bits)}, stride)
        if pe in scan_array(cfg, det, state).detected:
            hits += 1
    return hits / trials


# -- coverage of a network's layers ------------------------------------------------

@dataclass(frozen=True)
class Coverage:
    network: str
    rows: int
    cols: int
    covered_flags: tuple

    @property
    def layers_total(self) -> int:
        return len(self.covered_flags)

    @property
    def layers_covered(self) -> int:
        return sum(self.covered_flags)

    @property
    def fraction(self) -> float:
        return self.layers_covered / self.layers_total if self.layers_total else 0.0


def layer_covered(layer: LayerSpec, rows: int, cols: int) -> bool:
    return layer_cycles(layer, rows, cols) >= scan_cycles(rows, cols)


def detection_coverage(cfg: ArrayConfig, network: Sequence[LayerSpec], name: str = "") -> Coverage:
    flags = tuple(layer_covered(layer, cfg.rows, cfg.cols) for layer in network)
    return Coverage(name, cfg.rows, cfg.cols, flags)


def coverage_csv_header() -> str:
    return "network,array,layers_total,layers_covered"


def coverage_csv_row(cov: Coverage) -> str:
    return f"{cov.network},{cov.rows}x{cov.cols},{cov.layers_total},{cov.layers_covered}"
