"""Spare assignment for RR, CR, DR and HyCA, column degradation, reliability metrics.

All schemes share one degradation rule: every column holding an unrepaired
fault is discarded, and since the buffers sit at the left edge only the
leftmost run of intact columns stays connected. The surviving array is
therefore ``rows x min(col of unrepaired faults)``.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import kernels
from .config import ArrayConfig, dppu_layout
from .faults import FaultMap, FaultModelParams, gen_faults

RR, CR, DR, HYCA = "rr", "cr", "dr", "hyca"
SCHEMES = (RR, CR, DR, HYCA)


@dataclass(frozen=True)
class RepairScheme:
    kind: str
    spares: Optional[int] = None

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in SCHEMES:
            raise ValueError(f"unknown repair scheme {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.spares is not None and self.spares < 0:
            raise ValueError("spares must be >= 0")

    @classmethod
    def default(cls, kind: str, cfg: ArrayConfig) -> "RepairScheme":
        kind = kind.lower()
        spares = {RR: cfg.rows, CR: cfg.cols, DR: min(cfg.rows, cfg.cols),
                  HYCA: cfg.dppu_size}.get(kind)
        return cls(kind, spares)


@dataclass(frozen=True)
class RepairPlan:
    scheme: str
    rows: int
    cols: int
    repaired: dict
    unrepaired: frozenset
    surviving_cols: int
    fully_functional: bool

    @property
    def faults(self) -> frozenset:
        return frozenset(self.repaired) | self.unrepaired

    def dumps(self) -> str:
        lines = [f"scheme {self.scheme}",
                 f"array {self.rows}x{self.cols}",
                 f"faults {len(self.repaired) + len(self.unrepaired)}",
                 f"fully_functional {str(self.fully_functional).lower()}",
                 f"surviving {self.rows}x{self.surviving_cols}"]
        for p in sorted(self.repaired, key=lambda q: (q.col, q.row)):
            spare = ":".join(str(x) for x in self.repaired[p])
            lines.append(f"repaired {p.row} {p.col} -> {spare}")
        for p in sorted(self.unrepaired, key=lambda q: (q.col, q.row)):
            lines.append(f"unrepaired {p.row} {p.col}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ReliabilityMetrics:
    fully_functional_probability: float
    normalized_computing_power: float
    trials: int
    base_seed: int
    surviving_histogram: dict = field(default_factory=dict, compare=False)


def _as_fault_map(cfg: ArrayConfig, faults) -> FaultMap:
    if isinstance(faults, FaultMap):
        return faults
    return FaultMap.from_coords(cfg, faults)


# -- scheme kernels on (col,row)-sorted arrays --------------------------------

def dr_candidates(rows: int, cols: int, fr: np.ndarray, fc: np.ndarray):
    """Spare candidates per fault for diagonal redundancy.

    The array is cut into square tiles of side ``min(rows, cols)`` along its
    long axis; a short remainder tile keeps a truncated diagonal. Spare ``i``
    of a tile serves local row ``i`` or local column ``i``. Returns
    ``(cand0, cand1, n_spares)`` with -1 marking a missing candidate.
    """
    side = min(rows, cols)
    long_len = max(rows, cols)
    n_tiles = math.ceil(long_len / side)
    if rows <= cols:
        tile, lr, lc = fc // side, fr, fc % side
    else:
        tile, lr, lc = fr // side, fr % side, fc
    extent = np.minimum(side, long_len - tile * side)
    base = tile * side
    cand0 = np.where(lr < extent, base + lr, -1).astype(np.int64)
    cand1 = np.where((lc < extent) & (lc != lr), base + lc, -1).astype(np.int64)
    return cand0, cand1, n_tiles * side


def repaired_flags(scheme: str, cfg: ArrayConfig, fr, fc, capacity: int = 0,
                   backend=kernels):
    """Per-fault repaired flags plus the spare index used (-1 if none)."""
    n = len(fr)
    if scheme == RR:
        ok = backend.rr_repair(fr, fc, cfg.rows)
        return ok, np.where(ok == 1, fr, -1)
    if scheme == CR:
        ok = backend.cr_repair(fr, fc, cfg.cols)
        return ok, np.where(ok == 1, fc, -1)
    if scheme == DR:
        c0, c1, n_spares = dr_candidates(cfg.rows, cfg.cols, fr, fc)
        assign = backend.augment_match(c0, c1, n_spares)
        return (assign >= 0).astype(np.uint8), assign
    if scheme == HYCA:
        k = min(n, max(0, int(capacity)))
        ok = np.zeros(n, dtype=np.uint8)
        ok[:k] = 1
        return ok, np.where(ok == 1, np.arange(n), -1)
    raise ValueError(f"unknown repair scheme {scheme!r}")


def surviving_cols(scheme: str, cfg: ArrayConfig, fr, fc, capacity: int = 0,
                   backend=kernels) -> int:
    if len(fr) == 0:
        return cfg.cols
    if scheme == HYCA:
        # faults are already in repair priority order
        return cfg.cols if len(fc) <= capacity else int(fc[max(0, int(capacity))])
    ok, _ = repaired_flags(scheme, cfg, fr, fc, capacity, backend)
    return int(backend.surviving_prefix(fc, ok, cfg.cols))


def _build_plan(scheme: str, cfg: ArrayConfig, fm: FaultMap, capacity: int = 0) -> RepairPlan:
    fr, fc = fm.arrays()
    ok, spare = repaired_flags(scheme, cfg, fr, fc, capacity)
    order = fm.ordered()
    repaired, unrepaired = {}, set()
    for p, good, s in zip(order, ok, spare):
        if good:
            repaired[p] = _spare_id(scheme, cfg, int(s))
        else:
            unrepaired.add(p)
    surv = min((p.col for p in unrepaired), default=cfg.cols)
    return RepairPlan(scheme, cfg.rows, cfg.cols, repaired, frozenset(unrepaired),
                      surv, not unrepaired)


def _spare_id(scheme: str, cfg: ArrayConfig, s: int) -> tuple:
    if scheme == DR:
        side = min(cfg.rows, cfg.cols)
        return (DR, s // side, s % side)
    if scheme == RR:
        return (RR, s)
    if scheme == CR:
        return (CR, s)
    return ("dppu", s)


def repair_rr(cfg: ArrayConfig, faults) -> RepairPlan:
    """Row redundancy: one spare per row, usable only when the row holds a single fault."""
    return _build_plan(RR, cfg, _as_fault_map(cfg, faults))


def repair_cr(cfg: ArrayConfig, faults) -> RepairPlan:
    """Column redundancy: one spare per column, taken by the topmost fault."""
    return _build_plan(CR, cfg, _as_fault_map(cfg, faults))


def repair_dr(cfg: ArrayConfig, faults) -> RepairPlan:
    """Diagonal redundancy solved as a maximum bipartite matching of faults to spares.

    Faults are matched in (col, row) order by augmenting paths, which gives a
    maximum matching that also repairs the longest matchable left prefix.
    """
    return _build_plan(DR, cfg, _as_fault_map(cfg, faults))


def repair_hyca(cfg: ArrayConfig, faults, dppu_capacity: int) -> RepairPlan:
    """DPPU recomputation: the leftmost ``dppu_capacity`` faults are repaired."""
    return _build_plan(HYCA, cfg, _as_fault_map(cfg, faults), dppu_capacity)


def repair(scheme, cfg: ArrayConfig, faults, dppu_capacity: Optional[int] = None) -> RepairPlan:
    kind = scheme.kind if isinstance(scheme, RepairScheme) else str(scheme).lower()
    fm = _as_fault_map(cfg, faults)
    if kind == HYCA:
        if dppu_capacity is None:
            from .dataflow import effective_repair_capacity
            dppu_capacity = effective_repair_capacity(cfg, cfg.dppu_structure, fm)
        return repair_hyca(cfg, fm, dppu_capacity)
    return {RR: repair_rr, CR: repair_cr, DR: repair_dr}[kind](cfg, fm)


def dppu_effective_capacity(cfg: ArrayConfig, fault_map: Optional[FaultMap] = None) -> int:
    """PEs' worth of recompute capacity left after DPPU-internal faults.

    A spare ring tolerates one faulty unit; a compute group is lost as soon
    as any of its rings holds two.
    """
    mult = fault_map.dppu_mult_faults if fault_map is not None else frozenset()
    adder = fault_map.dppu_adder_faults if fault_map is not None else frozenset()
    capacity = 0
    for group in dppu_layout(cfg):
        alive = all(sum(u in mult for u in ring) <= 1 for ring in group.mult_rings) and \
            all(sum(u in adder for u in ring) <= 1 for ring in group.adder_rings)
        if alive:
            capacity += group.size
    return capacity


def degrade(cfg: ArrayConfig, plan: RepairPlan):
    """Surviving ``(rows, cols)`` after column-granularity degradation."""
    surv = min((p.col for p in plan.unrepaired), default=cfg.cols)
    return cfg.rows, surv


# -- Monte-Carlo evaluation ---------------------------------------------------

def trial_outcome(cfg: ArrayConfig, params: FaultModelParams, seed: int, schemes: Iterable[str],
                  structure: Optional[str] = None, reserved: int = 0) -> dict:
    """Surviving columns per scheme for the fault map drawn from ``seed``.

    All schemes see the same fault map, so comparisons across schemes are
    paired. Fully functional means surviving == cols. ``reserved`` PEs of
    DPPU capacity are withheld from repair (a group busy with detection).
    """
    from .dataflow import effective_repair_capacity

    fm = gen_faults(cfg, params, seed)
    fr, fc = fm.arrays()
    out = {}
    for scheme in schemes:
        cap = 0
        if scheme == HYCA:
            cap = max(0, effective_repair_capacity(cfg, structure or cfg.dppu_structure, fm) - reserved)
        out[scheme] = surviving_cols(scheme, cfg, fr, fc, cap)
    return out


def _chunk_outcomes(args):
    cfg, params, seeds, schemes, structure, reserved = args
    return [trial_outcome(cfg, params, s, schemes, structure, reserved) for s in seeds]


def run_trials(cfg: ArrayConfig, params: FaultModelParams, trials: int, base_seed: int,
               schemes: Iterable[str], structure: Optional[str] = None, workers: int = 1,
               reserved: int = 0) -> list:
    """Per-trial outcomes, trial ``i`` seeded with ``base_seed + i``."""
    schemes = tuple(schemes)
    seeds = [base_seed + i for i in range(trials)]
    if workers <= 1 or trials < 64:
        return _chunk_outcomes((cfg, params, seeds, schemes, structure, reserved))
    from concurrent.futures import ProcessPoolExecutor

    step = math.ceil(trials / (workers * 4))
    chunks = [(cfg, params, seeds[i:i + step], schemes, structure, reserved)
              for i in range(0, trials, step)]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_chunk_outcomes, chunks):
            out.extend(part)
    return out


def metrics_from_surviving(cfg: ArrayConfig, surviving: Iterable[int], base_seed: int) -> ReliabilityMetrics:
    hist = Counter(int(s) for s in surviving)
    trials = sum(hist.values())
    if trials < 1:
        raise ValueError("trials must be >= 1")
    full = hist.get(cfg.cols, 0)
    # integer sums keep aggregation exact and order-independent
    col_sum = sum(k * v for k, v in hist.items())
    return ReliabilityMetrics(full / trials, col_sum / (trials * cfg.cols), trials, base_seed,
                              dict(sorted(hist.items())))


def evaluate_reliability(cfg: ArrayConfig, scheme, params: FaultModelParams, trials: int,
                         base_seed: int = 0, workers: int = 1,
                         structure: Optional[str] = None, reserved: int = 0) -> ReliabilityMetrics:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    kind = scheme.kind if isinstance(scheme, RepairScheme) else str(scheme).lower()
    outcomes = run_trials(cfg, params, trials, base_seed, (kind,), structure, workers, reserved)
    return metrics_from_surviving(cfg, (o[kind] for o in outcomes), base_seed)


def reliability_csv_header() -> str:
    return "scheme,model,per,trials,fully_functional_prob,norm_power,base_seed"


def reliability_csv_row(scheme: str, model: str, per: float, m: ReliabilityMetrics) -> str:
    return (f"{scheme},{model},{per:.6g},{m.trials},{m.fully_functional_probability:.6f},"
            f"{m.normalized_computing_power:.6f},{m.base_seed}")
