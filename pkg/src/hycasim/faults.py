"""Persistent PE fault generation.

Seed lineage: a fault map built from integer ``seed`` draws its array faults
from ``SeedSequence([seed, 0])`` and its DPPU unit faults from
``SeedSequence([seed, 1])``. Harness trials use ``seed = base_seed + trial``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import kernels
from .config import ArrayConfig, ConfigError, PECoord, check_config, dppu_unit_counts

RANDOM = "random"
CLUSTERED = "clustered"
FAULT_MODELS = (RANDOM, CLUSTERED)

ARRAY_STREAM = 0
DPPU_STREAM = 1
CLUSTER_ATTEMPTS = 64


def per_from_ber(ber: float, pe_bits: int = 64) -> float:
    """PE error rate when each of ``pe_bits`` register bits fails independently."""
    if not 0.0 <= ber <= 1.0 or math.isnan(ber):
        raise ValueError(f"ber must lie in [0, 1], got {ber!r}")
    if pe_bits < 1:
        raise ValueError(f"pe_bits must be >= 1, got {pe_bits!r}")
    if ber == 1.0:
        return 1.0
    return -math.expm1(pe_bits * math.log1p(-ber))


def ber_from_per(per: float, pe_bits: int = 64) -> float:
    if not 0.0 <= per <= 1.0 or math.isnan(per):
        raise ValueError(f"per must lie in [0, 1], got {per!r}")
    if per == 1.0:
        return 1.0
    return -math.expm1(math.log1p(-per) / pe_bits)


def unit_fault_probability(cfg: ArrayConfig, per: float, unit_bits: int) -> float:
    """Fault probability of a DPPU unit holding ``unit_bits`` of state at the same BER."""
    return per_from_ber(ber_from_per(per, cfg.pe_bits), unit_bits)


def multiplier_bits(cfg: ArrayConfig) -> int:
    return cfg.input_reg_bits + cfg.weight_reg_bits + cfg.intermediate_bits


def adder_bits(cfg: ArrayConfig) -> int:
    return cfg.accumulator_bits


@dataclass(frozen=True)
class FaultModelParams:
    model: str = RANDOM
    per: float = 0.0
    cluster_sigma: float = 2.0
    mean_cluster_size: float = 4.0
    inject_dppu: bool = True

    def __post_init__(self):
        errors = []
        if self.model not in FAULT_MODELS:
            errors.append(f"model must be one of {', '.join(FAULT_MODELS)}")
        if not 0.0 <= self.per <= 1.0:
            errors.append("per must lie in [0, 1]")
        if not self.cluster_sigma > 0:
            errors.append("cluster_sigma must be > 0")
        if not self.mean_cluster_size >= 1:
            errors.append("mean_cluster_size must be >= 1")
        if errors:
            raise ConfigError(errors)


@dataclass(frozen=True)
class FaultMap:
    rows: int
    cols: int
    array_faults: frozenset = frozenset()
    dppu_mult_faults: frozenset = frozenset()
    dppu_adder_faults: frozenset = frozenset()
    seed: Optional[int] = None
    _sorted: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        coords = frozenset(PECoord(int(r), int(c)) for r, c in self.array_faults)
        bad = [p for p in coords if not (0 <= p.row < self.rows and 0 <= p.col < self.cols)]
        if bad:
            raise ValueError(f"fault coordinates out of bounds: {sorted(bad)}")
        object.__setattr__(self, "array_faults", coords)
        object.__setattr__(self, "dppu_mult_faults", frozenset(int(i) for i in self.dppu_mult_faults))
        object.__setattr__(self, "dppu_adder_faults", frozenset(int(i) for i in self.dppu_adder_faults))
        order = sorted(coords, key=lambda p: (p.col, p.row))
        fr = np.array([p.row for p in order], dtype=np.int64)
        fc = np.array([p.col for p in order], dtype=np.int64)
        object.__setattr__(self, "_sorted", (tuple(order), fr, fc))

    @classmethod
    def from_coords(cls, cfg: ArrayConfig, coords: Iterable, **kw) -> "FaultMap":
        return cls(cfg.rows, cfg.cols, frozenset(PECoord(*p) for p in coords), **kw)

    @property
    def count(self) -> int:
        return len(self.array_faults)

    def ordered(self) -> tuple:
        """Array faults in (col, row) ascending order, the repair priority order."""
        return self._sorted[0]

    def arrays(self):
        """Row and column index arrays in (col, row) order."""
        return self._sorted[1], self._sorted[2]

    def with_array_faults(self, coords) -> "FaultMap":
        return FaultMap(self.rows, self.cols, frozenset(PECoord(*p) for p in coords),
                        self.dppu_mult_faults, self.dppu_adder_faults, self.seed)

    def without_dppu_faults(self) -> "FaultMap":
        return FaultMap(self.rows, self.cols, self.array_faults, seed=self.seed)

    # -- text format --------------------------------------------------------

    def dumps(self) -> str:
        lines = [f"{self.rows} {self.cols}"]
        if self.seed is not None:
            lines.append(f"# seed={self.seed}")
        lines += [f"{p.row} {p.col}" for p in sorted(self.array_faults)]
        lines.append("DPPU_MULT")
        lines += [str(i) for i in sorted(self.dppu_mult_faults)]
        lines.append("DPPU_ADDER")
        lines += [str(i) for i in sorted(self.dppu_adder_faults)]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "FaultMap":
        section = "array"
        header = None
        seed = None
        coords, mult, adder = [], [], []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("seed="):
                    seed = int(body[5:])
                continue
            if header is None:
                parts = line.split()
                if len(parts) != 2:
                    raise ValueError(f"line {lineno}: expected header 'rows cols'")
                header = (int(parts[0]), int(parts[1]))
                continue
            if line == "DPPU_MULT":
                section = "mult"
                continue
            if line == "DPPU_ADDER":
                section = "adder"
                continue
            parts = line.split()
            if section == "array":
                if len(parts) != 2:
                    raise ValueError(f"line {lineno}: expected 'row col'")
                coords.append(PECoord(int(parts[0]), int(parts[1])))
            else:
                if len(parts) != 1:
                    raise ValueError(f"line {lineno}: expected a unit index")
                (mult if section == "mult" else adder).append(int(parts[0]))
        if header is None:
            raise ValueError("empty fault map")
        if len(set(coords)) != len(coords):
            raise ValueError("duplicate fault coordinates")
        return cls(header[0], header[1], frozenset(coords), frozenset(mult), frozenset(adder), seed)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "FaultMap":
        return cls.loads(Path(path).read_text())


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream]))


def _dppu_faults(cfg: ArrayConfig, params: FaultModelParams, seed: int):
    if not params.inject_dppu or params.per == 0.0:
        return frozenset(), frozenset()
    rng = _rng(seed, DPPU_STREAM)
    n_mult, n_add = dppu_unit_counts(cfg)
    p_mult = unit_fault_probability(cfg, params.per, multiplier_bits(cfg))
    p_add = unit_fault_probability(cfg, params.per, adder_bits(cfg))
    mult = np.flatnonzero(rng.random(n_mult) < p_mult)
    add = np.flatnonzero(rng.random(n_add) < p_add)
    return frozenset(mult.tolist()), frozenset(add.tolist())


def gen_random_faults(cfg: ArrayConfig, params: FaultModelParams, seed: int) -> FaultMap:
    check_config(cfg)
    rng = _rng(seed, ARRAY_STREAM)
    cells = np.flatnonzero(rng.random(cfg.n_pes) < params.per)
    coords = frozenset(PECoord(int(i) // cfg.cols, int(i) % cfg.cols) for i in cells)
    mult, add = _dppu_faults(cfg, params, seed)
    return FaultMap(cfg.rows, cfg.cols, coords, mult, add, seed)


def cluster_count(n_faults: int, mean_cluster_size: float) -> int:
    # round half up; Python's round() would bank to even
    return max(1, int(math.floor(n_faults / mean_cluster_size + 0.5)))


def clustered_cells(cfg: ArrayConfig, n: int, sigma: float, mean_cluster_size: float,
                    rng: np.random.Generator):
    """Place ``n`` distinct faulty cells around uniformly drawn cluster centres."""
    if n == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    k = cluster_count(n, mean_cluster_size)
    centers = np.stack([rng.integers(0, cfg.rows, size=k),
                        rng.integers(0, cfg.cols, size=k)], axis=1).astype(np.int64)
    center_idx = rng.integers(0, k, size=n).astype(np.int64)
    offsets = np.rint(rng.normal(0.0, sigma, size=(n, CLUSTER_ATTEMPTS, 2))).astype(np.int64)
    fallback_u = rng.random(n)
    return kernels.place_clustered(center_idx, offsets, centers, fallback_u, cfg.rows, cfg.cols)


def gen_clustered_faults(cfg: ArrayConfig, params: FaultModelParams, seed: int) -> FaultMap:
    check_config(cfg)
    rng = _rng(seed, ARRAY_STREAM)
    n = int(rng.binomial(cfg.n_pes, params.per))
    rr, cc = clustered_cells(cfg, n, params.cluster_sigma, params.mean_cluster_size, rng)
    coords = frozenset(PECoord(int(r), int(c)) for r, c in zip(rr, cc))
    mult, add = _dppu_faults(cfg, params, seed)
    return FaultMap(cfg.rows, cfg.cols, coords, mult, add, seed)


def gen_faults(cfg: ArrayConfig, params: FaultModelParams, seed: int) -> FaultMap:
    if params.model == RANDOM:
        return gen_random_faults(cfg, params, seed)
    return gen_clustered_faults(cfg, params, seed)
