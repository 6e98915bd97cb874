"""Architectural configuration of the computing array and its DPPU.

Everything else in the package derives buffer sizes, fault-unit counts and
timing from an :class:`ArrayConfig`, so it is the single place where the
array shape and register widths live.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

UNIFIED = "unified"
GROUPED = "grouped"
DPPU_STRUCTURES = (UNIFIED, GROUPED)


class ConfigError(ValueError):
    """Raised when a configuration violates one of its invariants."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True, order=True)
class PECoord:
    row: int
    col: int

    def __iter__(self):
        yield self.row
        yield self.col

    def __str__(self):
        return f"({self.row},{self.col})"


@dataclass(frozen=True)
class ArrayConfig:
    rows: int = 32
    cols: int = 32
    input_reg_bits: int = 8
    weight_reg_bits: int = 8
    intermediate_bits: int = 16
    accumulator_bits: int = 32
    dppu_size: int = 32
    dppu_group_size: int = 8
    dppu_structure: str = GROUPED
    mult_ring_arity: int = 4
    adder_ring_arity: int = 3
    delay_d: Optional[int] = None  # None -> cols
    accum_width_w: int = 4

    def __post_init__(self):
        if self.delay_d is None:
            object.__setattr__(self, "delay_d", self.cols)

    @property
    def pe_bits(self) -> int:
        return (self.input_reg_bits + self.weight_reg_bits
                + self.intermediate_bits + self.accumulator_bits)

    @property
    def n_pes(self) -> int:
        return self.rows * self.cols

    @property
    def shape(self):
        return (self.rows, self.cols)

    def replace(self, **changes) -> "ArrayConfig":
        # delay_d follows cols unless it was set explicitly
        if "cols" in changes and "delay_d" not in changes and self.delay_d == self.cols:
            changes["delay_d"] = None
        return dataclasses.replace(self, **changes)

    def contains(self, coord) -> bool:
        r, c = coord
        return 0 <= r < self.rows and 0 <= c < self.cols


@dataclass(frozen=True)
class DerivedSizing:
    wrf_irf_depth: int
    fpt_entries: int
    fpt_row_bits: int
    fpt_col_bits: int
    clb_bytes: int

    @property
    def fpt_bits_per_entry(self) -> int:
        return self.fpt_row_bits + self.fpt_col_bits

    @property
    def fpt_total_bits(self) -> int:
        return self.fpt_entries * self.fpt_bits_per_entry


def validate_config(cfg: ArrayConfig) -> list:
    """Return every violated invariant of ``cfg`` (empty list when valid)."""
    errors = []
    for name in ("rows", "cols", "dppu_size"):
        if getattr(cfg, name) < 1:
            errors.append(f"{name} must be >= 1")
    if cfg.dppu_group_size < 1:
        errors.append("group size must be >= 1")
    if cfg.mult_ring_arity < 1:
        errors.append("mult_ring_arity must be >= 1")
    if cfg.adder_ring_arity < 1:
        errors.append("adder_ring_arity must be >= 1")
    if cfg.accum_width_w < 1:
        errors.append("accum_width_w must be >= 1")
    for name in ("input_reg_bits", "weight_reg_bits", "intermediate_bits", "accumulator_bits"):
        if getattr(cfg, name) < 1:
            errors.append(f"{name} must be >= 1")
    if cfg.dppu_structure not in DPPU_STRUCTURES:
        errors.append(f"dppu_structure must be one of {', '.join(DPPU_STRUCTURES)}")
    if cfg.delay_d < cfg.cols:
        errors.append("delay_d < cols")
    return errors


def check_config(cfg: ArrayConfig) -> ArrayConfig:
    errors = validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def index_bits(n: int) -> int:
    """Bits needed to address ``n`` items, never less than one."""
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def derive_sizing(cfg: ArrayConfig) -> DerivedSizing:
    check_config(cfg)
    return DerivedSizing(
        wrf_irf_depth=2 * cfg.delay_d * cfg.rows,
        fpt_entries=cfg.dppu_size,
        fpt_row_bits=index_bits(cfg.rows),
        fpt_col_bits=index_bits(cfg.cols),
        clb_bytes=4 * cfg.accum_width_w * cfg.cols,
    )


# -- key=value files ---------------------------------------------------------

def parse_kv_text(text: str, source: str = "<string>") -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment. Values stay strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(ArrayConfig))


def config_from_mapping(values: dict, base: Optional[ArrayConfig] = None) -> ArrayConfig:
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError([f"unknown config key {k!r}" for k in unknown])
    kwargs = {}
    for key, value in values.items():
        if key == "dppu_structure":
            kwargs[key] = str(value).strip().lower()
        elif key == "delay_d" and str(value).strip().lower() in ("", "none", "cols"):
            kwargs[key] = None
        else:
            try:
                kwargs[key] = int(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
    cfg = base.replace(**kwargs) if base is not None else ArrayConfig(**kwargs)
    return check_config(cfg)


def load_config(path: Union[str, Path]) -> ArrayConfig:
    path = Path(path)
    return config_from_mapping(parse_kv_text(path.read_text(), str(path)))


def dump_config(cfg: ArrayConfig) -> str:
    lines = [f"{name}={getattr(cfg, name)}" for name in CONFIG_KEYS]
    return "\n".join(lines) + "\n"


def parse_array(text: str):
    """``"32x16"`` -> ``(32, 16)``."""
    try:
        r, c = text.lower().split("x")
        r, c = int(r), int(c)
    except ValueError:
        raise ConfigError(f"bad array size {text!r}, expected ROWSxCOLS") from None
    if r < 1 or c < 1:
        raise ConfigError(f"bad array size {text!r}")
    return r, c


# -- DPPU internal redundancy layout ------------------------------------------

@dataclass(frozen=True)
class DppuGroup:
    size: int
    mult_rings: tuple  # tuples of unit indices, spare last
    adder_rings: tuple


def _rings(n_primary: int, arity: int, start: int):
    rings = []
    idx = start
    while n_primary > 0:
        take = min(arity, n_primary)
        rings.append(tuple(range(idx, idx + take + 1)))
        idx += take + 1
        n_primary -= take
    return rings, idx


def dppu_layout(cfg: ArrayConfig) -> tuple:
    """Compute groups of the DPPU with their multiplier and adder spare rings.

    Each group owns ``size`` multipliers and a ``size - 1`` adder tree; both
    are cut into rings of ``arity`` primaries plus one spare, the last ring
    possibly shorter. Unit indices run ring by ring across groups.
    """
    groups = []
    mult_idx = adder_idx = 0
    remaining = cfg.dppu_size
    while remaining > 0:
        size = min(cfg.dppu_group_size, remaining)
        mrings, mult_idx = _rings(size, cfg.mult_ring_arity, mult_idx)
        arings, adder_idx = _rings(size - 1, cfg.adder_ring_arity, adder_idx)
        groups.append(DppuGroup(size, tuple(mrings), tuple(arings)))
        remaining -= size
    return tuple(groups)


def dppu_unit_counts(cfg: ArrayConfig):
    """(multiplier units, adder units), spares included."""
    groups = dppu_layout(cfg)
    n_mult = sum(len(r) for g in groups for r in g.mult_rings)
    n_add = sum(len(r) for g in groups for r in g.adder_rings)
    return n_mult, n_add
