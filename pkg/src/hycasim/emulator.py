"""Bit-accurate output-stationary convolution on a faulty array.

Fixed-point semantics: 8-bit signed inputs and weights, 16-bit signed
products, 32-bit two's-complement accumulation that wraps. Output pixel
``p`` (row-major over the output plane) runs on array row ``p % rows``;
output channel ``m`` runs on column ``m % cols``. A faulty PE's stuck bits
are applied on every write to each of its four registers.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Optional

import numpy as np

from . import kernels
from .config import ArrayConfig

REGISTERS = ("input", "weight", "intermediate", "accumulator")
REGISTER_BITS = (8, 8, 16, 32)
_FULL = tuple((1 << b) - 1 for b in REGISTER_BITS)


def _wrap32(v: int) -> int:
    v &= 0xFFFFFFFF
    return v - (1 << 32) if v & 0x80000000 else v


@dataclass(frozen=True)
class StuckMask:
    """Per-register AND/OR masks; ``(v & and) | or`` models stuck-at-0/1 bits."""

    and_masks: tuple = _FULL
    or_masks: tuple = (0, 0, 0, 0)

    @classmethod
    def from_bits(cls, stuck: Iterable) -> "StuckMask":
        """``stuck`` holds ``(register, bit, value)`` triples; register by name or index."""
        and_m = list(_FULL)
        or_m = [0, 0, 0, 0]
        seen = {}
        for reg, bit, value in stuck:
            i = REGISTERS.index(reg) if isinstance(reg, str) else int(reg)
            if not 0 <= bit < REGISTER_BITS[i]:
                raise ValueError(f"bit {bit} outside the {REGISTER_BITS[i]}-bit {REGISTERS[i]} register")
            if seen.get((i, bit), value) != value:
                raise ValueError(f"{REGISTERS[i]} bit {bit} stuck at both 0 and 1")
            seen[(i, bit)] = value
            if value:
                or_m[i] |= 1 << bit
            else:
                and_m[i] &= ~(1 << bit) & _FULL[i]
        return cls(tuple(and_m), tuple(or_m))

    @property
    def is_identity(self) -> bool:
        return self.and_masks == _FULL and self.or_masks == (0, 0, 0, 0)


IDENTITY = StuckMask()


def random_stuck_mask(rng: np.random.Generator, n_bits: int = 1) -> StuckMask:
    """Stick ``n_bits`` distinct register bits of one PE at random values."""
    total = sum(REGISTER_BITS)
    picks = rng.choice(total, size=n_bits, replace=False)
    values = rng.integers(0, 2, size=n_bits)
    bits = []
    for flat, v in zip(picks, values):
        flat = int(flat)
        for i, width in enumerate(REGISTER_BITS):
            if flat < width:
                bits.append((i, flat, int(v)))
                break
            flat -= width
    return StuckMask.from_bits(bits)


# -- reference convolution ------------------------------------------------------

def _check_shapes(inp: np.ndarray, weights: np.ndarray, stride: int):
    if inp.ndim != 3 or weights.ndim != 4:
        raise ValueError("input must be (C,H,W) and weights (M,C,k,k)")
    if weights.shape[1] != inp.shape[0]:
        raise ValueError(f"weights expect {weights.shape[1]} channels, input has {inp.shape[0]}")
    if weights.shape[2] != weights.shape[3]:
        raise ValueError("kernels must be square")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    k = weights.shape[2]
    if inp.shape[1] < k or inp.shape[2] < k:
        raise ValueError("kernel larger than input")


def output_shape(inp: np.ndarray, weights: np.ndarray, stride: int = 1):
    k = weights.shape[2]
    return (weights.shape[0], (inp.shape[1] - k) // stride + 1, (inp.shape[2] - k) // stride + 1)


def golden_conv(inp: np.ndarray, weights: np.ndarray, stride: int = 1) -> np.ndarray:
    """Direct nested-loop convolution; ground truth for equivalence checks."""
    _check_shapes(inp, weights, stride)
    M, OH, OW = output_shape(inp, weights, stride)
    C, k = inp.shape[0], weights.shape[2]
    x = inp.tolist()
    w = weights.tolist()
    out = np.empty((M, OH, OW), dtype=np.int32)
    for m in range(M):
        for oy in range(OH):
            for ox in range(OW):
                acc = 0
                for c in range(C):
                    for ky in range(k):
                        row = x[c][oy * stride + ky]
                        wrow = w[m][c][ky]
                        for kx in range(k):
                            acc += row[ox * stride + kx] * wrow[kx]
                out[m, oy, ox] = _wrap32(acc)
    return out


def im2col(inp: np.ndarray, k: int, stride: int = 1) -> np.ndarray:
    """Operand matrix (pixels, C*k*k) in the MAC order (channel, ky, kx)."""
    C, H, W = inp.shape
    OH, OW = (H - k) // stride + 1, (W - k) // stride + 1
    cols = np.empty((OH * OW, C * k * k), dtype=np.int8)
    for oy in range(OH):
        for ox in range(OW):
            patch = inp[:, oy * stride:oy * stride + k, ox * stride:ox * stride + k]
            cols[oy * OW + ox] = patch.reshape(-1)
    return cols


# -- array emulation ------------------------------------------------------------

@dataclass(frozen=True)
class Attribution:
    """Which PE produced each output element: ``pe[m, oy, ox] = (row, col)``."""

    rows: int
    cols: int
    pe: np.ndarray

    def owned_by(self, coords) -> np.ndarray:
        """Boolean mask of outputs produced by any PE in ``coords``."""
        sel = np.zeros((self.rows, self.cols), dtype=bool)
        for r, c in coords:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise ValueError(f"PE ({r},{c}) outside the {self.rows}x{self.cols} array")
            sel[r, c] = True
        return sel[self.pe[..., 0], self.pe[..., 1]]


def attribution(cfg: ArrayConfig, out_shape) -> Attribution:
    M, OH, OW = out_shape
    p = np.arange(OH * OW).reshape(OH, OW)
    pe = np.empty((M, OH, OW, 2), dtype=np.int64)
    pe[..., 0] = (p % cfg.rows)[None, :, :]
    pe[..., 1] = (np.arange(M) % cfg.cols)[:, None, None]
    return Attribution(cfg.rows, cfg.cols, pe)


def mask_tables(cfg: ArrayConfig, stuck_masks: Optional[Dict] = None):
    and_m = np.empty((cfg.rows, cfg.cols, 4), dtype=np.uint32)
    and_m[:] = np.array(_FULL, dtype=np.uint32)
    or_m = np.zeros((cfg.rows, cfg.cols, 4), dtype=np.uint32)
    for coord, mask in (stuck_masks or {}).items():
        r, c = coord
        if not cfg.contains((r, c)):
            raise ValueError(f"stuck mask for PE ({r},{c}) outside the array")
        and_m[r, c] = mask.and_masks
        or_m[r, c] = mask.or_masks
    return and_m, or_m


@dataclass
class ConvResult:
    output: np.ndarray
    attribution: Attribution


def array_conv(inp: np.ndarray, weights: np.ndarray, cfg: ArrayConfig,
               stuck_masks: Optional[Dict] = None, stride: int = 1,
               backend=None) -> ConvResult:
    """Run the convolution through the owning PE of every output."""
    _check_shapes(inp, weights, stride)
    if cfg.pe_bits != sum(REGISTER_BITS):
        raise ValueError("the emulator models 8/8/16/32-bit PE registers only")
    k = weights.shape[2]
    shape = output_shape(inp, weights, stride)
    X = im2col(np.asarray(inp, dtype=np.int8), k, stride)
    W = np.ascontiguousarray(np.asarray(weights, dtype=np.int8).reshape(shape[0], -1))
    and_m, or_m = mask_tables(cfg, stuck_masks)
    impl = backend or kernels
    out = impl.conv_kernel(X, W, and_m, or_m, cfg.rows, cfg.cols)
    return ConvResult(out.reshape(shape), attribution(cfg, shape))


def clean_dot(inp: np.ndarray, weights: np.ndarray, m: int, oy: int, ox: int, stride: int = 1) -> int:
    k = weights.shape[2]
    patch = inp[:, oy * stride:oy * stride + k, ox * stride:ox * stride + k].astype(np.int64)
    return _wrap32(int((patch * weights[m].astype(np.int64)).sum()))


def hyca_recover(faulty_output: np.ndarray, attr: Attribution, fpt: Iterable,
                 inp: np.ndarray, weights: np.ndarray, stride: int = 1) -> np.ndarray:
    """Overwrite every output produced by a PE listed in ``fpt`` with a clean recompute."""
    fpt = list(fpt)
    out = np.array(faulty_output, dtype=np.int32, copy=True)
    if not fpt:
        return out
    sel = attr.owned_by(fpt)
    for m, oy, ox in zip(*np.nonzero(sel)):
        out[m, oy, ox] = clean_dot(inp, weights, int(m), int(oy), int(ox), stride)
    return out


def diff_coords(a: np.ndarray, b: np.ndarray) -> list:
    return [tuple(int(v) for v in idx) for idx in zip(*np.nonzero(a != b))]


# -- state seen by the detection scan -------------------------------------------

@dataclass
class ArrayState:
    """A layer in flight on the array, exposing per-PE accumulator snapshots."""

    cfg: ArrayConfig
    inp: np.ndarray
    weights: np.ndarray
    stuck_masks: Dict
    stride: int = 1

    def __post_init__(self):
        _check_shapes(self.inp, self.weights, self.stride)
        k = self.weights.shape[2]
        self._shape = output_shape(self.inp, self.weights, self.stride)
        self._X = im2col(np.asarray(self.inp, dtype=np.int8), k, self.stride)
        self._W = np.asarray(self.weights, dtype=np.int8).reshape(self._shape[0], -1)
        self._and, self._or = mask_tables(self.cfg, self.stuck_masks)

    @property
    def macs_per_output(self) -> int:
        return self._X.shape[1]

    def operands(self, row: int, col: int):
        """Operand streams of the first output PE(row, col) computes, or None if idle."""
        M, OH, OW = self._shape
        if row >= OH * OW or col >= M:
            return None
        return self._X[row], self._W[col]

    def accumulator(self, row: int, col: int, n_steps: int) -> int:
        ops = self.operands(row, col)
        if ops is None:
            x = w = np.zeros(n_steps, dtype=np.int8)
        else:
            x, w = ops
        return kernels.mac_accumulate(np.ascontiguousarray(x), np.ascontiguousarray(w),
                                      self._and[row, col], self._or[row, col], n_steps)

    def clean_partial(self, row: int, col: int, start: int, stop: int) -> int:
        ops = self.operands(row, col)
        if ops is None:
            return 0
        x, w = ops
        return _wrap32(int((x[start:stop].astype(np.int64) * w[start:stop].astype(np.int64)).sum()))


# -- tensor files ----------------------------------------------------------------

_DTYPES = {1: np.dtype("<i1"), 4: np.dtype("<i4")}


def save_tensor(path, arr: np.ndarray) -> None:
    """Flat little-endian data after a 3 x int32 shape header.

    4-D weight tensors (M, C, k, k) are stored as (M, C, k*k).
    """
    arr = np.asarray(arr)
    if arr.ndim == 4:
        arr = arr.reshape(arr.shape[0], arr.shape[1], -1)
    if arr.ndim != 3:
        raise ValueError("tensor files hold 3-D data")
    if arr.dtype.itemsize not in _DTYPES:
        raise ValueError(f"unsupported dtype {arr.dtype}")
    data = arr.astype(_DTYPES[arr.dtype.itemsize], copy=False)
    Path(path).write_bytes(struct.pack("<3i", *arr.shape) + data.tobytes())


def load_tensor(path, as_weights: bool = False) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise ValueError(f"{path}: truncated header")
    shape = struct.unpack("<3i", raw[:12])
    n = int(np.prod(shape))
    body = raw[12:]
    if n == 0 or len(body) % n or len(body) // n not in _DTYPES:
        raise ValueError(f"{path}: payload does not match shape {shape}")
    arr = np.frombuffer(body, dtype=_DTYPES[len(body) // n]).reshape(shape).copy()
    arr = arr.astype(np.int8 if arr.itemsize == 1 else np.int32)
    if as_weights:
        k = math.isqrt(shape[2])
        if k * k != shape[2]:
            raise ValueError(f"{path}: last dimension {shape[2]} is not a square kernel")
        arr = arr.reshape(shape[0], shape[1], k, k)
    return arr
