"""Closed-form cycle model for the output-stationary array.

Model of record: a conv layer folds its output pixels over the rows and its
output channels over the columns, every fold runs ``c*k*k`` MAC cycles, and
the pipeline fill/drain of ``R + C`` cycles is paid once per layer. A fully
connected layer uses a single column, with its output neurons folded over
the rows: ``ceil(m/R) * c + R + 1``.
"""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

CONV = "conv"
FC = "fc"
UNUSABLE = math.inf

NETWORK_FILES = {
    "alexnet": "alexnet.csv",
    "vgg16": "vgg16.csv",
    "yolo": "yolov2.csv",
    "resnet18": "resnet18.csv",
}
NETWORK_ALIASES = {"vgg": "vgg16", "resnet": "resnet18", "yolov2": "yolo"}
LAYER_FIELDS = ("name", "kind", "c", "h", "w", "m", "k", "stride")


class LayerSpecError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    """One layer. ``h``/``w`` are the padded input extents."""

    name: str
    kind: str
    c: int
    h: int
    w: int
    m: int
    k: int = 1
    stride: int = 1

    def __post_init__(self):
        if self.kind not in (CONV, FC):
            raise LayerSpecError(f"{self.name}: kind must be conv or fc")
        if min(self.c, self.h, self.w, self.m, self.k, self.stride) < 1:
            raise LayerSpecError(f"{self.name}: shape parameters must be >= 1")
        if self.kind == FC and (self.k != 1 or self.h != 1 or self.w != 1):
            raise LayerSpecError(f"{self.name}: fc layers take k=1, h=w=1")
        if self.oh < 1 or self.ow < 1:
            raise LayerSpecError(f"{self.name}: degenerate output {self.oh}x{self.ow}")

    @property
    def oh(self) -> int:
        return (self.h - self.k) // self.stride + 1

    @property
    def ow(self) -> int:
        return (self.w - self.k) // self.stride + 1

    @property
    def macs_per_output(self) -> int:
        return self.c * self.k * self.k

    @classmethod
    def conv(cls, name, c, h, w, m, k, stride=1):
        return cls(name, CONV, c, h, w, m, k, stride)

    @classmethod
    def fc(cls, name, c, m):
        return cls(name, FC, c, 1, 1, m, 1, 1)


def layer_cycles(layer: LayerSpec, rows: int, cols: int) -> int:
    if rows < 1 or cols < 1:
        raise ValueError("array dimensions must be >= 1")
    if layer.kind == FC:
        return math.ceil(layer.m / rows) * layer.c + rows + 1
    folds = math.ceil(layer.oh * layer.ow / rows) * math.ceil(layer.m / cols)
    return folds * layer.macs_per_output + rows + cols


# -- network ingestion --------------------------------------------------------

def parse_network_csv(text: str, source: str = "<string>") -> list:
    lines = [ln for ln in text.splitlines()
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise LayerSpecError(f"{source}: empty network file")
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    if tuple(header) != LAYER_FIELDS:
        raise LayerSpecError(f"{source}: header must be {','.join(LAYER_FIELDS)}")
    layers = []
    for i, row in enumerate(reader, 2):
        if len(row) != len(LAYER_FIELDS):
            raise LayerSpecError(f"{source}: row {i} has {len(row)} fields")
        name, kind = row[0].strip(), row[1].strip().lower()
        try:
            nums = [int(v) for v in row[2:]]
        except ValueError:
            raise LayerSpecError(f"{source}: row {i} has a non-integer field") from None
        layers.append(LayerSpec(name, kind, *nums))
    return layers


def load_network(name_or_path) -> list:
    """Load a shipped benchmark by name, or any network CSV by path."""
    key = str(name_or_path).lower()
    key = NETWORK_ALIASES.get(key, key)
    if key in NETWORK_FILES:
        text = resources.files("hycasim.data.networks").joinpath(NETWORK_FILES[key]).read_text()
        return parse_network_csv(text, NETWORK_FILES[key])
    path = Path(name_or_path)
    return parse_network_csv(path.read_text(), str(path))


def network_name(name_or_path) -> str:
    key = str(name_or_path).lower()
    key = NETWORK_ALIASES.get(key, key)
    return key if key in NETWORK_FILES else Path(name_or_path).stem


def benchmark_networks() -> dict:
    return {name: load_network(name) for name in NETWORK_FILES}


# -- whole-network performance ------------------------------------------------

@dataclass(frozen=True)
class PerfReport:
    network: str
    rows: int
    cols: int
    layer_cycles: tuple
    total_cycles: float

    @property
    def usable(self) -> bool:
        return self.total_cycles != UNUSABLE


def network_cycles(network: Sequence[LayerSpec], rows: int, cols: int, name: str = "") -> PerfReport:
    """Total cycles on a ``rows x cols`` surviving array; zero columns is unusable."""
    if rows < 1 or cols < 1:
        return PerfReport(name, rows, cols, (), UNUSABLE)
    per_layer = tuple(layer_cycles(layer, rows, cols) for layer in network)
    return PerfReport(name, rows, cols, per_layer, sum(per_layer))


@dataclass(frozen=True)
class TrialPerf:
    """Performance aggregated over Monte-Carlo trials."""

    mean_cycles: float
    mean_speed: float  # mean of full_array_cycles / cycles, 0 when unusable
    unusable_fraction: float
    trials: int
    unique_dims: int


def aggregate_trials(network: Sequence[LayerSpec], rows: int, full_cols: int,
                     surviving: Iterable[int]) -> TrialPerf:
    """Average performance over trial outcomes, simulating each distinct array once."""
    hist = Counter(int(s) for s in surviving)
    trials = sum(hist.values())
    if trials == 0:
        raise ValueError("no trials")
    full = network_cycles(network, rows, full_cols).total_cycles
    cycles_sum = 0
    speed_sum = 0.0
    unusable = 0
    for cols in sorted(hist):
        count = hist[cols]
        total = network_cycles(network, rows, cols).total_cycles
        if total == UNUSABLE:
            unusable += count
            continue
        cycles_sum += count * total
        speed_sum += count * (full / total)
    mean_cycles = UNUSABLE if unusable else cycles_sum / trials
    return TrialPerf(mean_cycles, speed_sum / trials, unusable / trials, trials, len(hist))


def normalized_performance(reports: dict, baseline: str = "rr") -> dict:
    """Mean speed of each scheme divided by the baseline scheme's mean speed.

    ``reports`` maps scheme -> :class:`TrialPerf` built from the same fault
    seeds. A baseline with zero mean speed yields ``inf`` for any usable
    scheme and 1.0 for itself.
    """
    base = reports[baseline].mean_speed
    out = {}
    for scheme, rep in reports.items():
        if base > 0:
            out[scheme] = rep.mean_speed / base
        else:
            out[scheme] = 1.0 if rep.mean_speed == 0 else math.inf
    return out


def perf_csv_header() -> str:
    return "network,scheme,per,mean_cycles,normalized"


def perf_csv_row(network: str, scheme: str, per: float, rep: TrialPerf, ratio: float) -> str:
    mc = "inf" if rep.mean_cycles == UNUSABLE else f"{rep.mean_cycles:.3f}"
    return f"{network},{scheme},{per:.6g},{mc},{ratio:.6f}"
