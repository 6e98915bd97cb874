"""Seeded experiment orchestration and report writing.

Seed lineage: trial ``i`` of every sweep cell draws its array faults from
``SeedSequence([base_seed + i, 0])`` and its DPPU faults from
``SeedSequence([base_seed + i, 1])``. Cells therefore share fault maps across
schemes (paired comparison) and, for the random model, faults are nested as
PER grows. Any CSV row can be replayed from ``base_seed`` and its cell key.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional

from . import __version__
from .config import (CONFIG_KEYS, DPPU_STRUCTURES, ArrayConfig, ConfigError, check_config,
                     config_from_mapping, parse_array, parse_kv_text)
from .dataflow import dppu_utilization, effective_repair_capacity
from .detection import coverage_csv_header, coverage_csv_row, detection_coverage
from .faults import CLUSTERED, RANDOM, FaultModelParams
from .perf import (NETWORK_ALIASES, NETWORK_FILES, aggregate_trials, load_network,
                   network_name, normalized_performance, perf_csv_header, perf_csv_row)
from .repair import (HYCA, SCHEMES, metrics_from_surviving, reliability_csv_header,
                     reliability_csv_row, run_trials)

STUDIES = ("reliability", "performance", "detection", "scalability")
DESK_TRIALS = 2000
PAPER_TRIALS = 10000
CONCRETIZATION_NOTE = "model-concretization-dependent"

PLAN_KEYS = (
    "studies", "arrays", "per", "models", "schemes", "trials", "base_seed", "networks",
    "detection_arrays", "dppu_sizes", "dppu_structures", "scalability_per",
    "scalability_models", "cluster_sigma", "mean_cluster_size", "inject_dppu",
    "reserve_detection", "workers",
)


def parse_float_list(text: str) -> tuple:
    """``"0.01,0.02"`` or an inclusive ``start:stop:step`` range."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [Decimal(p.strip()) for p in text.split(":")]
            if len(parts) != 3:
                raise ConfigError(f"range {text!r} must be start:stop:step")
            start, stop, step = parts
            if step <= 0 or stop < start:
                raise ConfigError(f"bad range {text!r}")
            n = int((stop - start) / step + Decimal("1e-9")) + 1
            return tuple(float(start + i * step) for i in range(n))
        return tuple(float(Decimal(p.strip())) for p in text.split(",") if p.strip())
    except InvalidOperation:
        raise ConfigError(f"bad number list {text!r}") from None


def _names(text: str) -> tuple:
    return tuple(p.strip().lower() for p in text.split(",") if p.strip())


def _ints(text: str) -> tuple:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"bad integer list {text!r}") from None


def _bool(key: str, text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {text!r}")


@dataclass(frozen=True)
class ExperimentPlan:
    studies: tuple = STUDIES
    arrays: tuple = ((32, 32),)
    per: tuple = parse_float_list("0.0:0.06:0.0025")
    models: tuple = (RANDOM, CLUSTERED)
    schemes: tuple = SCHEMES
    trials: int = DESK_TRIALS
    base_seed: int = 0
    networks: tuple = tuple(NETWORK_FILES)
    detection_arrays: tuple = ((16, 16), (32, 32), (64, 64), (128, 128))
    dppu_sizes: tuple = (16, 24, 32, 40, 48)
    dppu_structures: tuple = ("grouped", "unified")
    scalability_per: tuple = parse_float_list("0.0:0.06:0.01")
    scalability_models: tuple = (RANDOM,)
    cluster_sigma: float = 2.0
    mean_cluster_size: float = 4.0
    inject_dppu: bool = True
    reserve_detection: bool = False
    workers: int = 1
    base_config: ArrayConfig = field(default_factory=ArrayConfig)

    def __post_init__(self):
        errors = []
        if self.trials < 1:
            errors.append("trials must be >= 1")
        for p in self.per + self.scalability_per:
            if not 0.0 <= p <= 1.0:
                errors.append(f"per value {p} outside [0, 1]")
        for s in self.studies:
            if s not in STUDIES:
                errors.append(f"unknown study {s!r}")
        for s in self.schemes:
            if s not in SCHEMES:
                errors.append(f"unknown scheme {s!r}")
        for m in self.models + self.scalability_models:
            if m not in (RANDOM, CLUSTERED):
                errors.append(f"unknown fault model {m!r}")
        for s in self.dppu_structures:
            if s not in DPPU_STRUCTURES:
                errors.append(f"unknown DPPU structure {s!r}")
        for n in self.networks:
            key = NETWORK_ALIASES.get(n, n)
            if key not in NETWORK_FILES and not Path(n).is_file():
                errors.append(f"network {n!r} is neither shipped nor an existing file")
        if self.workers < 1:
            errors.append("workers must be >= 1")
        if errors:
            raise ConfigError(errors)

    def with_trials(self, trials: int) -> "ExperimentPlan":
        from dataclasses import replace
        return replace(self, trials=trials)

    def fault_params(self, model: str, per: float) -> FaultModelParams:
        return FaultModelParams(model, per, self.cluster_sigma, self.mean_cluster_size,
                                self.inject_dppu)

    def array_config(self, rows: int, cols: int, **changes) -> ArrayConfig:
        return check_config(self.base_config.replace(rows=rows, cols=cols, **changes))

    def dumps(self) -> str:
        """Canonical text form; its hash identifies the plan in manifests."""
        def arr(a):
            return ",".join(f"{r}x{c}" for r, c in a)

        def floats(xs):
            return ",".join(f"{x:.10g}" for x in xs)

        lines = [
            f"studies={','.join(self.studies)}",
            f"arrays={arr(self.arrays)}",
            f"per={floats(self.per)}",
            f"models={','.join(self.models)}",
            f"schemes={','.join(self.schemes)}",
            f"trials={self.trials}",
            f"base_seed={self.base_seed}",
            f"networks={','.join(self.networks)}",
            f"detection_arrays={arr(self.detection_arrays)}",
            f"dppu_sizes={','.join(map(str, self.dppu_sizes))}",
            f"dppu_structures={','.join(self.dppu_structures)}",
            f"scalability_per={floats(self.scalability_per)}",
            f"scalability_models={','.join(self.scalability_models)}",
            f"cluster_sigma={self.cluster_sigma:.10g}",
            f"mean_cluster_size={self.mean_cluster_size:.10g}",
            f"inject_dppu={str(self.inject_dppu).lower()}",
            f"reserve_detection={str(self.reserve_detection).lower()}",
        ]
        for key in CONFIG_KEYS:
            if key not in ("rows", "cols"):
                lines.append(f"{key}={getattr(self.base_config, key)}")
        return "\n".join(lines) + "\n"

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()


def plan_from_mapping(values: dict) -> ExperimentPlan:
    """Build a plan from string values; unknown keys are errors."""
    cfg_values = {}
    kw = {}
    errors = []
    for key, value in values.items():
        if key in ("rows", "cols"):
            errors.append(f"{key}: set array sizes with arrays=ROWSxCOLS[,...]")
        elif key in CONFIG_KEYS:
            cfg_values[key] = value
        elif key not in PLAN_KEYS:
            errors.append(f"unknown plan key {key!r}")
        elif key in ("arrays", "detection_arrays"):
            kw[key] = tuple(parse_array(a) for a in _names(value))
        elif key in ("per", "scalability_per"):
            kw[key] = parse_float_list(value)
        elif key in ("studies", "models", "schemes", "networks", "dppu_structures",
                     "scalability_models"):
            kw[key] = _names(value) if key != "networks" else \
                tuple(p.strip() for p in value.split(",") if p.strip())
        elif key == "dppu_sizes":
            kw[key] = _ints(value)
        elif key in ("trials", "base_seed", "workers"):
            try:
                kw[key] = int(value)
            except ValueError:
                errors.append(f"{key}: expected an integer, got {value!r}")
        elif key in ("cluster_sigma", "mean_cluster_size"):
            try:
                kw[key] = float(value)
            except ValueError:
                errors.append(f"{key}: expected a number, got {value!r}")
        else:
            kw[key] = _bool(key, value)
    if errors:
        raise ConfigError(errors)
    if cfg_values:
        kw["base_config"] = config_from_mapping(cfg_values)
    return ExperimentPlan(**kw)


def load_plan(path) -> ExperimentPlan:
    path = Path(path)
    return plan_from_mapping(parse_kv_text(path.read_text(), str(path)))


# -- reports --------------------------------------------------------------------

@dataclass
class ExperimentReport:
    """CSV files keyed by relative path, plus per-cell failures."""

    files: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def merge(self, other: "ExperimentReport") -> "ExperimentReport":
        self.files.update(other.files)
        self.failures.extend(other.failures)
        self.notes.extend(n for n in other.notes if n not in self.notes)
        return self


def _csv(header: str, rows) -> str:
    return "\n".join([header, *rows]) + "\n"


def _tag(rows: int, cols: int) -> str:
    return f"{rows}x{cols}"


def _detection_reserve(plan: ExperimentPlan, cfg: ArrayConfig) -> int:
    return min(cfg.dppu_group_size, cfg.dppu_size) if plan.reserve_detection else 0


def _sweep_outcomes(plan: ExperimentPlan, cfg: ArrayConfig, model: str, per: float) -> list:
    return run_trials(cfg, plan.fault_params(model, per), plan.trials, plan.base_seed,
                      plan.schemes, workers=plan.workers, reserved=_detection_reserve(plan, cfg))


def _cell_outcomes(plan: ExperimentPlan, report: ExperimentReport):
    """Trial outcomes per (array, model, per), shared by reliability and performance."""
    cache = {}
    for rows, cols in plan.arrays:
        cfg = plan.array_config(rows, cols)
        for model in plan.models:
            for per in plan.per:
                key = (rows, cols, model, per)
                try:
                    cache[key] = _sweep_outcomes(plan, cfg, model, per)
                except Exception as exc:  # a failed cell must not stop the sweep
                    report.failures.append(f"{_tag(rows, cols)},{model},{per:.6g}: {exc}")
    return cache


def run_reliability_sweep(plan: ExperimentPlan, _outcomes: Optional[dict] = None) -> ExperimentReport:
    report = ExperimentReport()
    outcomes = _outcomes if _outcomes is not None else _cell_outcomes(plan, report)
    for rows, cols in plan.arrays:
        cfg = plan.array_config(rows, cols)
        lines = []
        for model in plan.models:
            for per in plan.per:
                cell = outcomes.get((rows, cols, model, per))
                if cell is None:
                    continue
                for scheme in plan.schemes:
                    m = metrics_from_surviving(cfg, (o[scheme] for o in cell), plan.base_seed)
                    lines.append(reliability_csv_row(scheme, model, per, m))
        report.files[f"reliability/reliability_{_tag(rows, cols)}.csv"] = \
            _csv(reliability_csv_header(), lines)
    if CLUSTERED in plan.models:
        report.notes.append(f"clustered-model rows are {CONCRETIZATION_NOTE}")
    return report


def run_perf_sweep(plan: ExperimentPlan, _outcomes: Optional[dict] = None) -> ExperimentReport:
    """Normalized performance per network, RR as the baseline when it is swept."""
    report = ExperimentReport()
    outcomes = _outcomes if _outcomes is not None else _cell_outcomes(plan, report)
    baseline = "rr" if "rr" in plan.schemes else plan.schemes[0]
    networks = [(network_name(n), load_network(n)) for n in plan.networks]
    for rows, cols in plan.arrays:
        for model in plan.models:
            lines = []
            for per in plan.per:
                cell = outcomes.get((rows, cols, model, per))
                if cell is None:
                    continue
                for name, net in networks:
                    reps = {s: aggregate_trials(net, rows, cols, (o[s] for o in cell))
                            for s in plan.schemes}
                    ratios = normalized_performance(reps, baseline)
                    for s in plan.schemes:
                        lines.append(perf_csv_row(name, s, per, reps[s], ratios[s]))
            report.files[f"performance/perf_{_tag(rows, cols)}_{model}.csv"] = \
                _csv(perf_csv_header(), lines)
    report.notes.append(f"performance baseline scheme: {baseline}; ratio of mean speed "
                        "(full-array cycles / cycles, 0 when no column survives)")
    return report


def run_detection_study(plan: ExperimentPlan) -> ExperimentReport:
    report = ExperimentReport()
    lines = []
    for rows, cols in plan.detection_arrays:
        cfg = plan.array_config(rows, cols)
        for n in plan.networks:
            cov = detection_coverage(cfg, load_network(n), network_name(n))
            lines.append(coverage_csv_row(cov))
    report.files["detection/coverage.csv"] = _csv(coverage_csv_header(), lines)
    report.notes.append("newly detected faults are repaired from the next layer on")
    return report


def run_scalability_study(plan: ExperimentPlan) -> ExperimentReport:
    """DPPU size and structure: utilization and HyCA reliability."""
    report = ExperimentReport()
    util_lines = []
    rel_lines = []
    for rows, cols in plan.arrays:
        for size in plan.dppu_sizes:
            for structure in plan.dppu_structures:
                cfg = plan.array_config(rows, cols, dppu_size=size, dppu_structure=structure)
                u = dppu_utilization(cfg)
                util_lines.append(
                    f"{_tag(rows, cols)},{size},{structure},{cfg.dppu_group_size},"
                    f"{float(u.utilization):.6f},{u.cycles_per_fault},"
                    f"{effective_repair_capacity(cfg)}")
                for model in plan.scalability_models:
                    for per in plan.scalability_per:
                        try:
                            out = run_trials(cfg, plan.fault_params(model, per), plan.trials,
                                             plan.base_seed, (HYCA,), workers=plan.workers,
                                             reserved=_detection_reserve(plan, cfg))
                        except Exception as exc:
                            report.failures.append(
                                f"scalability {_tag(rows, cols)},{size},{structure},{model},"
                                f"{per:.6g}: {exc}")
                            continue
                        m = metrics_from_surviving(cfg, (o[HYCA] for o in out), plan.base_seed)
                        rel_lines.append(
                            f"{_tag(rows, cols)},{size},{structure},{model},{per:.6g},{m.trials},"
                            f"{m.fully_functional_probability:.6f},"
                            f"{m.normalized_computing_power:.6f}")
    report.files["scalability/dppu_utilization.csv"] = _csv(
        "array,dppu_size,structure,group_size,utilization,cycles_per_fault,effective_capacity",
        util_lines)
    report.files["scalability/dppu_reliability.csv"] = _csv(
        "array,dppu_size,structure,model,per,trials,fully_functional_prob,norm_power", rel_lines)
    return report


def run_plan(plan: ExperimentPlan) -> ExperimentReport:
    report = ExperimentReport()
    outcomes = None
    if "reliability" in plan.studies or "performance" in plan.studies:
        outcomes = _cell_outcomes(plan, report)
    if "reliability" in plan.studies:
        report.merge(run_reliability_sweep(plan, outcomes))
    if "performance" in plan.studies:
        report.merge(run_perf_sweep(plan, outcomes))
    if "detection" in plan.studies:
        report.merge(run_detection_study(plan))
    if "scalability" in plan.studies:
        report.merge(run_scalability_study(plan))
    return report


def manifest_text(plan: ExperimentPlan, report: ExperimentReport) -> str:
    lines = [
        f"tool=hycasim {__version__}",
        f"config_hash=sha256:{plan.config_hash}",
        f"base_seed={plan.base_seed}",
        f"trials={plan.trials}",
        "seed_lineage=trial i: array faults SeedSequence([base_seed+i, 0]), "
        "DPPU faults SeedSequence([base_seed+i, 1])",
    ]
    lines += [f"note={n}" for n in report.notes]
    lines += [f"failed={f}" for f in report.failures]
    for rel in sorted(report.files):
        digest = hashlib.sha256(report.files[rel].encode()).hexdigest()
        lines.append(f"file={rel} sha256:{digest}")
    lines.append("[plan]")
    return "\n".join(lines) + "\n" + plan.dumps()


def write_report(plan: ExperimentPlan, report: ExperimentReport, out_dir) -> Path:
    out = Path(out_dir)
    for rel, text in sorted(report.files.items()):
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.txt").write_text(manifest_text(plan, report))
    return out
