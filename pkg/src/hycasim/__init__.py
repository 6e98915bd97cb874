"""Reliability, timing and functional models of a DNN accelerator array
protected by a dot-product recomputation unit (HyCA) and by classical
row, column and diagonal spare schemes."""

__version__ = "0.1.0"

from .config import ArrayConfig, ConfigError, PECoord, derive_sizing  # noqa: E402
from .faults import FaultMap, FaultModelParams, gen_faults, per_from_ber  # noqa: E402
from .repair import RepairPlan, RepairScheme, evaluate_reliability, repair  # noqa: E402

__all__ = [
    "__version__",
    "ArrayConfig",
    "ConfigError",
    "PECoord",
    "derive_sizing",
    "FaultMap",
    "FaultModelParams",
    "gen_faults",
    "per_from_ber",
    "RepairPlan",
    "RepairScheme",
    "evaluate_reliability",
    "repair",
]
