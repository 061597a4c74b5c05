"""TTI-level LTE downlink simulator comparing PF, EXP, LOG, and FLS schedulers."""

from .engine import SimConfig, run
from .errors import ConfigError
from .metrics import KpiReport, aggregate, jain_index

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "KpiReport",
    "SimConfig",
    "aggregate",
    "jain_index",
    "run",
    "__version__",
]
