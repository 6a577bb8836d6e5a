"""Training-free adaptive reduced-order model (AROM) for the compressible Euler equations."""

from __future__ import annotations

from ._accel import backend
from .config import RunSetup, dump_config, load_config, parse_config
from .driver import AromConfig, AromResult, HdmResult, RunMetrics, run_arom, run_hdm
from .euler import EulerProblem
from .presets import IMPLOSION, PRESETS, SOD, get_preset

__all__ = [
    "AromConfig",
    "AromResult",
    "EulerProblem",
    "HdmResult",
    "IMPLOSION",
    "PRESETS",
    "RunMetrics",
    "RunSetup",
    "SOD",
    "backend",
    "dump_config",
    "get_preset",
    "load_config",
    "parse_config",
    "run_arom",
    "run_hdm",
]

__version__ = "0.1.0"
