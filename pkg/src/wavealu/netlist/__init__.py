from .alu import build_alu
from .core import (
    Builder,
    CellSpec,
    ConfigError,
    DelayConfig,
    MissingCostError,
    Netlist,
    arrivals,
    jj_count,
    load_config,
    parse_config,
    validate,
)
from .testbed import build_testbed, frame_bits, frame_layout, frame_word

__all__ = [
    "Builder",
    "CellSpec",
    "ConfigError",
    "DelayConfig",
    "MissingCostError",
    "Netlist",
    "arrivals",
    "build_alu",
    "build_testbed",
    "frame_bits",
    "frame_layout",
    "frame_word",
    "jj_count",
    "load_config",
    "parse_config",
    "validate",
]
