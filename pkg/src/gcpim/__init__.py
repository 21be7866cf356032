"""Behavioral simulation of in-memory NOR/NOT logic on gain-cell eDRAM.

The package models a 64x64 gain-cell eDRAM sub-array whose cells decay over
time, executes stateful NOT/NOR operations with a two-phase write pulse,
compiles Boolean expressions down to NOR-only micro-op programs with
liveness-based row reuse and retention-aware refresh insertion, and runs
Monte Carlo campaigns over process variation to estimate gate success rates.
"""

from gcpim.charge import (
    CellParams,
    CellState,
    ConfigError,
    ModelConfig,
    calibrate_tau,
    decay,
    residual_after_discharge,
    sense,
)
from gcpim.compiler import (
    CapacityError,
    CompilerConfig,
    ParseError,
    PimProgram,
    RefreshScheduleError,
    compile_program,
    exhaustive_vectors,
    lower_to_nor,
    parse_program,
    schedule,
    simulate_program,
)
from gcpim.config import RunConfig, load_config
from gcpim.montecarlo import (
    CalibrationError,
    SuccessReport,
    VariationConfig,
    calibrate_variation,
    failure_attribution,
    run_gate_campaign,
    run_gate_trials,
    sample_params,
)
from gcpim.subarray import (
    EventLedger,
    LedgerEntry,
    MicroOp,
    OpKind,
    SubArray,
    TimingEnergyConfig,
)

__all__ = [
    "CalibrationError",
    "CapacityError",
    "CellParams",
    "CellState",
    "CompilerConfig",
    "ConfigError",
    "EventLedger",
    "LedgerEntry",
    "MicroOp",
    "ModelConfig",
    "OpKind",
    "ParseError",
    "PimProgram",
    "RefreshScheduleError",
    "RunConfig",
    "SubArray",
    "SuccessReport",
    "TimingEnergyConfig",
    "VariationConfig",
    "calibrate_tau",
    "calibrate_variation",
    "compile_program",
    "decay",
    "exhaustive_vectors",
    "failure_attribution",
    "load_config",
    "lower_to_nor",
    "parse_program",
    "residual_after_discharge",
    "run_gate_campaign",
    "run_gate_trials",
    "sample_params",
    "schedule",
    "sense",
    "simulate_program",
]

__version__ = "0.1.0"
