from .engine import DeadlockedAt, RunReport, SimConfig, Simulator, run_connection
from .pauli import FrameBeforeOutcome, PauliFrame, TrackedState, apply_pauli_frame
from .physics import (
    C_FIBER_M_PER_S,
    JITTER_SCALE_KM,
    Estimate,
    LinkModel,
    LossModel,
    Timing,
    ZeroRate,
    attempt_period,
    coincidence_probability,
    estimate_execution_time,
    link_success_probability,
)
from .sweep import SweepRow, format_table, sweep

__all__ = [
    "C_FIBER_M_PER_S",
    "DeadlockedAt",
    "Estimate",
    "FrameBeforeOutcome",
    "JITTER_SCALE_KM",
    "LinkModel",
    "LossModel",
    "PauliFrame",
    "RunReport",
    "SimConfig",
    "Simulator",
    "SweepRow",
    "Timing",
    "TrackedState",
    "ZeroRate",
    "apply_pauli_frame",
    "attempt_period",
    "coincidence_probability",
    "estimate_execution_time",
    "format_table",
    "link_success_probability",
    "run_connection",
    "sweep",
]
