"""Estimated vs simulated execution time over a set of end-to-end distances."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from ..model import ApplicationRequest, PathInfo, Topology
from ..ruleset import generate_rulesets
from .engine import SimConfig, run_connection
from .physics import LossModel, ZeroRate, estimate_execution_time


@dataclass
class SweepRow:
    distance_km: float
    estimated: Optional[float] = None
    measured: Optional[float] = None
    relative_error: Optional[float] = None
    model: str = ""
    linear_estimate: Optional[float] = None
    linear_error: Optional[float] = None
    measured_runs: list = field(default_factory=list)
    status: str = "ok"  # ok | unreachable

    def cells(self) -> list:
        if self.status != "ok":
            est = "-" if self.estimated is None else f"{self.estimated:.6f}"
            return [f"{self.distance_km:g}", est, "unreachable", "-", self.model or "-", "-", "-"]
        return [
            f"{self.distance_km:g}",
            f"{self.estimated:.6f}",
            f"{self.measured:.6f}",
            f"{self.relative_error:.4f}",
            self.model,
            f"{self.linear_estimate:.6f}",
            f"{self.linear_error:.4f}",
        ]


HEADER = ["distance_km", "estimated_s", "measured_s", "rel_error", "model", "linear_s", "linear_error"]


def format_table(rows: Sequence[SweepRow]) -> str:
    table = [HEADER] + [r.cells() for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(HEADER))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in table) + "\n"


def sweep(
    req: ApplicationRequest,
    topology_for: Callable[[float], Topology],
    distances: Sequence[float],
    seeds: Sequence[int],
    link_models_for: Optional[Callable[[Topology], list]] = None,
    sim_config: Optional[SimConfig] = None,
    model: Optional[str] = None,
    max_estimated_time: float = 3600.0,
) -> list:
    """One row per distance: estimate, mean measured time over ``seeds``, errors."""
    sim_config = sim_config or SimConfig(keep_trace=False)
    rows = []
    for d in distances:
        row = SweepRow(float(d))
        try:
            topo = topology_for(float(d))
            lms = link_models_for(topo) if link_models_for else None
            est = estimate_execution_time(req, topo, lms, timing=sim_config.timing, model=model)
            lin = estimate_execution_time(req, topo, lms, timing=sim_config.timing, model=LossModel.LINEAR)
        except (ZeroRate, ValueError):
            row.status = "unreachable"
            rows.append(row)
            continue
        row.estimated, row.model, row.linear_estimate = est.total_time, est.model_used.value, lin.total_time
        if est.total_time > max_estimated_time:
            row.status = "unreachable"
            rows.append(row)
            continue
        rulesets = generate_rulesets(req, PathInfo.from_topology(topo))
        row.measured_runs = [run_connection(rulesets, topo, lms, seed, sim_config).elapsed for seed in seeds]
        row.measured = statistics.fmean(row.measured_runs)
        row.relative_error = abs(row.estimated - row.measured) / row.measured
        row.linear_error = abs(row.linear_estimate - row.measured) / row.measured
        rows.append(row)
    return rows
