"""Per-node management of several RuleSet instances.

Lower priority numbers are more urgent. Only instances whose next Rule is
currently satisfiable compete, so a blocked urgent instance never holds up
a runnable one. Scheduling points are Rule boundaries.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from .model import ApplicationRequest, ExecMode
from .ruleset import RuleSet, check_termination, next_rule


class Status(str, enum.Enum):
    QUEUED = "Queued"
    RUNNING = "Running"
    BLOCKED = "Blocked"
    FINISHED = "Finished"
    EXPIRED = "Expired"


ALLOWED = {
    Status.QUEUED: {Status.RUNNING, Status.EXPIRED},
    Status.RUNNING: {Status.BLOCKED, Status.FINISHED, Status.EXPIRED},
    Status.BLOCKED: {Status.RUNNING, Status.FINISHED, Status.EXPIRED},
    Status.FINISHED: set(),
    Status.EXPIRED: set(),
}


class IllegalTransition(RuntimeError):
    pass


@dataclass
class RuleSetInstance:
    ruleset: RuleSet
    variables: dict
    priority: int
    exec_mode: ExecMode = ExecMode.RUS
    deadline: Optional[float] = None
    arrival: int = 0
    status: Status = Status.QUEUED
    history: list = field(default_factory=list)
    pending_rule: Optional[int] = None  # filled in by pick_next

    def __post_init__(self):
        self.exec_mode = ExecMode(self.exec_mode)
        if self.exec_mode is ExecMode.TBE and self.deadline is None:
            raise ValueError("TBE instance needs a deadline")
        if self.exec_mode is ExecMode.RUS:
            self.deadline = None

    @property
    def connection_id(self) -> int:
        return self.ruleset.connection_id

    @property
    def active(self) -> bool:
        return self.status not in (Status.FINISHED, Status.EXPIRED)

    def transition(self, new: Status) -> None:
        if new == self.status:
            return
        if new not in ALLOWED[self.status]:
            raise IllegalTransition(f"{self.status.value} -> {new.value}")
        self.history.append((self.status, new))
        self.status = new

    def terminated(self) -> bool:
        return check_termination(self.ruleset, self.variables)

    def sort_key(self) -> tuple:
        return (self.priority, self.arrival)


def assign_priority(req: ApplicationRequest, estimate: Optional[float] = None) -> int:
    """ceil(log2(requested seconds)); shorter requests are more urgent."""
    seconds = float(req.requested_execution_time)
    if seconds <= 0:
        raise ValueError("requested execution time must be positive")
    return math.ceil(math.log2(seconds))


@dataclass(frozen=True)
class Decision:
    time: float
    node: str
    connection_id: Optional[int]
    reason: str
    candidates: tuple  # (connection_id, priority, arrival, runnable)

    def __str__(self) -> str:
        chosen = "-" if self.connection_id is None else str(self.connection_id)
        return f"{self.time:.9f} {self.node} conn={chosen} {self.reason}"


def pick_next(
    queue: Iterable[RuleSetInstance],
    resources_of: Callable[[RuleSetInstance], Mapping[str, int]],
) -> Optional[RuleSetInstance]:
    """Most urgent instance with a satisfiable next Rule; FIFO breaks ties.

    Sets ``pending_rule`` on every inspected instance as a side effect.
    """
    best = None
    for inst in queue:
        if not inst.active:
            inst.pending_rule = None
            continue
        inst.pending_rule = next_rule(inst.ruleset, inst.variables, resources_of(inst))
        if inst.pending_rule is None:
            continue
        if best is None or inst.sort_key() < best.sort_key():
            best = inst
    return best


def decide(queue: list, resources_of, now: float, node: str) -> tuple[Optional[RuleSetInstance], Decision]:
    """pick_next plus status bookkeeping and a log entry."""
    chosen = pick_next(queue, resources_of)
    candidates = tuple(
        (i.connection_id, i.priority, i.arrival, i.pending_rule is not None) for i in queue if i.active
    )
    for inst in queue:
        if not inst.active:
            continue
        if inst is chosen:
            inst.transition(Status.RUNNING)
        elif inst.status is Status.RUNNING:
            inst.transition(Status.BLOCKED)
    if chosen is None:
        reason = "idle"
    else:
        reason = f"rule={chosen.pending_rule} priority={chosen.priority}"
    return chosen, Decision(now, node, None if chosen is None else chosen.connection_id, reason, candidates)


def check_decision(decision: Decision) -> list[str]:
    """Priority safety and work conservation at one decision point."""
    problems = []
    runnable = [c for c in decision.candidates if c[3]]
    if decision.connection_id is None:
        if runnable:
            problems.append(f"{decision.node} idle at {decision.time} with runnable work")
        return problems
    best = min(runnable, key=lambda c: (c[1], c[2]), default=None)
    if best is None or best[0] != decision.connection_id:
        problems.append(f"{decision.node} passed over connection {best and best[0]} at {decision.time}")
    return problems


@dataclass(frozen=True)
class PartialResults:
    connection_id: int
    shots: int
    resources: int
    time: float


def enforce_deadline(inst: RuleSetInstance, now: float) -> Optional[PartialResults]:
    """Expire a TBE instance at or past its deadline; RUS instances never expire."""
    if inst.exec_mode is not ExecMode.TBE or not inst.active:
        return None
    if now < inst.deadline:
        return None
    inst.transition(Status.EXPIRED)
    return PartialResults(inst.connection_id, inst.variables.get("shot", 0), inst.variables.get("count", 0), now)
