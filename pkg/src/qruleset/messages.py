"""Classical messages exchanged between nodes. Every message names its connection."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class MessageKind(str, enum.Enum):
    APP_REQUEST = "AppRequest"
    ESTIMATE_NOTICE = "EstimateNotice"
    EXEC_DECISION = "ExecDecision"
    RULESET_DISTRIBUTION = "RuleSetDistribution"
    RESERVATION_RELEASE = "ReservationRelease"
    READY = "Ready"
    SWAP_RESULT = "SwapResult"
    MEASURE_RESULT = "MeasureResult"
    REQUEST_STRING = "RequestString"
    RESPONSE = "Response"
    PARTIAL_RESULTS = "PartialResults"
    REJECT = "Reject"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    connection_id: int
    sender: str
    receiver: str
    payload: dict = field(default_factory=dict, compare=False, hash=False)
    send_time: float = 0.0

    def trace_line(self, at: float) -> str:
        return f"{at:.9f} {self.kind.value} {self.sender}->{self.receiver} conn={self.connection_id}"
