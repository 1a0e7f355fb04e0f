"""Abstract Pauli-frame bookkeeping.

A frame is encoded in two bits: bit 0 is the Z component and bit 1 the X
component. Frames compose by XOR; the tracked state label of a teleported
qubit is the frame that separates it from the client's input.
"""

from __future__ import annotations

from dataclasses import dataclass

Z_BIT = 1
X_BIT = 2


class FrameBeforeOutcome(AssertionError):
    """A measurement-dependent correction was applied before its outcome arrived."""


@dataclass(frozen=True)
class PauliFrame:
    x_bit: int = 0
    z_bit: int = 0

    def __post_init__(self):
        if self.x_bit not in (0, 1) or self.z_bit not in (0, 1):
            raise ValueError("frame bits must be 0 or 1")

    @classmethod
    def from_int(cls, value: int) -> "PauliFrame":
        return cls(x_bit=(value >> 1) & 1, z_bit=value & 1)

    def to_int(self) -> int:
        return (self.x_bit << 1) | self.z_bit

    def compose(self, other: "PauliFrame") -> "PauliFrame":
        return PauliFrame(self.x_bit ^ other.x_bit, self.z_bit ^ other.z_bit)

    def masked(self, mask: int) -> "PauliFrame":
        return PauliFrame.from_int(self.to_int() & mask)

    def inverse(self) -> "PauliFrame":
        # Paulis are self-inverse up to phase
        return self

    @property
    def is_identity(self) -> bool:
        return self.to_int() == 0

    def __str__(self) -> str:
        return {0: "I", 1: "Z", 2: "X", 3: "XZ"}[self.to_int()]


@dataclass(frozen=True)
class TrackedState:
    """Input label of a teleported qubit and the frame currently on top of it."""

    label: int
    frame: PauliFrame = PauliFrame()

    @property
    def current(self) -> int:
        return self.label ^ self.frame.to_int()

    def matches_input(self) -> bool:
        return self.frame.is_identity


def apply_pauli_frame(frame: PauliFrame, state: TrackedState, *, outcome_received: bool = True,
                      mask: int = 3) -> TrackedState:
    if not outcome_received:
        raise FrameBeforeOutcome(f"frame {frame} applied before its outcome arrived")
    return TrackedState(state.label, state.frame.compose(frame.masked(mask)))


def teleport(data: TrackedState, pair_frame: PauliFrame, outcome: PauliFrame) -> TrackedState:
    """State at the far end of the pair after the Bell measurement, before correction."""
    return TrackedState(data.label, data.frame.compose(pair_frame).compose(outcome))


def swap(left: PauliFrame, right: PauliFrame, outcome: PauliFrame) -> PauliFrame:
    """Frame of the end-to-end pair produced by swapping two link pairs."""
    return left.compose(right).compose(outcome)
