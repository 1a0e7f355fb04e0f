"""Executes IR sections against a node runtime.

The runtime supplies everything outside the program: persistent keys,
runtime symbols (``ID``, ``id_data``...), qubit handles and messaging.
Registers are rule-local signed 64-bit integers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Protocol

from .isa import MESSAGE_OPCODES, QUANTUM_OPCODES
from .program import Instruction, IrProgram, Section

_MASK64 = (1 << 64) - 1


def _wrap64(value: int) -> int:
    value &= _MASK64
    return value - (1 << 64) if value >= 1 << 63 else value


class IrRuntimeError(RuntimeError):
    pass


class Runtime(Protocol):
    def load(self, key: str) -> int: ...
    def store(self, key: str, value: int) -> None: ...
    def resolve(self, symbol: str) -> Any: ...
    def address(self, token: str) -> str: ...
    def count_resource(self, kind: str) -> int: ...
    def get_qubit(self, address: str, seq: Any) -> Any: ...
    def gate(self, name: str, *qubits: Any) -> None: ...
    def measure(self, qubit: Any, basis: str) -> int: ...
    def free_qubit(self, qubit: Any) -> None: ...
    def get_result(self, q0: Any, q1: Any) -> bool: ...
    def apply_pauli(self, qubit: Any, frame: int, mask: int) -> None: ...
    def prepare_qubit(self, seq: Any) -> Any: ...
    def send_result(self, address: str, tag: str, value: int, seq: Any) -> None: ...
    def send_swapping_result(self, address: str, tag: str, seq: Any) -> None: ...
    def send_request(self, address: str, request: str) -> None: ...
    def wait_for_response(self, address: str) -> Optional[int]: ...
    def send_ready(self, left: str, right: str) -> None: ...
    def create_pair(self, name: str, a: Any, b: Any) -> None: ...
    def generate_entanglement(self, partner: Any, fidelity: float) -> Any: ...
    def register_entanglement(self, ent_id: Any, qubit: Any, partner: Any, fidelity: float) -> None: ...


@dataclass
class Frame:
    """Suspended or finished execution state of one section."""

    pc: int = 0
    registers: dict = field(default_factory=dict)
    qubits: dict = field(default_factory=dict)
    status: bool = False  # flag set by GET_RESULT
    result: Optional[str] = None  # RET operand once finished
    waiting_on: Optional[str] = None
    quantum_ops: int = 0
    messages: int = 0
    trace: list = field(default_factory=list)

    @property
    def finished(self) -> bool:
        return self.result is not None


def _unquote(token: str) -> str:
    if len(token) >= 2 and token[0] == token[-1] == '"':
        return token[1:-1]
    return token


class Interpreter:
    def __init__(self, program: IrProgram, runtime: Runtime, *, trace: bool = False,
                 key_bindings: Optional[dict] = None, max_steps: int = 100_000):
        self.program = program
        self.rt = runtime
        self.trace = trace
        self.max_steps = max_steps
        self._registers = set(program.registers)
        self._key_bindings = key_bindings or {}

    def _value(self, frame: Frame, token: str) -> Any:
        if token in frame.registers:
            return frame.registers[token]
        if token in self._registers:
            raise IrRuntimeError(f"register {token} read before write")
        if len(token) >= 2 and token[0] == '"':
            return token[1:-1]
        if token.lstrip("-").isdigit():
            return int(token)
        return self.rt.resolve(token)

    def _reg(self, frame: Frame, name: str) -> int:
        try:
            return frame.registers[name]
        except KeyError:
            raise IrRuntimeError(f"register {name} read before write") from None

    def _qubit(self, frame: Frame, name: str) -> Any:
        try:
            return frame.qubits[name]
        except KeyError:
            raise IrRuntimeError(f"qubit slot {name} used before binding") from None

    def _key(self, token: str) -> str:
        key = _unquote(token)
        for placeholder, value in self._key_bindings.items():
            key = key.replace("{" + placeholder + "}", str(value))
        return key

    def run_condition(self) -> bool:
        if self.program.condition is None:
            return True
        frame = self.execute(self.program.condition)
        if not frame.finished:
            raise IrRuntimeError("condition section suspended")
        return frame.result == "COND_PASSED"

    def run_action(self, frame: Optional[Frame] = None) -> Frame:
        """Run (or resume) the action section; returns a finished or waiting frame."""
        return self.execute(self.program.action, frame)

    def execute(self, section: Section, frame: Optional[Frame] = None) -> Frame:
        frame = frame or Frame()
        frame.waiting_on = None
        code = section.instructions
        steps = 0
        while True:
            if frame.pc >= len(code):
                raise IrRuntimeError(f"{section.name} fell off the end without RET")
            steps += 1
            if steps > self.max_steps:
                raise IrRuntimeError("step limit exceeded")
            ins = code[frame.pc]
            if self.trace:
                frame.trace.append(str(ins))
            jump = self._step(section, frame, ins)
            if frame.finished or frame.waiting_on is not None:
                return frame
            frame.pc = jump if jump is not None else frame.pc + 1

    def _step(self, section: Section, frame: Frame, ins: Instruction) -> Optional[int]:
        op, a = ins.opcode, ins.operands
        rt = self.rt
        regs = frame.registers
        if op in QUANTUM_OPCODES:
            frame.quantum_ops += 1
        elif op in MESSAGE_OPCODES:
            frame.messages += 1

        if op == "SET":
            regs[a[0]] = _wrap64(int(a[1]))
        elif op == "LOAD":
            regs[a[0]] = _wrap64(rt.load(self._key(a[1])))
        elif op == "STORE":
            rt.store(self._key(a[0]), self._reg(frame, a[1]))
        elif op == "INC":
            regs[a[0]] = _wrap64(self._reg(frame, a[0]) + 1)
        elif op in ("BNQ", "BEQ", "BLT", "BGE"):
            lhs, rhs = self._reg(frame, a[0]), int(a[1])
            taken = {
                "BNQ": lhs != rhs,
                "BEQ": lhs == rhs,
                "BLT": lhs < rhs,
                "BGE": lhs >= rhs,
            }[op]
            if taken:
                return section.target(a[2])
        elif op == "JMP":
            return section.target(a[0])
        elif op == "RET":
            frame.result = a[0]
        elif op == "COUNT_RESOURCE":
            regs[a[0]] = rt.count_resource(a[1])
        elif op == "GET_RESULT":
            frame.status = bool(rt.get_result(self._qubit(frame, a[0]), self._qubit(frame, a[1])))
        elif op == "BRANCH_IF_SUCCESS":
            if frame.status:
                return section.target(a[0])
        elif op == "GET_QUBIT_BY_SEQ_NO":
            frame.qubits[a[0]] = rt.get_qubit(rt.address(a[1]), self._value(frame, a[2]))
        elif op == "GATE_CNOT":
            rt.gate("CNOT", self._qubit(frame, a[0]), self._qubit(frame, a[1]))
        elif op == "GATE_H":
            rt.gate("H", self._qubit(frame, a[0]))
        elif op == "MEASURE":
            bit = rt.measure(self._qubit(frame, a[2]), a[3]) & 1
            pos = int(a[1])
            current = regs.get(a[0], 0)
            regs[a[0]] = (current & ~(1 << pos)) | (bit << pos)
        elif op == "FREE_QUBIT":
            rt.free_qubit(self._qubit(frame, a[0]))
        elif op == "APPLY_PAULI":
            rt.apply_pauli(self._qubit(frame, a[0]), self._reg(frame, a[1]), int(a[2]))
        elif op == "PREPARE_QUBIT":
            frame.qubits[a[0]] = rt.prepare_qubit(self._value(frame, a[1]))
        elif op == "SEND_RESULT":
            rt.send_result(rt.address(a[0]), _unquote(a[1]), self._reg(frame, a[2]), self._value(frame, a[3]))
        elif op == "SEND_SWAPPING_RESULT":
            rt.send_swapping_result(rt.address(a[0]), _unquote(a[1]), self._value(frame, a[2]))
        elif op == "SEND_REQUEST":
            rt.send_request(rt.address(a[0]), _unquote(a[1]))
        elif op == "WAIT_FOR_RESPONSE":
            address = rt.address(a[0])
            value = rt.wait_for_response(address)
            if value is None:
                frame.waiting_on = address
                return None  # resumed at this same instruction
            regs[a[1]] = value
        elif op == "SEND_READY":
            rt.send_ready(rt.address(a[0]), rt.address(a[1]))
        elif op == "CREATE_PAIR":
            rt.create_pair(a[0], self._value(frame, a[1]), self._value(frame, a[2]))
        elif op == "GENERATE_ENTANGLEMENT":
            frame.qubits[a[0]] = rt.generate_entanglement(self._value(frame, a[1]), float(a[2]))
        elif op == "REGISTER_ENTANGLEMENT":
            rt.register_entanglement(self._value(frame, a[0]), self._qubit(frame, a[1]),
                                     self._value(frame, a[2]), float(a[3]))
        else:  # pragma: no cover - parse rejects unknown opcodes
            raise IrRuntimeError(f"no semantics for {op}")
        return None
