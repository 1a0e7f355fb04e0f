"""Instruction set: operand signatures and quantum/classical classification.

Operand kind codes:

    R  register written      r  register read       u  register read+written
    Q  qubit slot            L  label               I  integer immediate
    F  float literal         S  quoted string       K  quoted persistent key
    A  node address          V  value (register if declared, else runtime symbol)
    B  basis (x|z)           T  return status       N  bare name
"""

from __future__ import annotations

import enum

COND_STATUSES = ("COND_PASSED", "COND_FAILED")
ACTION_STATUSES = ("FINISHED",)
BASES = ("x", "z")


class OpClass(str, enum.Enum):
    QUANTUM = "Quantum"
    CLASSICAL = "Classical"


SIGNATURES: dict[str, str] = {
    # classical control and storage
    "SET": "RI",
    "LOAD": "RK",
    "STORE": "Kr",
    "INC": "u",
    "BNQ": "rIL",
    "BEQ": "rIL",
    "BLT": "rIL",
    "BGE": "rIL",
    "JMP": "L",
    "RET": "T",
    "GET_RESULT": "QQ",
    "BRANCH_IF_SUCCESS": "L",
    "COUNT_RESOURCE": "RN",
    # classical messaging
    "SEND_RESULT": "ASrV",
    "SEND_SWAPPING_RESULT": "ASV",
    "SEND_REQUEST": "AS",
    "WAIT_FOR_RESPONSE": "AR",
    "SEND_READY": "AA",
    # quantum
    "GET_QUBIT_BY_SEQ_NO": "QAV",
    "GATE_CNOT": "QQ",
    "GATE_H": "Q",
    "MEASURE": "RIQB",
    "FREE_QUBIT": "Q",
    "APPLY_PAULI": "QrI",
    "PREPARE_QUBIT": "QV",
    "CREATE_PAIR": "NVV",
    "GENERATE_ENTANGLEMENT": "QVF",
    "REGISTER_ENTANGLEMENT": "VQVF",
}

BRANCHES = frozenset({"BNQ", "BEQ", "BLT", "BGE", "BRANCH_IF_SUCCESS"})
JUMPS = frozenset({"JMP"})

QUANTUM_OPCODES = frozenset({
    "GET_QUBIT_BY_SEQ_NO",
    "GATE_CNOT",
    "GATE_H",
    "MEASURE",
    "FREE_QUBIT",
    "APPLY_PAULI",
    "PREPARE_QUBIT",
    "GENERATE_ENTANGLEMENT",
    "REGISTER_ENTANGLEMENT",
    "CREATE_PAIR",
})

# instructions that bind a qubit slot the program must free or hand off
BINDS_QUBIT = frozenset({"GET_QUBIT_BY_SEQ_NO", "GENERATE_ENTANGLEMENT"})
RELEASES_QUBIT = frozenset({"FREE_QUBIT", "REGISTER_ENTANGLEMENT"})

MESSAGE_OPCODES = frozenset({"SEND_RESULT", "SEND_SWAPPING_RESULT", "SEND_REQUEST", "SEND_READY", "WAIT_FOR_RESPONSE"})


def arity(opcode: str) -> int:
    return len(SIGNATURES[opcode])


def classify(opcode: str) -> OpClass:
    """Quantum iff the opcode touches a qubit slot."""
    if hasattr(opcode, "opcode"):
        opcode = opcode.opcode
    return OpClass.QUANTUM if opcode in QUANTUM_OPCODES else OpClass.CLASSICAL
