"""Random well-formed IR programs for round-trip tests."""

import random

from qruleset.ir.isa import ACTION_STATUSES, BASES, COND_STATUSES, SIGNATURES
from qruleset.ir.program import Instruction, IrProgram, Section

OPCODES = sorted(SIGNATURES)
NAMES = ("alpha", "beta", "gamma", "myself", "partner", "ID", "id_l")


def _operand(kind, rng, section, regs, qubits, labels):
    if kind in "Rru":
        return rng.choice(regs)
    if kind == "Q":
        return rng.choice(qubits)
    if kind == "L":
        return rng.choice(labels)
    if kind == "I":
        return str(rng.randint(-5, 99))
    if kind == "F":
        return rng.choice(["0.95", "1.0", "0.5", "1e-3", ".25"])
    if kind == "S":
        return rng.choice(['"SUCCESS"', '"FAIL"', '"a b"'])
    if kind == "K":
        return rng.choice(['"count"', '"shot"', '"sent_{x}"'])
    if kind == "B":
        return rng.choice(BASES)
    if kind == "T":
        return rng.choice(COND_STATUSES if section == "Condition" else ACTION_STATUSES)
    if kind == "V":
        return rng.choice([rng.choice(NAMES), str(rng.randint(0, 9)), '"sym"', rng.choice(regs)])
    return rng.choice(NAMES)


def _section(name, rng, regs, qubits):
    n = rng.randint(1, 12)
    labels = sorted({f"L{rng.randint(0, 99)}" for _ in range(rng.randint(1, 3))})
    where = {lab: rng.randrange(n) for lab in labels}
    ops = [rng.choice(OPCODES) for _ in range(n)]
    instrs = tuple(
        Instruction(op, tuple(_operand(k, rng, name, regs, qubits, labels) for k in SIGNATURES[op]))
        for op in ops
    )
    return Section(name, instrs, where)


def random_program(rng: random.Random) -> IrProgram:
    regs = tuple(f"r{i}" for i in range(rng.randint(1, 4)))
    qubits = tuple(f"q{i}" for i in range(rng.randint(1, 3)))
    keys = ('"count"',) if rng.random() < 0.5 else ()
    cond = _section("Condition", rng, regs, qubits) if rng.random() < 0.7 else None
    return IrProgram(cond, _section("Action", rng, regs, qubits), qubits, regs, keys)
