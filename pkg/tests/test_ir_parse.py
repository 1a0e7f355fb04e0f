import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qruleset.ir import IrParseError, parse
from qruleset.ir.isa import SIGNATURES, OpClass, arity, classify
from qruleset.ir.program import (
    ArityMismatch,
    DuplicateLabel,
    InvalidOperand,
    MissingSection,
    UndefinedLabel,
    UnknownOpcode,
)

from irgen import random_program


def test_listing_fixture_parses(listing_text):
    prog = parse(listing_text)
    assert set(prog.action.labels) == {"START", "SUCCESS", "FAIL"}
    assert prog.qubits == ("q0", "q1")
    assert prog.registers == ("pauli_op", "result")
    assert prog.condition.labels == {"PASSED": 3}
    assert prog.opcodes("Condition") == ["LOAD", "BNQ", "RET", "RET"]


def test_listing_roundtrip(listing_text):
    prog = parse(listing_text)
    assert parse(prog.serialize()) == prog


def test_classification():
    assert classify("GATE_CNOT") is OpClass.QUANTUM
    assert classify("MEASURE") is OpClass.QUANTUM
    assert classify("SEND_RESULT") is OpClass.CLASSICAL
    assert classify("BNQ") is OpClass.CLASSICAL
    assert classify("REGISTER_ENTANGLEMENT") is OpClass.QUANTUM
    assert arity("MEASURE") == 4


def test_comments_and_blank_lines_ignored():
    prog = parse('Action\n  // nothing\n\n  RET FINISHED // done\n')
    assert prog.opcodes() == ["RET"]


def test_comment_marker_inside_string_kept():
    prog = parse('Action\n  SEND_REQUEST peer "a//b"\n  RET FINISHED\n')
    assert prog.action.instructions[0].operands == ("peer", '"a//b"')


@pytest.mark.parametrize("text,error", [
    ("Action\n  FROB x\n", UnknownOpcode),
    ("Action\n  GENERATE_ENTANGLEMENT q0\n", ArityMismatch),
    ("Condition\n  RET COND_PASSED\nAction\n", MissingSection),
    ("Action\n  GATE_H\n", ArityMismatch),
    ("Action\n  JMP NOWHERE\n", UndefinedLabel),
    ("Action\nA:\nA:\n  RET FINISHED\n", DuplicateLabel),
    ("Condition\n  RET COND_PASSED\n", MissingSection),
    ("  RET FINISHED\n", MissingSection),
    ("Action\n  RET COND_PASSED\n", InvalidOperand),
    ("Action\n  MEASURE r 0 q y\n", InvalidOperand),
    ("Action\n  SET r x\n", InvalidOperand),
    ("Action\n  RET FINISHED\nEND:\n", UndefinedLabel),
    ("Action\n  RET FINISHED\nAction\n  RET FINISHED\n", DuplicateLabel),
])
def test_parse_errors(text, error):
    with pytest.raises(error):
        parse(text)


def test_errors_carry_line_numbers():
    with pytest.raises(IrParseError) as exc:
        parse("Action\n  RET FINISHED\n  FROB\n")
    assert exc.value.line == 3


def test_500_random_programs_roundtrip():
    rng = random.Random(2024)
    for _ in range(500):
        prog = random_program(rng)
        text = prog.serialize()
        again = parse(text)
        assert again == prog
        assert again.serialize() == text


@settings(max_examples=200, deadline=None)
@given(op=st.sampled_from(sorted(SIGNATURES)), delta=st.sampled_from([-1, 1, 2]))
def test_wrong_arity_always_rejected(op, delta):
    n = len(SIGNATURES[op]) + delta
    if n < 0:
        return
    line = " ".join([op] + ["x"] * n)
    with pytest.raises(ArityMismatch):
        parse(f"Action\n  {line}\n  RET FINISHED\n")


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_roundtrip_property(seed):
    prog = random_program(random.Random(seed))
    assert parse(prog.serialize()) == prog
