from dataclasses import replace

import pytest

from qruleset.analyzer import analyze
from qruleset.ir import CompileContext, UnsupportedActionStep, compile_rule, compile_ruleset, parse
from qruleset.model import PathInfo, Topology
from qruleset.ruleset import ActionStep, Rule, generate_rulesets

from conftest import teleport_request

BELL_ACTION = [
    "SET", "LOAD", "GET_QUBIT_BY_SEQ_NO", "GET_QUBIT_BY_SEQ_NO", "GATE_CNOT", "GATE_H",
    "MEASURE", "MEASURE", "FREE_QUBIT", "FREE_QUBIT", "GET_RESULT", "BRANCH_IF_SUCCESS", "JMP",
    "SEND_RESULT", "INC", "STORE", "RET", "SEND_SWAPPING_RESULT", "RET",
]


def test_bell_measurement_matches_listing_shape(rulesets, listing_text):
    prog = compile_ruleset(rulesets["client"])[4]
    assert prog.opcodes() == BELL_ACTION
    assert prog.opcodes() == parse(listing_text).opcodes()
    assert prog.qubits == ("q0", "q1")
    assert prog.registers == ("pauli_op", "result")
    assert set(prog.action.labels) == {"START", "SUCCESS", "FAIL"}


def test_generate_line(rulesets):
    prog = compile_ruleset(rulesets["client"])[0]
    assert str(prog.action.instructions[0]) == "GENERATE_ENTANGLEMENT q_self q_partner 0.95"


def test_condition_chain(rulesets):
    prog = compile_ruleset(rulesets["client"])[4]
    assert prog.opcodes("Condition").count("RET") == 5
    assert prog.condition.instructions[-1].operands == ("COND_PASSED",)


def test_every_compiled_program_passes_analysis(rulesets):
    for rs in rulesets.values():
        for rule, prog in zip(rs.rules, compile_ruleset(rs)):
            report = analyze(prog)
            assert report.passed, (rs.owner, rule.name, report.to_dict())


def test_compiled_text_reparses(rulesets):
    for rs in rulesets.values():
        for prog in compile_ruleset(rs):
            assert parse(prog.serialize()) == prog


def test_compile_is_byte_deterministic():
    topo = Topology.from_distance(16)
    runs = []
    for _ in range(3):
        rss = generate_rulesets(teleport_request(), PathInfo.from_topology(topo))
        runs.append([p.serialize() for rs in rss.values() for p in compile_ruleset(rs)])
    assert runs[0] == runs[1] == runs[2]


def test_empty_action_rejected(rulesets):
    rule = rulesets["client"].rules[0]
    with pytest.raises(UnsupportedActionStep):
        compile_rule(replace(rule, action=()), CompileContext("client"))


def test_unknown_step_rejected(rulesets):
    rule = rulesets["client"].rules[0]
    with pytest.raises(UnsupportedActionStep):
        compile_rule(replace(rule, action=(ActionStep("teleport_cat", {}),)), CompileContext("client"))


def test_branching_step_must_be_last(rulesets):
    rule = rulesets["client"].rules[4]
    both = rule.action + rulesets["client"].rules[6].action
    with pytest.raises(UnsupportedActionStep):
        compile_rule(replace(rule, action=both), CompileContext("client"))


def test_shared_rule_key(rulesets):
    prog = compile_rule(rulesets["client"].rules[4], CompileContext("client", shared_rule=9))
    assert prog.keys == ('"sent_swap_message_9"',)
