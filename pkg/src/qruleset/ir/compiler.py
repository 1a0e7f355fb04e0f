"""Lowers RuleSet Rules into IR programs.

Conditions become a chain of load/compare blocks that each bail out with
``RET COND_FAILED``; action steps expand from fixed templates. The output
is produced as text and run through :func:`parse`, so every compiled program
is also a valid assembler input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..ruleset import ActionStep, Available, Compare, Rule, RuleSet
from .program import IrProgram, parse


class UnsupportedActionStep(ValueError):
    pass


@dataclass(frozen=True)
class CompileContext:
    owner: str
    shared_rule: Optional[int] = None


@dataclass
class _Block:
    qubits: tuple = ()
    registers: tuple = ()
    keys: tuple = ()
    body: tuple = ()
    straight: bool = True  # no labels, single trailing RET


def _fmt_fid(value: float) -> str:
    return repr(float(value))


def _generate(step: ActionStep, ctx: CompileContext) -> _Block:
    p = step.params
    left, right = p["notify"]
    fid = _fmt_fid(p["fidelity"])
    return _Block(
        qubits=("q_self",),
        body=(
            f"GENERATE_ENTANGLEMENT q_self q_partner {fid}",
            f"REGISTER_ENTANGLEMENT {p.get('id_var', 'id_l')} q_self q_partner {fid}",
            f"SEND_READY {left} {right}",
        ),
    )


def _relabel(step: ActionStep, ctx: CompileContext) -> _Block:
    p = step.params
    return _Block(
        qubits=("q_self",),
        registers=("result",),
        body=(
            f"WAIT_FOR_RESPONSE {p['via']} result",
            f"GET_QUBIT_BY_SEQ_NO q_self {p['via']} id_l",
            f"REGISTER_ENTANGLEMENT ID q_self q_partner {_fmt_fid(p['fidelity'])}",
        ),
    )


def _free_link(step: ActionStep, ctx: CompileContext) -> _Block:
    via = step.params["via"]
    return _Block(
        qubits=("q_self",),
        registers=("result",),
        body=(
            f"WAIT_FOR_RESPONSE {via} result",
            f"GET_QUBIT_BY_SEQ_NO q_self {via} id_l",
            "FREE_QUBIT q_self",
        ),
    )


def _swap_correct(step: ActionStep, ctx: CompileContext) -> _Block:
    p = step.params
    return _Block(
        qubits=("q_self",),
        registers=("pauli_op",),
        body=(
            f"WAIT_FOR_RESPONSE {p['via']} pauli_op",
            f"GET_QUBIT_BY_SEQ_NO q_self {p['partner']} ID",
            f"APPLY_PAULI q_self pauli_op {int(p['mask'])}",
            f"REGISTER_ENTANGLEMENT ID q_self q_partner {_fmt_fid(p['fidelity'])}",
        ),
    )


def _bell_measure(step: ActionStep, ctx: CompileContext) -> _Block:
    partner = step.params["partner"]
    shared = ctx.shared_rule
    return _Block(
        qubits=("q0", "q1"),
        registers=("pauli_op", "result"),
        keys=(f'"sent_swap_message_{shared}"',),
        straight=False,
        body=(
            "START:",
            "SET pauli_op 0",
            'LOAD count "count"',
            "GET_QUBIT_BY_SEQ_NO q0 myself id_data",
            f"GET_QUBIT_BY_SEQ_NO q1 {partner} ID",
            "GATE_CNOT q0 q1",
            "GATE_H q1",
            "MEASURE pauli_op 0 q0 x",
            "MEASURE pauli_op 1 q1 z",
            "FREE_QUBIT q0",
            "FREE_QUBIT q1",
            "GET_RESULT q0 q1",
            "BRANCH_IF_SUCCESS SUCCESS",
            "JMP FAIL",
            "SUCCESS:",
            f'SEND_RESULT {partner} "SUCCESS" pauli_op ID',
            "INC count",
            'STORE "count" count',
            "RET FINISHED",
            "FAIL:",
            f'SEND_SWAPPING_RESULT {partner} "FAIL" ID',
            "RET FINISHED",
        ),
    )


def _swap(step: ActionStep, ctx: CompileContext) -> _Block:
    left, right = step.params["left"], step.params["right"]
    return _Block(
        qubits=("q0", "q1"),
        registers=("pauli_op", "count"),
        straight=False,
        body=(
            "START:",
            "SET pauli_op 0",
            f"GET_QUBIT_BY_SEQ_NO q0 {left} id_left",
            f"GET_QUBIT_BY_SEQ_NO q1 {right} id_right",
            "GATE_CNOT q0 q1",
            "GATE_H q0",
            "MEASURE pauli_op 0 q0 x",
            "MEASURE pauli_op 1 q1 z",
            "FREE_QUBIT q0",
            "FREE_QUBIT q1",
            "GET_RESULT q0 q1",
            "BRANCH_IF_SUCCESS SUCCESS",
            "JMP FAIL",
            "SUCCESS:",
            f'SEND_SWAPPING_RESULT {left} "SUCCESS" ID',
            f'SEND_SWAPPING_RESULT {right} "SUCCESS" ID',
            f'SEND_RESULT {left} "CORRECTION" pauli_op ID',
            f'SEND_RESULT {right} "CORRECTION" pauli_op ID',
            'LOAD count "count"',
            "INC count",
            'STORE "count" count',
            "RET FINISHED",
            "FAIL:",
            f'SEND_SWAPPING_RESULT {left} "FAIL" ID',
            f'SEND_SWAPPING_RESULT {right} "FAIL" ID',
            "RET FINISHED",
        ),
    )


def _prepare_data(step: ActionStep, ctx: CompileContext) -> _Block:
    return _Block(qubits=("q_data",), body=("PREPARE_QUBIT q_data id_data",))


def _apply_frame(step: ActionStep, ctx: CompileContext) -> _Block:
    partner = step.params["partner"]
    return _Block(
        qubits=("q0",),
        registers=("pauli_op", "count"),
        body=(
            'LOAD count "count"',
            f"GET_QUBIT_BY_SEQ_NO q0 {partner} ID",
            f"WAIT_FOR_RESPONSE {partner} pauli_op",
            "APPLY_PAULI q0 pauli_op 3",
            "FREE_QUBIT q0",
            "INC count",
            'STORE "count" count',
        ),
    )


def _update_counters(step: ActionStep, ctx: CompileContext) -> _Block:
    p = step.params
    body: list[str] = []
    regs: list[str] = []
    if p.get("complete_shot"):
        regs += ["shot", "count"]
        body += ['LOAD shot "shot"', "INC shot", 'STORE "shot" shot', "SET count 0", 'STORE "count" count']
    if p.get("clear_app") or p.get("set_app"):
        regs.append("app")
        body += [f"SET app {1 if p.get('set_app') else 0}", 'STORE "app" app']
    if not body:
        raise UnsupportedActionStep("update_counters with nothing to update")
    return _Block(registers=tuple(regs), body=tuple(body))


def _request_resource(step: ActionStep, ctx: CompileContext) -> _Block:
    partner = step.params["partner"]
    request = step.params.get("request", "FREE_QUBIT_REQUEST")
    return _Block(
        registers=("qubit_id_partner",),
        body=(
            f'SEND_REQUEST {partner} "{request}"',
            f"WAIT_FOR_RESPONSE {partner} qubit_id_partner",
            "CREATE_PAIR pair qubit_id_self qubit_id_partner",
        ),
    )


TEMPLATES = {
    "generate_entanglement": _generate,
    "relabel": _relabel,
    "free_link": _free_link,
    "swap_correct": _swap_correct,
    "bell_measure": _bell_measure,
    "swap": _swap,
    "prepare_data": _prepare_data,
    "apply_frame": _apply_frame,
    "update_counters": _update_counters,
    "request_resource": _request_resource,
}

_BRANCH_FOR = {"==": ("BEQ", 0), "!=": ("BNQ", 0), "<": ("BLT", 0), ">=": ("BGE", 0), "<=": ("BLT", 1), ">": ("BGE", 1)}


def compile_condition(condition: tuple) -> list[str]:
    lines: list[str] = []
    checks: list[tuple[str, str, int]] = []  # (register, opcode, immediate)
    loads: list[str] = []
    for clause in condition:
        if isinstance(clause, Compare):
            reg = clause.var
            loads.append(f'LOAD {reg} "{clause.var}"')
            opcode, bump = _BRANCH_FOR[clause.op]
            checks.append((loads[-1], f"{opcode} {reg} {clause.value + bump}"))
        elif isinstance(clause, Available):
            reg = f"n_{clause.kind}"
            load = f"COUNT_RESOURCE {reg} {clause.kind}"
            if clause.minimum > 0 or clause.maximum is None:
                checks.append((load, f"BGE {reg} {clause.minimum}"))
                load = None
            if clause.maximum is not None:
                checks.append((load, f"BLT {reg} {clause.maximum + 1}"))
        else:
            raise UnsupportedActionStep(f"unknown clause {clause!r}")
    for i, (load, branch) in enumerate(checks):
        target = "PASSED" if i == len(checks) - 1 else f"C{i + 1}"
        if i > 0:
            lines.append(f"C{i}:")
        if load:
            lines.append(load)
        lines.append(f"{branch} {target}")
        lines.append("RET COND_FAILED")
    lines += ["PASSED:", "RET COND_PASSED"]
    return lines


def compile_rule(rule: Rule, ctx: CompileContext) -> IrProgram:
    """IR program for one Rule (condition plus action)."""
    if not rule.action:
        raise UnsupportedActionStep(f"rule {rule.index} has an empty action")
    if ctx.shared_rule is None:
        ctx = CompileContext(ctx.owner, rule.index)
    blocks = []
    for i, step in enumerate(rule.action):
        template = TEMPLATES.get(step.kind)
        if template is None:
            raise UnsupportedActionStep(f"no IR template for step {step.kind!r}")
        block = template(step, ctx)
        if not block.straight and i != len(rule.action) - 1:
            raise UnsupportedActionStep(f"branching step {step.kind!r} must be last in the action")
        blocks.append(block)

    def merged(attr: str) -> list[str]:
        seen: list[str] = []
        for b in blocks:
            for item in getattr(b, attr):
                if item not in seen:
                    seen.append(item)
        return seen

    text = ["Condition"]
    text += [_indent(line) for line in compile_condition(rule.condition)]
    text.append("Action")
    for decl, attr in (("qubit", "qubits"), ("reg", "registers"), ("key", "keys")):
        items = merged(attr)
        if items:
            text.append(f"{decl}: " + ", ".join(items))
    body: list[str] = []
    if blocks[-1].straight:
        body.append("START:")
    for b in blocks:
        body.extend(b.body)
    if blocks[-1].straight:
        body.append("RET FINISHED")
    text += [_indent(line) for line in body]
    return parse("\n".join(text) + "\n")


def _indent(line: str) -> str:
    return line if line.endswith(":") else "  " + line


def compile(rule: Rule, ctx: CompileContext) -> IrProgram:  # noqa: A001 - public name
    return compile_rule(rule, ctx)


def compile_ruleset(rs: RuleSet) -> list[IrProgram]:
    return [compile_rule(rule, CompileContext(rs.owner, rule.index)) for rule in rs.rules]
