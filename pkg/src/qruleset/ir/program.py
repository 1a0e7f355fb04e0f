"""IR program model plus the line-oriented assembler and serializer.

Surface syntax::

    Condition
      LOAD count "count"
      BNQ count 0 PASSED
      RET COND_FAILED

    PASSED:
      RET COND_PASSED

    Action
    qubit: q0, q1
    reg: pauli_op, result
    key: "sent_swap_message_{shared_rule}"

    START:
      ...

``//`` starts a comment. The Condition section is optional; Action is not.
Conventional file extension: ``.qir``.
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass, field
from typing import Optional

from .isa import ACTION_STATUSES, BASES, COND_STATUSES, SIGNATURES

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_LABEL_LINE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*):$")
_DECL_LINE = re.compile(r"^(qubit|reg|key):\s*(.*)$")
_INT = re.compile(r"^-?\d+$")
_FLOAT = re.compile(r"^-?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?$")


class IrParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnknownOpcode(IrParseError):
    pass


class ArityMismatch(IrParseError):
    pass


class UndefinedLabel(IrParseError):
    pass


class DuplicateLabel(IrParseError):
    pass


class MissingSection(IrParseError):
    pass


class InvalidOperand(IrParseError):
    pass


@dataclass(frozen=True)
class Instruction:
    opcode: str
    operands: tuple = ()

    def __str__(self) -> str:
        return " ".join((self.opcode, *self.operands))


@dataclass(frozen=True)
class Section:
    name: str  # "Condition" | "Action"
    instructions: tuple = ()
    labels: dict = field(default_factory=dict, hash=False)  # label -> instruction index

    def label_at(self, index: int) -> Optional[str]:
        for name, at in self.labels.items():
            if at == index:
                return name
        return None

    def target(self, label: str) -> int:
        return self.labels[label]


@dataclass(frozen=True)
class IrProgram:
    condition: Optional[Section]
    action: Section
    qubits: tuple = ()
    registers: tuple = ()
    keys: tuple = ()

    def sections(self) -> list[Section]:
        return [s for s in (self.condition, self.action) if s is not None]

    def opcodes(self, section: str = "Action") -> list[str]:
        sec = self.action if section == "Action" else self.condition
        return [ins.opcode for ins in sec.instructions] if sec else []

    def serialize(self) -> str:
        return serialize(self)


def _tokenize(text: str, lineno: int) -> list[str]:
    lexer = shlex.shlex(text, posix=False)
    lexer.whitespace_split = True
    lexer.commenters = ""
    try:
        return list(lexer)
    except ValueError as exc:
        raise InvalidOperand(str(exc), lineno) from None


def _strip_comment(line: str) -> str:
    in_quote = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_quote = not in_quote
        elif not in_quote and line.startswith("//", i):
            return line[:i]
    return line


def _check_operand(kind: str, token: str, section: str, lineno: int) -> None:
    quoted = len(token) >= 2 and token[0] == token[-1] == '"'
    ok = True
    if kind == "I":
        ok = bool(_INT.match(token))
    elif kind == "F":
        ok = bool(_FLOAT.match(token))
    elif kind in "SK":
        ok = quoted
    elif kind == "B":
        ok = token in BASES
    elif kind == "T":
        allowed = COND_STATUSES if section == "Condition" else ACTION_STATUSES
        ok = token in allowed
    elif kind == "V":
        ok = quoted or bool(_IDENT.match(token)) or bool(_INT.match(token))
    else:
        ok = bool(_IDENT.match(token))
    if not ok:
        raise InvalidOperand(f"operand {token!r} is not valid as kind {kind!r} in {section}", lineno)


def _split_decl(body: str) -> tuple:
    return tuple(part.strip() for part in body.split(",") if part.strip())


def parse(text: str) -> IrProgram:
    sections: dict[str, list] = {}
    labels: dict[str, dict] = {}
    label_lines: dict[str, dict] = {}
    pending_labels: list[tuple[str, int]] = []
    decls = {"qubit": [], "reg": [], "key": []}
    current: Optional[str] = None
    refs: list[tuple[str, str, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line in ("Condition", "Action"):
            if line in sections:
                raise DuplicateLabel(f"section {line} declared twice", lineno)
            if pending_labels:
                raise UndefinedLabel(f"label {pending_labels[0][0]} has no instruction", pending_labels[0][1])
            current = line
            sections[line] = []
            labels[line] = {}
            label_lines[line] = {}
            continue
        if current is None:
            raise MissingSection("instruction outside of a Condition/Action section", lineno)
        decl = _DECL_LINE.match(line)
        if decl:
            kind, body = decl.groups()
            items = _split_decl(body)
            for item in items:
                if kind == "key":
                    _check_operand("K", item, current, lineno)
                elif not _IDENT.match(item):
                    raise InvalidOperand(f"bad {kind} name {item!r}", lineno)
            decls[kind].extend(items)
            continue
        lab = _LABEL_LINE.match(line)
        if lab:
            name = lab.group(1)
            if name in labels[current] or any(name == p for p, _ in pending_labels):
                raise DuplicateLabel(f"label {name} defined twice", lineno)
            pending_labels.append((name, lineno))
            continue
        tokens = _tokenize(line, lineno)
        opcode, operands = tokens[0], tuple(tokens[1:])
        if opcode not in SIGNATURES:
            raise UnknownOpcode(f"unknown opcode {opcode}", lineno)
        sig = SIGNATURES[opcode]
        if len(operands) != len(sig):
            raise ArityMismatch(f"{opcode} expects {len(sig)} operands, got {len(operands)}", lineno)
        for kind, token in zip(sig, operands):
            _check_operand(kind, token, current, lineno)
            if kind == "L":
                refs.append((current, token, lineno))
        for name, _ in pending_labels:
            labels[current][name] = len(sections[current])
        pending_labels.clear()
        sections[current].append(Instruction(opcode, operands))

    if pending_labels:
        raise UndefinedLabel(f"label {pending_labels[0][0]} has no instruction", pending_labels[0][1])
    if not sections.get("Action"):
        raise MissingSection("Action section is missing or empty")
    for sec, label, lineno in refs:
        if label not in labels[sec]:
            raise UndefinedLabel(f"jump target {label} not defined in {sec}", lineno)

    condition = None
    if sections.get("Condition"):
        condition = Section("Condition", tuple(sections["Condition"]), labels["Condition"])
    return IrProgram(
        condition=condition,
        action=Section("Action", tuple(sections["Action"]), labels["Action"]),
        qubits=tuple(decls["qubit"]),
        registers=tuple(decls["reg"]),
        keys=tuple(decls["key"]),
    )


def _emit_section(sec: Section, out: list[str]) -> None:
    by_index: dict[int, list[str]] = {}
    for name, idx in sec.labels.items():
        by_index.setdefault(idx, []).append(name)
    for i, ins in enumerate(sec.instructions):
        names = by_index.get(i)
        if names:
            if out and out[-1] != "":
                out.append("")
            out.extend(f"{name}:" for name in names)
        out.append(f"  {ins}")


def serialize(prog: IrProgram) -> str:
    out: list[str] = []
    if prog.condition is not None:
        out.append("Condition")
        _emit_section(prog.condition, out)
        out.append("")
    out.append("Action")
    if prog.qubits:
        out.append("qubit: " + ", ".join(prog.qubits))
    if prog.registers:
        out.append("reg: " + ", ".join(prog.registers))
    if prog.keys:
        out.append("key: " + ", ".join(prog.keys))
    if prog.qubits or prog.registers or prog.keys:
        out.append("")
    _emit_section(prog.action, out)
    return "\n".join(out) + "\n"
