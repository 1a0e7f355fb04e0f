"""State-machine construction and static checks over IR programs.

One state per instruction. Condition states are prefixed ``C``, action
states ``A``; ``RET COND_PASSED`` carries a ``cond_passed`` edge into the
action entry so one machine covers a whole Rule.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Optional

from .ir.isa import BINDS_QUBIT, BRANCHES, SIGNATURES, OpClass, classify
from .ir.program import IrProgram, Section


@dataclass(frozen=True)
class State:
    id: str
    section: str
    index: int
    opcode: str
    text: str
    kind: OpClass
    label: Optional[str] = None
    operands: tuple = ()

    @property
    def is_ret(self) -> bool:
        return self.opcode == "RET"


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    label: str


@dataclass
class StateMachine:
    states: dict  # id -> State, in program order
    edges: list
    entries: list
    terminals: list
    _succ: dict = field(default_factory=dict, repr=False)

    def successors(self, sid: str) -> list[Edge]:
        return self._succ.get(sid, [])

    def state(self, sid: str) -> State:
        return self.states[sid]


@dataclass(frozen=True)
class Leak:
    qubit: str
    ret_state: str
    witness: tuple


@dataclass
class AnalysisReport:
    qubit_leaks: list = field(default_factory=list)
    unreachable_states: list = field(default_factory=list)
    nonterminating_states: list = field(default_factory=list)
    branch_gaps: list = field(default_factory=list)
    uninitialized_reads: list = field(default_factory=list)
    classification_counts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not (self.qubit_leaks or self.unreachable_states or self.nonterminating_states
                    or self.branch_gaps or self.uninitialized_reads)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["qubit_leaks"] = [
            {"qubit": leak.qubit, "ret_state": leak.ret_state, "witness": list(leak.witness)}
            for leak in self.qubit_leaks
        ]
        data["passed"] = self.passed
        return data

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _prefix(section: Section) -> str:
    return "C" if section.name == "Condition" else "A"


def build_state_machine(prog: IrProgram) -> StateMachine:
    states: dict[str, State] = {}
    edges: list[Edge] = []
    entries: list[str] = []
    terminals: list[str] = []
    action_entry = "A0"

    for section in prog.sections():
        pre = _prefix(section)
        entries.append(f"{pre}0")
        n = len(section.instructions)
        for i, ins in enumerate(section.instructions):
            sid = f"{pre}{i}"
            states[sid] = State(sid, section.name, i, ins.opcode, str(ins), classify(ins.opcode),
                                section.label_at(i), ins.operands)
            nxt = f"{pre}{i + 1}" if i + 1 < n else None
            op = ins.opcode
            if op == "RET":
                terminals.append(sid)
                if ins.operands[0] == "COND_PASSED":
                    edges.append(Edge(sid, action_entry, "cond_passed"))
            elif op == "JMP":
                edges.append(Edge(sid, f"{pre}{section.target(ins.operands[0])}", "jump"))
            elif op in BRANCHES:
                target = f"{pre}{section.target(ins.operands[-1])}"
                taken, not_taken = ("success", "fail") if op == "BRANCH_IF_SUCCESS" else ("taken", "not_taken")
                edges.append(Edge(sid, target, taken))
                if nxt:
                    edges.append(Edge(sid, nxt, not_taken))
            elif nxt:
                edges.append(Edge(sid, nxt, "next"))

    succ: dict[str, list[Edge]] = {}
    for edge in edges:
        succ.setdefault(edge.src, []).append(edge)
    return StateMachine(states, edges, entries, terminals, succ)


def _transfer(state: State, operands: tuple, bound: bool, slot: str) -> bool:
    if state.opcode in BINDS_QUBIT and operands[0] == slot:
        return True
    if state.opcode == "FREE_QUBIT" and operands[0] == slot:
        return False
    if state.opcode == "REGISTER_ENTANGLEMENT" and operands[1] == slot:
        return False
    return bound


def _operands(state: State) -> tuple:
    return state.operands


def check_qubit_release(sm: StateMachine) -> list[Leak]:
    """Slots still bound at some RET on some path, with one witness per (slot, RET).

    A forward may-bound dataflow finds the leaking (slot, RET) pairs; a
    shortest-path search over the (state, bound) product graph then
    supplies a witness for each.
    """
    action_ids = [sid for sid in sm.states if sid.startswith("A")]
    if not action_ids:
        return []
    ops = {sid: _operands(sm.states[sid]) for sid in action_ids}
    slots: list[str] = []
    for sid in action_ids:
        if sm.states[sid].opcode in BINDS_QUBIT and ops[sid][0] not in slots:
            slots.append(ops[sid][0])

    # may-bound sets at state entry
    bound_in: dict[str, frozenset] = {sid: frozenset() for sid in action_ids}
    work = deque(["A0"])
    seen = {"A0"}
    while work:
        sid = work.popleft()
        st = sm.states[sid]
        out = set(bound_in[sid])
        for slot in slots:
            if _transfer(st, ops[sid], slot in out, slot):
                out.add(slot)
            else:
                out.discard(slot)
        for edge in sm.successors(sid):
            if not edge.dst.startswith("A"):
                continue
            merged = bound_in[edge.dst] | out
            if merged != bound_in[edge.dst] or edge.dst not in seen:
                bound_in[edge.dst] = frozenset(merged)
                seen.add(edge.dst)
                work.append(edge.dst)

    leaks: list[Leak] = []
    for slot in slots:
        for ret in (sid for sid in action_ids if sm.states[sid].is_ret and sid in seen):
            if slot in bound_in[ret]:
                leaks.append(Leak(slot, ret, _witness(sm, ops, slot, ret)))
    return leaks


def _witness(sm: StateMachine, ops: dict, slot: str, ret: str) -> tuple:
    start = ("A0", False)
    parent: dict = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        sid, bound = node
        if sid == ret and bound:
            path = []
            while node is not None:
                path.append(node[0])
                node = parent[node]
            return tuple(reversed(path))
        after = _transfer(sm.states[sid], ops[sid], bound, slot)
        for edge in sm.successors(sid):
            nxt = (edge.dst, after)
            if edge.dst.startswith("A") and nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    return ()


def _sccs(sm: StateMachine) -> list[list[str]]:
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    stack: list[str] = []
    on_stack: set[str] = set()
    result: list[list[str]] = []
    counter = [0]

    def visit(root: str) -> None:
        # iterative Tarjan
        work = [(root, iter(sm.successors(root)))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for edge in it:
                dst = edge.dst
                if dst not in index:
                    index[dst] = low[dst] = counter[0]
                    counter[0] += 1
                    stack.append(dst)
                    on_stack.add(dst)
                    work.append((dst, iter(sm.successors(dst))))
                    advanced = True
                    break
                if dst in on_stack:
                    low[node] = min(low[node], index[dst])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.append(member)
                    if member == node:
                        break
                result.append(comp)

    for sid in sm.states:
        if sid not in index:
            visit(sid)
    return result


def check_termination(sm: StateMachine) -> list[str]:
    """States that may never reach a RET: no RET reachable, or on a cycle.

    IR has no loop counters, so any cycle is treated as potentially infinite.
    """
    preds: dict[str, list[str]] = {}
    for edge in sm.edges:
        preds.setdefault(edge.dst, []).append(edge.src)
    can_finish = set(sm.terminals)
    queue = deque(sm.terminals)
    while queue:
        sid = queue.popleft()
        for p in preds.get(sid, []):
            if p not in can_finish:
                can_finish.add(p)
                queue.append(p)
    flagged = {sid for sid in sm.states if sid not in can_finish}
    for comp in _sccs(sm):
        cyclic = len(comp) > 1 or any(e.dst == comp[0] for e in sm.successors(comp[0]))
        if not cyclic:
            continue
        # the cond_passed hop re-enters the action and is not a loop
        if any(sm.states[s].opcode == "RET" for s in comp):
            continue
        flagged.update(comp)
    return [sid for sid in sm.states if sid in flagged]


def check_branch_coverage(sm: StateMachine) -> list[str]:
    gaps: list[str] = []
    for sid, st in sm.states.items():
        if st.opcode not in BRANCHES:
            continue
        out = sm.successors(sid)
        if len(out) != 2:
            gaps.append(f"{sid}: {st.text} has no fallthrough successor")
        elif out[0].dst == out[1].dst:
            gaps.append(f"{sid}: {st.text} taken and not-taken paths coincide at {out[0].dst}")
    return gaps


def find_unreachable(sm: StateMachine) -> list[str]:
    seen = set()
    queue = deque(e for e in sm.entries if e in sm.states)
    seen.update(queue)
    while queue:
        sid = queue.popleft()
        for edge in sm.successors(sid):
            if edge.dst in sm.states and edge.dst not in seen:
                seen.add(edge.dst)
                queue.append(edge.dst)
    return [sid for sid in sm.states if sid not in seen]


def check_register_init(prog: IrProgram, sm: StateMachine) -> list[str]:
    """Registers that some path reads before writing (must-defined analysis, per section)."""
    declared = set(prog.registers)
    written_anywhere: set[str] = set()
    for sid, st in sm.states.items():
        for kind, tok in zip(SIGNATURES[st.opcode], _operands(st)):
            if kind in "Ru":
                written_anywhere.add(tok)
    registers = declared | written_anywhere

    def reads_writes(st: State) -> tuple[list[str], list[str]]:
        reads, writes = [], []
        for kind, tok in zip(SIGNATURES[st.opcode], _operands(st)):
            if kind in "ru" or (kind == "V" and tok in registers):
                reads.append(tok)
            if kind in "Ru":
                writes.append(tok)
        return reads, writes

    findings: list[str] = []
    for prefix in ("C", "A"):
        ids = [sid for sid in sm.states if sid.startswith(prefix)]
        if not ids:
            continue
        universe = frozenset(registers)
        defined_in: dict[str, frozenset] = {sid: universe for sid in ids}
        defined_in[ids[0]] = frozenset()
        changed = True
        while changed:
            changed = False
            for sid in ids:
                reads, writes = reads_writes(sm.states[sid])
                out = defined_in[sid] | frozenset(writes)
                for edge in sm.successors(sid):
                    if edge.dst in defined_in and edge.label != "cond_passed":
                        new = defined_in[edge.dst] & out
                        if new != defined_in[edge.dst]:
                            defined_in[edge.dst] = new
                            changed = True
        reachable = set(ids) - set(find_unreachable(sm))
        for sid in ids:
            if sid not in reachable:
                continue
            reads, _ = reads_writes(sm.states[sid])
            for reg in reads:
                if reg not in defined_in[sid]:
                    findings.append(f"{sid}: {reg} read before write")
    return findings


def analyze(prog: IrProgram) -> AnalysisReport:
    sm = build_state_machine(prog)
    quantum = sum(1 for st in sm.states.values() if st.kind is OpClass.QUANTUM)
    return AnalysisReport(
        qubit_leaks=check_qubit_release(sm),
        unreachable_states=find_unreachable(sm),
        nonterminating_states=check_termination(sm),
        branch_gaps=check_branch_coverage(sm),
        uninitialized_reads=check_register_init(prog, sm),
        classification_counts={"quantum": quantum, "classical": len(sm.states) - quantum},
    )


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(sm: StateMachine, name: str = "ir") -> str:
    """Graphviz digraph: quantum states as boxes, classical as circles,
    terminal states double-bordered."""
    lines = [f"digraph {_dot_quote(name)} {{", "  rankdir=TB;"]
    for sid, st in sm.states.items():
        shape = "box" if st.kind is OpClass.QUANTUM else "circle"
        label = f"{st.label}:\\n{st.text}" if st.label else st.text
        label = label.replace('"', '\\"')
        attrs = [f"shape={shape}", f'label="{label}"']
        if st.is_ret:
            attrs.append("peripheries=2")
        lines.append(f"  {sid} [{', '.join(attrs)}];")
    for edge in sm.edges:
        lines.append(f"  {edge.src} -> {edge.dst} [label={_dot_quote(edge.label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
