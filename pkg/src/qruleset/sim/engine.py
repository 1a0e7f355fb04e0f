"""Discrete-event execution of compiled RuleSets on the three-node network.

Link generation is the only physical process simulated directly: each
channel holds one memory slot at an end node and one at the repeater and
heralds after a geometric number of attempt periods. Everything else
happens because a node's scheduler fires a Rule, whose compiled action is
run by the IR interpreter against :class:`_NodeRuntime`. A node is busy
for the duration implied by the operations the action executed; messages
it sends leave when it finishes and arrive after the fiber delay.
"""

from __future__ import annotations

import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from ..events import EventQueue
from ..ir.compiler import compile_ruleset
from ..ir.interp import Interpreter, IrRuntimeError
from ..messages import Message, MessageKind
from ..model import ExecMode, Topology
from ..ruleset import RuleSet
from ..scheduler import RuleSetInstance, Status, check_decision, decide, enforce_deadline
from .pauli import FrameBeforeOutcome, PauliFrame, TrackedState, apply_pauli_frame, swap, teleport
from .physics import LinkModel, Timing, attempt_period, classical_delay, link_success_probability, \
    simulated_success_probability


class DeadlockedAt(RuntimeError):
    def __init__(self, time: float, snapshot: dict):
        super().__init__(f"no pending events at t={time} before termination")
        self.time = time
        self.snapshot = snapshot


@dataclass
class SimConfig:
    timing: Timing = field(default_factory=Timing)
    coincidence: bool = True  # apply the timing-jitter coincidence loss
    swap_failure_prob: float = 0.0
    memory_lifetime: Optional[float] = None  # seconds; None disables decay
    generation_fidelity: Optional[float] = None  # defaults to the requested fidelity
    self_check: bool = True
    keep_trace: bool = True
    data_slots: int = 1  # client memory kept free for the data qubit


class _Pair:
    __slots__ = ("frame", "halves")

    def __init__(self, frame: int = 0):
        self.frame = frame
        self.halves: list = []


class _Qubit:
    __slots__ = ("node", "key", "pair", "state", "bit", "freed", "created", "fidelity", "side", "corrected",
                 "expires_at")

    def __init__(self, node: str, created: float, side: int = 0):
        self.node = node
        self.key = None
        self.pair: Optional[_Pair] = None
        self.state: Optional[TrackedState] = None
        self.bit = 0
        self.freed = False
        self.created = created
        self.fidelity = 1.0
        self.side = side
        self.corrected = False
        self.expires_at = math.inf  # when decayed fidelity drops below the requirement

    def partner(self) -> "_Qubit":
        a, b = self.pair.halves
        return b if a is self else a


class _NodeState:
    """One connection's state at one node."""

    def __init__(self, name: str, role: str, inst: RuleSetInstance, reserved: int, programs: list):
        self.name = name
        self.role = role
        self.inst = inst
        self.reserved = reserved
        self.used = 0
        self.side_used = [0, 0]
        self.programs = programs
        self.interpreters: dict = {}
        self.heralded = (deque(), deque())
        self.records: dict = {}
        self.links = (deque(), deque())  # repeater: registered link ids per side
        self.e2e: dict = {}  # ID -> qubit, insertion ordered
        self.data: dict = {}
        self.swap_success: deque = deque()
        self.swap_fail: deque = deque()
        self.corrections: list = []
        self.measure_results: list = []
        self.finished_at: Optional[float] = None

    @property
    def active(self) -> bool:
        return self.inst.active

    def resources(self) -> dict:
        if self.role == "repeater":
            return {
                "heralded_left": len(self.heralded[0]),
                "heralded_right": len(self.heralded[1]),
                "link_left": len(self.links[0]),
                "link_right": len(self.links[1]),
            }
        res = {
            "heralded": len(self.heralded[0]),
            "swap_success": len(self.swap_success),
            "swap_fail": len(self.swap_fail),
            "correction_ready": sum(1 for m in self.corrections if self._relabelled(m, corrected=False)),
        }
        if self.role == "client":
            res["e2e_ready"] = sum(1 for q in self.e2e.values() if q.corrected)
            res["data_ready"] = len(self.data)
            res["free_memory"] = self.reserved - self.used
        else:
            res["teleport_result"] = sum(1 for m in self.measure_results if self._relabelled(m, corrected=True))
        return res

    def _relabelled(self, msg: Message, corrected: bool) -> bool:
        q = self.e2e.get(msg.payload["ID"])
        return q is not None and q.corrected == corrected


@dataclass
class _Connection:
    cid: int
    rulesets: dict
    states: dict  # role -> _NodeState
    total: int
    rps: int
    num_shots: int
    fidelity: float
    deadline: Optional[float]
    next_link_id: list
    next_e2e: int
    next_data: int = 1
    inflight: list = field(default_factory=lambda: [0, 0])
    swaps_done: int = 0
    partial: Optional[dict] = None

    @property
    def done(self) -> bool:
        return all(not ns.active for ns in self.states.values())


@dataclass
class RunReport:
    seed: int
    elapsed: float
    connections: dict
    teleport_matches: int
    teleport_mismatches: int
    outcome_combos: dict
    frame_before_outcome: int
    violations: list
    partial_results: list
    shot_completions: list
    events: int
    trace: list = field(default_factory=list)
    decisions: list = field(default_factory=list)

    @property
    def shots(self) -> int:
        return sum(c["shots"] for c in self.connections.values())

    @property
    def resources(self) -> int:
        return sum(c["resources"] for c in self.connections.values())

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "elapsed": self.elapsed,
            "connections": {str(k): v for k, v in self.connections.items()},
            "teleport_matches": self.teleport_matches,
            "teleport_mismatches": self.teleport_mismatches,
            "outcome_combos": {str(k): v for k, v in sorted(self.outcome_combos.items())},
            "frame_before_outcome": self.frame_before_outcome,
            "violations": list(self.violations),
            "partial_results": list(self.partial_results),
            "events": self.events,
            "messages": len(self.trace),
        }

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


class _NodeRuntime:
    """Binds one firing of a Rule to the engine (see ir.interp.Runtime)."""

    def __init__(self, sim: "Simulator", conn: _Connection, ns: _NodeState):
        self.sim = sim
        self.conn = conn
        self.ns = ns
        self.ctx: dict = {}
        self.outbox: list = []

    # storage and symbols
    def load(self, key):
        try:
            return self.ns.inst.variables[key]
        except KeyError:
            raise IrRuntimeError(f"unknown key {key!r}") from None

    def store(self, key, value):
        self.ns.inst.variables[key] = value

    def resolve(self, symbol):
        if symbol in self.ctx:
            return self.ctx[symbol]
        if symbol == "myself":
            return self.ns.name
        raise IrRuntimeError(f"unbound runtime symbol {symbol!r}")

    def address(self, token):
        if token == "myself":
            return self.ns.name
        return self.ctx.get(token, token)

    def count_resource(self, kind):
        return self.ns.resources().get(kind, 0)

    # qubits
    def get_qubit(self, address, seq):
        ns = self.ns
        q = ns.data.get(seq) if address == ns.name else ns.records.get((address, seq))
        if q is None or q.freed:
            raise IrRuntimeError(f"{ns.name}: no qubit for ({address}, {seq})")
        return q

    def gate(self, name, *qubits):
        pass

    def measure(self, qubit, basis):
        qubit.bit = self.sim.rng.getrandbits(1)
        return qubit.bit

    def free_qubit(self, q):
        if q.freed:
            raise IrRuntimeError("double free")
        self.sim._release(self.ns, q)
        if q.state is not None and self.ns.role == "server":
            if q.state.matches_input():
                self.sim.teleport_matches += 1
            else:
                self.sim.teleport_mismatches += 1

    def get_result(self, q0, q1):
        sim = self.sim
        outcome = PauliFrame.from_int(q0.bit | (q1.bit << 1))
        if self.ns.role == "repeater":
            ok = sim.rng.random() >= sim.config.swap_failure_prob
            far0, far1 = q0.partner(), q1.partner()
            if ok:
                frame = swap(PauliFrame.from_int(q0.pair.frame), PauliFrame.from_int(q1.pair.frame), outcome)
                pair = _Pair(frame.to_int())
                pair.halves = [far0, far1]
                far0.pair = far1.pair = pair
            else:
                far0.pair = far1.pair = None
            return ok
        # client Bell measurement: data qubit q0 teleports onto the far half of q1's pair
        far = q1.partner()
        far.state = teleport(q0.state, PauliFrame.from_int(q1.pair.frame), outcome)
        far.pair = None
        key = (q0.state.label, outcome.to_int())
        sim.outcome_combos[key] = sim.outcome_combos.get(key, 0) + 1
        return True

    def apply_pauli(self, q, frame, mask):
        f = PauliFrame.from_int(frame & 3)
        if self.ctx.get("_teleport"):
            if not self.ctx.get("_outcome_received"):
                self.sim.frame_before_outcome += 1
                raise FrameBeforeOutcome(f"{self.ns.name}: correction before outcome for ID {self.ctx.get('ID')}")
        if q.state is not None:
            q.state = apply_pauli_frame(f, q.state, mask=mask)
        elif q.pair is not None:
            q.pair.frame ^= f.to_int() & mask
        if self.ctx.get("_swap_correction"):
            q.corrected = True

    def prepare_qubit(self, seq):
        q = self.sim._allocate(self.ns)
        q.state = TrackedState(self.sim.rng.getrandbits(2))
        q.key = (self.ns.name, seq)
        self.ns.data[seq] = q
        return q

    # messaging
    def _send(self, kind, receiver, payload):
        self.outbox.append((kind, receiver, payload))

    def send_result(self, address, tag, value, seq):
        self._send(MessageKind.MEASURE_RESULT, address, {"tag": tag, "value": value, "ID": seq})

    def send_swapping_result(self, address, tag, seq):
        link = self.ctx.get("_link_for", {}).get(address)
        self._send(MessageKind.SWAP_RESULT, address, {"tag": tag, "ID": seq, "id_l": link})

    def send_request(self, address, request):
        self._send(MessageKind.REQUEST_STRING, address, {"request": request})

    def wait_for_response(self, address):
        if "response" not in self.ctx:
            return None
        self.ctx["_outcome_received"] = True
        return self.ctx["response"]

    def send_ready(self, left, right):
        for receiver in (left, right):
            self._send(MessageKind.READY, receiver, {"id_l": self.ctx.get("id_l")})

    def create_pair(self, name, a, b):
        self.ctx[name] = (a, b)

    def generate_entanglement(self, partner, fidelity):
        q = self.ctx["_qubit"]
        q.fidelity = self.sim.config.generation_fidelity or fidelity
        return q

    def register_entanglement(self, ent_id, q, partner, fidelity):
        ns = self.ns
        if q.key is not None and ns.records.get(q.key) is q:
            del ns.records[q.key]
        q.key = (partner, ent_id)
        ns.records[q.key] = q
        sim = self.sim
        tau = sim.config.memory_lifetime
        if tau is not None and ns.role == "repeater":
            required = sim.connections[ns.inst.connection_id].fidelity
            if q.fidelity > required:
                q.expires_at = q.created + tau * math.log((q.fidelity - 0.25) / (required - 0.25))
            else:
                q.expires_at = q.created
            # wake the repeater so a stale record is purged even if nothing else happens
            sim.queue.schedule(max(sim.now, q.expires_at), sim._kick, ns.name)


class Simulator:
    def __init__(self, topo: Topology, link_models: Optional[list] = None, config: Optional[SimConfig] = None,
                 seed: int = 0):
        self.topo = topo
        self.links = list(link_models) if link_models is not None else [LinkModel.from_link(l) for l in topo.links]
        self.config = config or SimConfig()
        self.seed = seed
        self.rng = random.Random(seed)
        self.queue = EventQueue(now=self.config.timing.setup_time)
        t = self.config.timing
        self._p = [simulated_success_probability(lm) if self.config.coincidence else link_success_probability(lm)
                   for lm in self.links]
        self._period = [attempt_period(lm, t.c_fiber) for lm in self.links]
        self._delay = [classical_delay(lm.length_km, t.c_fiber) for lm in self.links]
        self._index = {n.name: i for i, n in enumerate(topo.nodes)}
        self.nodes = {n.name: {"instances": [], "busy_until": 0.0, "pending": False} for n in topo.nodes}
        self.connections: dict = {}
        self._arrivals = 0
        self._finished_nodes = 0
        self._partials_in_flight = 0  # the run ends only once the client has its partial results
        self.teleport_matches = 0
        self.teleport_mismatches = 0
        self.outcome_combos: dict = {}
        self.frame_before_outcome = 0
        self.violations: list = []
        self.partial_results: list = []
        self.shot_completions: list = []
        self.trace: list = []
        self.decisions: list = []

    @property
    def now(self) -> float:
        return self.queue.now

    # -- setup ------------------------------------------------------------

    def add_connection(self, rulesets: dict, reservations: Optional[dict] = None, priority: int = 0,
                       deadline: Optional[float] = None, start: Optional[float] = None) -> int:
        """Register one connection; ``reservations`` maps node name to official slots."""
        by_role = {rs.role: rs for rs in rulesets.values()}
        if set(by_role) != {"client", "repeater", "server"}:
            raise ValueError("need client, repeater and server RuleSets")
        client_rs = by_role["client"]
        cid = client_rs.connection_id
        if cid in self.connections:
            raise ValueError(f"connection {cid} already added")
        params = client_rs.params
        exec_mode = ExecMode(params.get("exec_mode", "RUS"))
        if exec_mode is ExecMode.TBE and deadline is None:
            raise ValueError("TBE connection needs a deadline")
        reservations = dict(reservations or {})
        states = {}
        for role, rs in by_role.items():
            name = rs.owner
            if name not in self.nodes:
                raise ValueError(f"RuleSet owner {name} not in topology")
            amount = reservations.get(name, self.topo.node(name).memory)
            held = sum(ns.reserved for c in self.connections.values() for ns in c.states.values() if ns.name == name)
            if held + amount > self.topo.node(name).memory:
                raise ValueError(f"reservations at {name} exceed its memory")
            inst = RuleSetInstance(rs, rs.initial_variables(), priority, exec_mode,
                                   deadline if exec_mode is ExecMode.TBE else None, self._arrivals)
            self.nodes[name]["instances"].append(inst)
            states[role] = _NodeState(name, role, inst, amount, compile_ruleset(rs))
        self._arrivals += 1
        conn = _Connection(
            cid=cid, rulesets=dict(rulesets), states=states,
            total=params["num_shots"] * params["resource_per_shot"], rps=params["resource_per_shot"],
            num_shots=params["num_shots"], fidelity=params["fidelity"], deadline=deadline,
            next_link_id=[1001, 1001], next_e2e=2001,
        )
        self.connections[cid] = conn
        at = self.now if start is None else start
        self.queue.schedule(at, self._start, conn)
        if deadline is not None:
            self.queue.schedule(max(deadline, at), self._check_deadlines)
        return cid

    def _start(self, conn: _Connection) -> None:
        self._fill_channels(conn)
        for ns in conn.states.values():
            self._kick(ns.name)

    # -- memory -----------------------------------------------------------

    def _allocate(self, ns: _NodeState, side: int = 0) -> _Qubit:
        ns.used += 1
        ns.side_used[side] += 1
        return _Qubit(ns.name, self.now, side)

    def _release(self, ns: _NodeState, q: _Qubit) -> None:
        q.freed = True
        ns.used -= 1
        ns.side_used[q.side] -= 1
        if q.key is not None:
            seq = q.key[1]
            if ns.records.get(q.key) is q:
                del ns.records[q.key]
            if ns.e2e.get(seq) is q:
                del ns.e2e[seq]
            if ns.data.get(seq) is q:
                del ns.data[seq]
        self._fill_channels(self.connections[ns.inst.connection_id])

    def _release_all(self, ns: _NodeState) -> None:
        ns.heralded[0].clear()
        ns.heralded[1].clear()
        ns.links[0].clear()
        ns.links[1].clear()
        ns.records.clear()
        ns.e2e.clear()
        ns.data.clear()
        ns.used = 0
        ns.side_used = [0, 0]

    # -- link generation --------------------------------------------------

    def _endpoints(self, conn: _Connection, link: int) -> tuple:
        end = conn.states["client"] if link == 0 else conn.states["server"]
        return end, conn.states["repeater"]

    def _can_start(self, conn: _Connection, link: int) -> bool:
        end, rep = self._endpoints(conn, link)
        if not (end.active and rep.active):
            return False
        spare = self.config.data_slots if end.role == "client" else 0
        if end.reserved - end.used - spare <= 0 or rep.reserved - rep.used <= 0:
            return False
        if rep.side_used[link] >= math.ceil(rep.reserved / 2):
            return False
        pending = len(rep.heralded[link]) + len(rep.links[link]) + conn.inflight[link]
        return conn.total - conn.swaps_done - pending > 0

    def _fill_channels(self, conn: _Connection) -> None:
        for link in (0, 1):
            while self._can_start(conn, link):
                end, rep = self._endpoints(conn, link)
                qe = self._allocate(end)
                qr = self._allocate(rep, link)
                conn.inflight[link] += 1
                p = self._p[link]
                if p >= 1.0:
                    k = 1
                else:
                    k = int(math.log(1.0 - self.rng.random()) / math.log1p(-p)) + 1
                self.queue.after(k * self._period[link], self._herald, conn, link, qe, qr)

    def _herald(self, conn: _Connection, link: int, qe: _Qubit, qr: _Qubit) -> None:
        conn.inflight[link] -= 1
        end, rep = self._endpoints(conn, link)
        if not (end.active and rep.active):
            for ns, q in ((end, qe), (rep, qr)):
                if ns.active:
                    self._release(ns, q)
            return
        pair = _Pair()
        pair.halves = [qe, qr]
        qe.pair = qr.pair = pair
        qe.created = qr.created = self.now
        link_id = conn.next_link_id[link]
        conn.next_link_id[link] += 1
        end.heralded[0].append((link_id, qe))
        rep.heralded[link].append((link_id, qr))
        self._kick(end.name)
        self._kick(rep.name)

    # -- messaging --------------------------------------------------------

    def _path_delay(self, a: str, b: str) -> float:
        i, j = sorted((self._index[a], self._index[b]))
        return sum(self._delay[i:j])

    def _deliver(self, msg: Message) -> None:
        if self.config.keep_trace:
            self.trace.append(msg.trace_line(self.now))
        conn = self.connections[msg.connection_id]
        if msg.kind is MessageKind.PARTIAL_RESULTS:
            self._partials_in_flight -= 1
            return
        ns = next((s for s in conn.states.values() if s.name == msg.receiver), None)
        if ns is None or not ns.active:
            return
        tag = msg.payload.get("tag")
        if msg.kind is MessageKind.SWAP_RESULT:
            (ns.swap_success if tag == "SUCCESS" else ns.swap_fail).append(msg)
        elif msg.kind is MessageKind.MEASURE_RESULT:
            (ns.corrections if tag == "CORRECTION" else ns.measure_results).append(msg)
        else:
            return
        self._kick(ns.name)

    # -- scheduling -------------------------------------------------------

    def _kick(self, node: str) -> None:
        n = self.nodes[node]
        if not n["pending"]:
            n["pending"] = True
            self.queue.schedule(max(self.now, n["busy_until"]), self._dispatch, node)

    def _state_for(self, node: str, inst: RuleSetInstance) -> _NodeState:
        conn = self.connections[inst.connection_id]
        return conn.states[inst.ruleset.role]

    def _dispatch(self, node: str) -> None:
        n = self.nodes[node]
        n["pending"] = False
        self._check_deadlines()
        if self.config.memory_lifetime is not None:
            for inst in n["instances"]:
                if inst.active and inst.ruleset.role == "repeater":
                    self._purge_decayed(self._state_for(node, inst))
        instances = n["instances"]
        chosen, decision = decide(instances, lambda i: self._state_for(node, i).resources(), self.now, node)
        if self.config.self_check:
            self.violations.extend(check_decision(decision))
        if self.config.keep_trace:
            self.decisions.append(decision)
        if chosen is None:
            return
        ns = self._state_for(node, chosen)
        cost = self._fire(ns, chosen.pending_rule)
        n["busy_until"] = self.now + cost
        n["pending"] = True
        self.queue.schedule(n["busy_until"], self._dispatch, node)

    def _check_deadlines(self) -> None:
        for conn in self.connections.values():
            if conn.deadline is None or conn.done or self.now < conn.deadline:
                continue
            server = conn.states["server"]
            shots, count = server.inst.variables["shot"], server.inst.variables["count"]
            expired = False
            for ns in conn.states.values():
                if enforce_deadline(ns.inst, self.now) is not None:
                    expired = True
                    self._release_all(ns)
                    ns.reserved = 0
                    ns.finished_at = self.now
                    self._finished_nodes += 1
            if not expired:
                continue  # RUS, or every node already finished
            partial = {"connection_id": conn.cid, "shots": shots, "resources": count, "time": self.now}
            conn.partial = partial
            self.partial_results.append(partial)
            msg = Message(MessageKind.PARTIAL_RESULTS, conn.cid, server.name, conn.states["client"].name,
                          dict(partial), self.now)
            self._partials_in_flight += 1
            self.queue.after(self._path_delay(server.name, msg.receiver), self._deliver, msg)

    def _purge_decayed(self, rep: _NodeState) -> None:
        conn = self.connections[rep.inst.connection_id]
        for side in (0, 1):
            keep = deque()
            partner = conn.states["client" if side == 0 else "server"].name
            for link_id in rep.links[side]:
                q = rep.records[(partner, link_id)]
                if self.now >= q.expires_at:
                    q.partner().pair = None
                    self._release(rep, q)
                    msg = Message(MessageKind.SWAP_RESULT, conn.cid, rep.name, partner,
                                  {"tag": "FAIL", "ID": None, "id_l": link_id}, self.now)
                    self.queue.after(self._path_delay(rep.name, partner), self._deliver, msg)
                else:
                    keep.append(link_id)
            rep.links[side].clear()
            rep.links[side].extend(keep)

    # -- rule firing ------------------------------------------------------

    def _bind(self, conn: _Connection, ns: _NodeState, rule_name: str) -> dict:
        client, repeater, server = (conn.states[r].name for r in ("client", "repeater", "server"))
        far = server if ns.role == "client" else client
        if rule_name.startswith("generate_link"):
            side = 1 if rule_name.endswith("right") else 0
            link_id, q = ns.heralded[side].popleft()
            partner = repeater if ns.role != "repeater" else (client if side == 0 else server)
            if ns.role == "repeater":
                ns.links[side].append(link_id)
            return {"id_l": link_id, "q_partner": partner, "_qubit": q}
        if rule_name == "swap_success":
            msg = ns.swap_success.popleft()
            return {"id_l": msg.payload["id_l"], "ID": msg.payload["ID"], "response": 1, "q_partner": far,
                    "_relabel": True}
        if rule_name == "swap_fail":
            msg = ns.swap_fail.popleft()
            return {"id_l": msg.payload["id_l"], "response": 0}
        if rule_name == "swap_correction":
            msg = next(m for m in ns.corrections if ns._relabelled(m, corrected=False))
            ns.corrections.remove(msg)
            return {"ID": msg.payload["ID"], "response": msg.payload["value"], "q_partner": far,
                    "_swap_correction": True}
        if rule_name == "bell_measurement":
            ent_id = next(i for i, q in ns.e2e.items() if q.corrected)
            return {"ID": ent_id, "id_data": next(iter(ns.data))}
        if rule_name == "prepare_data":
            conn.next_data += 1
            return {"id_data": conn.next_data - 1}
        if rule_name == "entanglement_swap":
            id_left, id_right = ns.links[0].popleft(), ns.links[1].popleft()
            ent_id = conn.next_e2e
            conn.next_e2e += 1
            return {"id_left": id_left, "id_right": id_right, "ID": ent_id,
                    "_link_for": {client: id_left, server: id_right}}
        if rule_name == "receive_teleport":
            msg = next(m for m in ns.measure_results if ns._relabelled(m, corrected=True))
            ns.measure_results.remove(msg)
            return {"ID": msg.payload["ID"], "response": msg.payload["value"], "_teleport": True}
        return {}

    def _fire(self, ns: _NodeState, index: int) -> float:
        conn = self.connections[ns.inst.connection_id]
        rule = ns.inst.ruleset.rules[index]
        if rule.name == "complete_shot":
            count = ns.inst.variables["count"]
            self.shot_completions.append((conn.cid, ns.role, ns.inst.variables["shot"] + 1, count))
            if count != conn.rps:
                self.violations.append(f"{ns.name} completed a shot with count={count}")
        runtime = ns.interpreters.get(index)
        if runtime is None:
            rt = _NodeRuntime(self, conn, ns)
            runtime = (rt, Interpreter(ns.programs[index], rt))
            ns.interpreters[index] = runtime
        rt, interp = runtime
        rt.ctx = self._bind(conn, ns, rule.name)
        rt.outbox = []
        frame = interp.run_action()
        if not frame.finished:
            raise IrRuntimeError(f"{ns.name} rule {index} suspended on {frame.waiting_on}")
        if rule.name == "swap_success":
            ns.e2e[rt.ctx["ID"]] = ns.records[(rt.ctx["q_partner"], rt.ctx["ID"])]
        if rule.name == "entanglement_swap" and frame.status:
            conn.swaps_done += 1
        t = self.config.timing
        cost = frame.quantum_ops * t.gate_time + frame.messages * t.message_time
        done = self.now + cost
        for kind, receiver, payload in rt.outbox:
            msg = Message(kind, conn.cid, ns.name, receiver, payload, done)
            if kind is MessageKind.READY:
                if self.config.keep_trace:
                    self.trace.append(msg.trace_line(done))
                continue
            self.queue.schedule(done + self._path_delay(ns.name, receiver), self._deliver, msg)
        if ns.inst.terminated():
            ns.inst.transition(Status.FINISHED)
            ns.finished_at = done
            self._finished_nodes += 1
            self._release_all(ns)
        return cost

    # -- invariants -------------------------------------------------------

    def _self_check(self) -> None:
        for conn in self.connections.values():
            for ns in conn.states.values():
                v = ns.inst.variables
                if v["count"] > conn.rps or v["shot"] > conn.num_shots:
                    self.violations.append(f"{self.now}: counters out of range at {ns.name}")
                if ns.used > ns.reserved or ns.used < 0:
                    self.violations.append(f"{self.now}: {ns.name} holds {ns.used} of {ns.reserved} slots")
                if ns.inst.exec_mode is ExecMode.RUS and ns.inst.status is Status.EXPIRED:
                    self.violations.append(f"{self.now}: RUS instance expired at {ns.name}")

    # -- driver -----------------------------------------------------------

    def _all_done(self) -> bool:
        if self._finished_nodes < 3 * len(self.connections) or self._partials_in_flight:
            return False
        return all(c.done for c in self.connections.values())

    def snapshot(self) -> dict:
        return {
            str(c.cid): {
                ns.name: {"status": ns.inst.status.value, "variables": dict(ns.inst.variables),
                          "used": ns.used, "resources": ns.resources()}
                for ns in c.states.values()
            }
            for c in self.connections.values()
        }

    def run(self) -> RunReport:
        on_event = self._self_check if self.config.self_check else None
        self.queue.run(on_event=on_event, stop=self._all_done)
        if not self._all_done():
            raise DeadlockedAt(self.now, self.snapshot())
        connections = {}
        for conn in self.connections.values():
            server = conn.states["server"]
            statuses = {ns.name: ns.inst.status.value for ns in conn.states.values()}
            connections[conn.cid] = {
                "status": statuses,
                "shots": server.inst.variables["shot"],
                "resources": server.inst.variables["shot"] * conn.rps + server.inst.variables["count"],
                "finished_at": max(ns.finished_at for ns in conn.states.values()),
                "swaps": conn.swaps_done,
                "partial": conn.partial,
            }
        elapsed = max((c["finished_at"] for c in connections.values()), default=self.now)
        return RunReport(
            seed=self.seed,
            elapsed=elapsed,
            connections=connections,
            teleport_matches=self.teleport_matches,
            teleport_mismatches=self.teleport_mismatches,
            outcome_combos=dict(self.outcome_combos),
            frame_before_outcome=self.frame_before_outcome,
            violations=list(self.violations),
            partial_results=list(self.partial_results),
            shot_completions=list(self.shot_completions),
            events=self.queue.dispatched,
            trace=list(self.trace),
            decisions=[str(d) for d in self.decisions],
        )


def run_connection(rulesets: dict, topo: Topology, lm: Optional[list] = None, seed: int = 0,
                   config: Optional[SimConfig] = None, reservations: Optional[dict] = None,
                   deadline: Optional[float] = None) -> RunReport:
    """Simulate one connection from its distributed RuleSets."""
    sim = Simulator(topo, lm, config, seed)
    sim.add_connection(rulesets, reservations, deadline=deadline)
    return sim.run()
