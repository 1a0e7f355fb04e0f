"""Application preparation handshake and per-node memory reservation.

Each node keeps a :class:`ResourceLedger` split into TBE and RUS
partitions. A request first places tentative holds on its way from client
to server; the client's decision then either converts a server-chosen
amount into official reservations or releases everything. Holds carry an
expiry so a stalled client cannot pin memory forever.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Optional

from .events import EventQueue
from .messages import Message, MessageKind
from .model import ApplicationRequest, ExecMode, PathInfo, Topology, mint_connection_id, validate_request
from .ruleset import generate_rulesets
from .sim.physics import C_FIBER_M_PER_S, Estimate, classical_delay, estimate_execution_time


class ProtocolError(RuntimeError):
    pass


class NoAvailableMemory(ProtocolError):
    def __init__(self, node: str, connection_id: int):
        super().__init__(f"no memory available at {node} for connection {connection_id}")
        self.node = node
        self.connection_id = connection_id


class TentativeExpired(ProtocolError):
    def __init__(self, node: str, connection_id: int):
        super().__init__(f"tentative reservation for {connection_id} at {node} expired")
        self.node = node
        self.connection_id = connection_id


PARTITIONS = (ExecMode.TBE, ExecMode.RUS)


class ResourceLedger:
    """Memory accounting at one node."""

    def __init__(self, node: str, total_memory: int, tbe_fraction: float = 0.5, cap_fraction: float = 0.5):
        if total_memory < 0:
            raise ValueError("negative memory")
        if not 0.0 <= tbe_fraction <= 1.0:
            raise ValueError("tbe_fraction outside [0, 1]")
        if not 0.0 < cap_fraction <= 1.0:
            raise ValueError("cap_fraction outside (0, 1]")
        self.node = node
        self.total_memory = total_memory
        tbe = int(round(total_memory * tbe_fraction))
        self.capacity = {ExecMode.TBE: tbe, ExecMode.RUS: total_memory - tbe}
        self.cap_fraction = cap_fraction
        self.free = dict(self.capacity)
        self.tentative: dict = {}  # cid -> (amount, expiry, partition)
        self.official: dict = {}  # cid -> (amount, partition)

    @property
    def tbe_capacity(self) -> int:
        return self.capacity[ExecMode.TBE]

    @property
    def rus_capacity(self) -> int:
        return self.capacity[ExecMode.RUS]

    @property
    def per_app_cap(self) -> int:
        return math.floor(self.cap_fraction * self.total_memory + 1e-9)

    def available(self, partition: ExecMode) -> int:
        return min(self.free[ExecMode(partition)], self.per_app_cap)

    def hold(self, cid: int, amount: int, expiry: float, partition: ExecMode) -> None:
        partition = ExecMode(partition)
        if cid in self.tentative or cid in self.official:
            raise ProtocolError(f"{self.node} already holds memory for {cid}")
        if amount <= 0 or amount > self.available(partition):
            raise NoAvailableMemory(self.node, cid)
        self.free[partition] -= amount
        self.tentative[cid] = (amount, expiry, partition)

    def commit(self, cid: int, amount: int, now: float) -> int:
        """Make ``amount`` of the tentative hold official; the rest is freed."""
        entry = self.tentative.get(cid)
        if entry is None:
            raise TentativeExpired(self.node, cid)
        held, expiry, partition = entry
        if now >= expiry:
            self.release(cid)
            raise TentativeExpired(self.node, cid)
        amount = max(0, min(amount, held, self.per_app_cap))
        del self.tentative[cid]
        self.free[partition] += held - amount
        if amount:
            self.official[cid] = (amount, partition)
        return amount

    def release(self, cid: int) -> int:
        """Drop every hold for ``cid``; returns the amount freed."""
        freed = 0
        if cid in self.tentative:
            amount, _, partition = self.tentative.pop(cid)
            self.free[partition] += amount
            freed += amount
        if cid in self.official:
            amount, partition = self.official.pop(cid)
            self.free[partition] += amount
            freed += amount
        return freed

    def expire(self, now: float) -> list:
        gone = sorted(cid for cid, (_, expiry, _) in self.tentative.items() if expiry <= now)
        for cid in gone:
            self.release(cid)
        return gone

    def check(self) -> list:
        problems = []
        for part in PARTITIONS:
            tent = sum(a for a, _, p in self.tentative.values() if p is part)
            off = sum(a for a, p in self.official.values() if p is part)
            if self.free[part] < 0 or self.free[part] + tent + off != self.capacity[part]:
                problems.append(f"{self.node}/{part.value}: free={self.free[part]} tentative={tent} "
                                f"official={off} capacity={self.capacity[part]}")
        for cid, (amount, _) in self.official.items():
            if amount > self.cap_fraction * self.total_memory + 1e-9:
                problems.append(f"{self.node}: official {amount} for {cid} exceeds the per-application cap")
        return problems

    def snapshot(self) -> dict:
        return {
            "node": self.node,
            "total_memory": self.total_memory,
            "free": {p.value: self.free[p] for p in PARTITIONS},
            "tentative": {str(c): [a, e, p.value] for c, (a, e, p) in sorted(self.tentative.items())},
            "official": {str(c): [a, p.value] for c, (a, p) in sorted(self.official.items())},
        }

    def dumps(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True)


def ledgers_for(topo: Topology, tbe_fraction: float = 0.5, cap_fraction: float = 0.5) -> dict:
    return {n.name: ResourceLedger(n.name, n.memory, tbe_fraction, cap_fraction) for n in topo.nodes}


@dataclass(frozen=True)
class ProtocolConfig:
    c_fiber: float = C_FIBER_M_PER_S
    estimate_time: float = 0.010  # server time to build RuleSets and the estimate
    decision_allowance: float = 1.0  # client time budget for its decision
    decision_time: float = 0.001  # how long the client actually takes
    handling_margin: float = 1e-3

    def timeout(self, rtt: float) -> float:
        # two round trips: request/estimate, then decision/distribution
        return self.estimate_time + self.decision_allowance + 2 * rtt + self.handling_margin


# -- synchronous building blocks ---------------------------------------------


def _hop_delays(topo: Topology, c_fiber: float) -> list:
    return [classical_delay(l.length_km, c_fiber) for l in topo.links]


def propagate_request(req: ApplicationRequest, topo: Topology, ledgers: dict, now: float = 0.0,
                      config: ProtocolConfig = ProtocolConfig()) -> tuple[PathInfo, dict]:
    """Walk the request client -> server, collecting path info and placing holds.

    Returns the path and ``{node: (amount, held_at)}``. On exhaustion every
    upstream hold is released and :class:`NoAvailableMemory` is raised.
    """
    validate_request(req)
    delays = _hop_delays(topo, config.c_fiber)
    expiry_span = config.timeout(2 * sum(delays))
    path = PathInfo()
    holds: dict = {}
    t = now
    for i, node in enumerate(topo.nodes):
        ledger = ledgers[node.name]
        amount = ledger.available(req.exec_mode)
        try:
            ledger.hold(req.connection_id, amount, t + expiry_span, req.exec_mode)
        except NoAvailableMemory:
            for name in holds:
                ledgers[name].release(req.connection_id)
            raise
        holds[node.name] = (amount, t)
        path.add_node(node.name, amount)
        if i < len(topo.links):
            path.add_link(topo.links[i])
            t += delays[i]
    return path, holds


def confirm_qubits(ledger: ResourceLedger, req: ApplicationRequest, now: float = 0.0,
                   expiry: Optional[float] = None) -> int:
    """Server side: report and hold the memory it can give this request."""
    amount = ledger.available(req.exec_mode)
    ledger.hold(req.connection_id, amount, math.inf if expiry is None else expiry, req.exec_mode)
    return amount


def decide_and_commit(decision: str, cid: int, ledgers: dict, amounts: Optional[dict] = None,
                      now: float = 0.0) -> str:
    """Apply the client's decision to every ledger.

    ``amounts`` maps node to the official reservation the server asks for;
    missing nodes keep their whole tentative hold.
    """
    if decision == "decline":
        for ledger in ledgers.values():
            ledger.release(cid)
        return "released"
    if decision != "accept":
        raise ValueError(f"unknown decision {decision!r}")
    expired = [name for name, l in ledgers.items() if cid not in l.tentative or l.tentative[cid][1] <= now]
    if expired:
        for ledger in ledgers.values():
            ledger.release(cid)
        raise TentativeExpired(expired[0], cid)
    amounts = amounts or {}
    for name, ledger in ledgers.items():
        ledger.commit(cid, amounts.get(name, ledger.tentative[cid][0]), now)
    return "committed"


def expire_tentatives(ledger: ResourceLedger, now: float) -> list:
    return ledger.expire(now)


# -- event-driven handshake ---------------------------------------------------


@dataclass
class Preparation:
    """Outcome of one connection's handshake."""

    connection_id: int
    request: ApplicationRequest
    decision: str
    outcome: str = "pending"  # committed | declined | rejected | expired
    path: Optional[PathInfo] = None
    estimate: Optional[Estimate] = None
    rulesets: Optional[dict] = None
    official: dict = field(default_factory=dict)
    requested: dict = field(default_factory=dict)  # server-specified official amounts
    rulesets_created_at: Optional[float] = None
    estimate_sent_at: Optional[float] = None
    accepted: bool = False
    reason: str = ""


class HandshakeSim:
    """Runs any number of preparations on one shared timeline and ledger set."""

    def __init__(self, topo: Topology, ledgers: Optional[dict] = None, config: ProtocolConfig = ProtocolConfig(),
                 seed: int = 0, check_every_event: bool = True):
        self.topo = topo
        self.ledgers = ledgers if ledgers is not None else ledgers_for(topo)
        self.config = config
        self.rng = random.Random(seed)
        self.queue = EventQueue()
        self.trace: list = []
        self.preparations: dict = {}
        self.violations: list = []
        self.check_every_event = check_every_event
        self._delays = _hop_delays(topo, config.c_fiber)
        self._index = {n.name: i for i, n in enumerate(topo.nodes)}
        self.timeout = config.timeout(2 * sum(self._delays))

    @property
    def now(self) -> float:
        return self.queue.now

    def submit(self, req: ApplicationRequest, decision: str = "accept", at: float = 0.0,
               amounts: Optional[dict] = None) -> int:
        if decision not in ("accept", "decline", "timeout"):
            raise ValueError(f"unknown decision {decision!r}")
        if not req.connection_id:
            req = req.with_connection_id(mint_connection_id(self.rng))
        validate_request(req)
        prep = Preparation(req.connection_id, req, decision)
        prep.requested = dict(amounts or {})
        self.preparations[req.connection_id] = prep
        self.queue.schedule(at, self._client_send, prep)
        return req.connection_id

    # -- plumbing -----------------------------------------------------------

    def _delay(self, a: str, b: str) -> float:
        i, j = sorted((self._index[a], self._index[b]))
        return sum(self._delays[i:j])

    def _send(self, prep: Preparation, kind: MessageKind, sender: str, receiver: str, payload=None,
              extra_delay: float = 0.0) -> None:
        msg = Message(kind, prep.connection_id, sender, receiver, payload or {}, self.now + extra_delay)
        self.queue.schedule(msg.send_time + self._delay(sender, receiver), self._receive, prep, msg)

    def _log(self, line: str) -> None:
        self.trace.append(line)

    def _hold(self, prep: Preparation, node: str) -> int:
        ledger = self.ledgers[node]
        req = prep.request
        amount = ledger.available(req.exec_mode)
        ledger.hold(req.connection_id, amount, self.now + self.timeout, req.exec_mode)
        self.queue.schedule(self.now + self.timeout, self._expire, node)
        return amount

    def _expire(self, node: str) -> None:
        for cid in self.ledgers[node].expire(self.now):
            self._log(f"{self.now:.9f} Expire {node} conn={cid}")
            prep = self.preparations.get(cid)
            if prep is not None and prep.outcome == "pending":
                prep.outcome = "expired"

    # -- handlers -----------------------------------------------------------

    def _client_send(self, prep: Preparation) -> None:
        client = self.topo.client.name
        try:
            amount = self._hold(prep, client)
        except NoAvailableMemory:
            prep.outcome, prep.reason = "rejected", f"no memory at {client}"
            return
        prep.path = PathInfo()
        prep.path.add_node(client, amount)
        prep.path.add_link(self.topo.links[0])
        self._send(prep, MessageKind.APP_REQUEST, client, self.topo.repeater.name)

    def _receive(self, prep: Preparation, msg: Message) -> None:
        self._log(msg.trace_line(self.now))
        handler = {
            MessageKind.APP_REQUEST: self._on_request,
            MessageKind.REJECT: self._on_release,
            MessageKind.RESERVATION_RELEASE: self._on_release,
            MessageKind.ESTIMATE_NOTICE: self._on_estimate,
            MessageKind.EXEC_DECISION: self._on_decision,
            MessageKind.RULESET_DISTRIBUTION: self._on_distribution,
        }[msg.kind]
        handler(prep, msg)

    def _reject(self, prep: Preparation, at: str) -> None:
        prep.outcome, prep.reason = "rejected", f"no memory at {at}"
        for node in self._upstream(at):
            self._send(prep, MessageKind.REJECT, at, node)

    def _upstream(self, node: str) -> list:
        return [n.name for n in self.topo.nodes[: self._index[node]]]

    def _on_request(self, prep: Preparation, msg: Message) -> None:
        node = msg.receiver
        if prep.outcome != "pending":
            return
        try:
            amount = self._hold(prep, node)
        except NoAvailableMemory:
            self._reject(prep, node)
            return
        prep.path.add_node(node, amount)
        if node != self.topo.server.name:
            prep.path.add_link(self.topo.links[self._index[node]])
            self._send(prep, MessageKind.APP_REQUEST, node, self.topo.nodes[self._index[node] + 1].name)
            return
        # server: confirmation done; build RuleSets, then the estimate, then notify
        req = prep.request
        prep.rulesets = generate_rulesets(req, prep.path)
        prep.rulesets_created_at = self.now
        available = {h.node: h.available_memory for h in prep.path.node_hops}
        prep.estimate = estimate_execution_time(req, self.topo, available=available)
        prep.estimate_sent_at = self.now + self.config.estimate_time
        self._send(prep, MessageKind.ESTIMATE_NOTICE, node, self.topo.client.name,
                   {"total_time": prep.estimate.total_time}, extra_delay=self.config.estimate_time)

    def _on_release(self, prep: Preparation, msg: Message) -> None:
        self.ledgers[msg.receiver].release(prep.connection_id)

    def _on_estimate(self, prep: Preparation, msg: Message) -> None:
        client, server = self.topo.client.name, self.topo.server.name
        if prep.decision == "timeout":
            return  # client stalls; holds lapse on their own
        if prep.decision == "decline":
            self.ledgers[client].release(prep.connection_id)
            prep.outcome = "declined"
            prep.rulesets = None
        else:
            prep.accepted = True
        self._send(prep, MessageKind.EXEC_DECISION, client, server, {"decision": prep.decision},
                   extra_delay=self.config.decision_time)

    def _release_everywhere(self, prep: Preparation, sender: str) -> None:
        self.ledgers[sender].release(prep.connection_id)
        for node in self.ledgers:
            if node != sender:
                self._send(prep, MessageKind.RESERVATION_RELEASE, sender, node)

    def _on_decision(self, prep: Preparation, msg: Message) -> None:
        server = msg.receiver
        cid = prep.connection_id
        if msg.payload["decision"] == "decline":
            prep.rulesets = None
            self.ledgers[server].release(cid)
            self._send(prep, MessageKind.RESERVATION_RELEASE, server, self.topo.repeater.name)
            return
        try:
            amount = prep.requested.get(server, self._tentative(server, cid))
            prep.official[server] = self.ledgers[server].commit(cid, amount, self.now)
        except TentativeExpired:
            prep.outcome, prep.rulesets = "expired", None
            self._release_everywhere(prep, server)
            return
        for node in (self.topo.repeater.name, self.topo.client.name):
            self._send(prep, MessageKind.RULESET_DISTRIBUTION, server, node,
                       {"amount": prep.requested.get(node), "ruleset": prep.rulesets[node]})

    def _tentative(self, node: str, cid: int) -> int:
        entry = self.ledgers[node].tentative.get(cid)
        return entry[0] if entry else 0

    def _on_distribution(self, prep: Preparation, msg: Message) -> None:
        node = msg.receiver
        cid = prep.connection_id
        if prep.outcome not in ("pending", "committed"):
            return
        amount = msg.payload["amount"]
        if amount is None:
            amount = self._tentative(node, cid)
        try:
            prep.official[node] = self.ledgers[node].commit(cid, amount, self.now)
        except TentativeExpired:
            prep.outcome, prep.rulesets = "expired", None
            self._release_everywhere(prep, node)
            return
        if all(cid in self.ledgers[n].official or prep.official.get(n) == 0 for n in self.ledgers):
            prep.outcome = "committed"

    # -- driver -------------------------------------------------------------

    def _check(self) -> None:
        for ledger in self.ledgers.values():
            self.violations.extend(f"{self.now}: {p}" for p in ledger.check())
            for cid in ledger.official:
                prep = self.preparations.get(cid)
                if prep is None or not prep.accepted:
                    self.violations.append(f"{self.now}: official reservation for {cid} without accept")

    def run(self) -> dict:
        self.queue.run(on_event=self._check if self.check_every_event else None)
        for prep in self.preparations.values():
            if prep.outcome == "pending":
                prep.outcome = "declined" if prep.decision == "decline" else "expired"
        return self.preparations

    def ledger_text(self) -> str:
        return "\n".join(self.ledgers[n.name].dumps() for n in self.topo.nodes) + "\n"


def prepare(req: ApplicationRequest, topo: Topology, decision: str = "accept", ledgers: Optional[dict] = None,
            config: ProtocolConfig = ProtocolConfig(), amounts: Optional[dict] = None, seed: int = 0):
    """One handshake end to end; returns (Preparation, HandshakeSim)."""
    sim = HandshakeSim(topo, ledgers, config, seed)
    cid = sim.submit(req, decision, amounts=amounts)
    sim.run()
    return sim.preparations[cid], sim
