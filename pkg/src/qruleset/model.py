"""Domain types shared across the toolchain: requests, classes, topology, records."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field, replace
from typing import Optional

INT64_MAX = 2**63 - 1


class AppType(str, enum.Enum):
    B = "B"
    C = "C"
    T = "T"


class DataType(str, enum.Enum):
    BELL_PAIR = "BellPair"
    GHZ = "GHZ"


class ExecMode(str, enum.Enum):
    TBE = "TBE"
    RUS = "RUS"


class Gate(str, enum.Enum):
    WAIT = "Wait"
    IMMEDIATE = "Immediate"


@dataclass(frozen=True)
class AppClassPolicy:
    recv_success_notification: Gate
    pauli_frame_propagation: Gate


_CLASS_TABLE = {
    AppType.B: AppClassPolicy(Gate.IMMEDIATE, Gate.IMMEDIATE),
    AppType.C: AppClassPolicy(Gate.WAIT, Gate.IMMEDIATE),
    AppType.T: AppClassPolicy(Gate.WAIT, Gate.WAIT),
}


def class_policy(app_type: AppType | str) -> AppClassPolicy:
    """Gating policy for an application class (B, C or T)."""
    return _CLASS_TABLE[AppType(app_type)]


class RequestError(ValueError):
    """Raised by :func:`validate_request`; ``violations`` lists every failed constraint."""

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        super().__init__("; ".join(f"{code}: {msg}" for code, msg in violations))

    @property
    def codes(self) -> list[str]:
        return [code for code, _ in self.violations]


def mint_connection_id(rng: Optional[random.Random] = None) -> int:
    rng = rng or random.Random()
    return rng.getrandbits(64)


@dataclass(frozen=True)
class ApplicationRequest:
    server_address: str
    app_type: AppType
    data_type: DataType
    fidelity: float
    resource_per_shot: int
    num_shots: int
    requested_execution_time: float  # seconds
    exec_mode: ExecMode = ExecMode.RUS
    client_address: str = "client"
    connection_id: int = 0

    def with_connection_id(self, connection_id: int) -> "ApplicationRequest":
        return replace(self, connection_id=connection_id)

    def to_dict(self) -> dict:
        return {
            "server_address": self.server_address,
            "app_type": self.app_type.value,
            "data_type": self.data_type.value,
            "fidelity": self.fidelity,
            "resource_per_shot": self.resource_per_shot,
            "num_shots": self.num_shots,
            "requested_execution_time": self.requested_execution_time,
            "exec_mode": self.exec_mode.value,
            "client_address": self.client_address,
            "connection_id": self.connection_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ApplicationRequest":
        """Build a request from plain values; enum fields are coerced and
        validated by :func:`validate_request`, not here."""
        data = dict(data)
        for key, enum_cls in (("app_type", AppType), ("data_type", DataType), ("exec_mode", ExecMode)):
            if key in data:
                try:
                    data[key] = enum_cls(data[key])
                except ValueError:
                    pass  # left raw so validate_request can report it
        return cls(**data)


def validate_request(req: ApplicationRequest) -> ApplicationRequest:
    violations: list[tuple[str, str]] = []
    if not isinstance(req.app_type, AppType):
        violations.append(("UnknownAppType", f"app_type {req.app_type!r}"))
    if not isinstance(req.data_type, DataType):
        violations.append(("UnknownDataType", f"data_type {req.data_type!r}"))
    if not isinstance(req.exec_mode, ExecMode):
        violations.append(("UnknownExecMode", f"exec_mode {req.exec_mode!r}"))
    if not (isinstance(req.fidelity, (int, float)) and 0.0 < req.fidelity <= 1.0):
        violations.append(("FidelityOutOfRange", f"fidelity {req.fidelity!r} not in (0, 1]"))
    for name in ("resource_per_shot", "num_shots"):
        value = getattr(req, name)
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            violations.append(("NonPositiveCount", f"{name} {value!r} < 1"))
    if not (isinstance(req.requested_execution_time, (int, float)) and req.requested_execution_time > 0):
        violations.append(("NonPositiveDuration", f"requested_execution_time {req.requested_execution_time!r}"))
    if violations:
        raise RequestError(violations)
    return req


def total_resources(req: ApplicationRequest) -> int:
    total = req.resource_per_shot * req.num_shots
    if total > INT64_MAX:
        raise OverflowError(f"total resources {total} exceed 64-bit range")
    return total


@dataclass(frozen=True)
class Node:
    name: str
    memory: int


@dataclass(frozen=True)
class Link:
    length_km: float
    attenuation_db_per_km: float = 0.2
    coupling_eff: float = 0.8
    detection_eff: float = 0.8


@dataclass(frozen=True)
class Topology:
    """Client, aggregated repeater, server; ``links[i]`` joins ``nodes[i]`` and ``nodes[i+1]``."""

    nodes: tuple[Node, Node, Node]
    links: tuple[Link, Link]

    def __post_init__(self):
        if len(self.nodes) != 3 or len(self.links) != 2:
            raise ValueError("topology must have exactly 3 nodes and 2 links")
        for node in self.nodes:
            if node.memory < 0:
                raise ValueError(f"negative memory at {node.name}")
        for link in self.links:
            if link.length_km <= 0:
                raise ValueError("link length must be positive")
            for eff in (link.coupling_eff, link.detection_eff):
                if not 0.0 < eff <= 1.0:
                    raise ValueError("efficiencies must lie in (0, 1]")

    @classmethod
    def from_distance(
        cls,
        total_km: float,
        memories: tuple[int, int, int] = (10, 7, 10),
        names: tuple[str, str, str] = ("client", "repeater", "server"),
        **link_params,
    ) -> "Topology":
        half = total_km / 2.0
        nodes = tuple(Node(n, m) for n, m in zip(names, memories))
        link = Link(half, **link_params)
        return cls(nodes, (link, link))  # type: ignore[arg-type]

    @property
    def client(self) -> Node:
        return self.nodes[0]

    @property
    def repeater(self) -> Node:
        return self.nodes[1]

    @property
    def server(self) -> Node:
        return self.nodes[2]

    @property
    def total_km(self) -> float:
        return sum(link.length_km for link in self.links)

    def node(self, name: str) -> Node:
        for node in self.nodes:
            if node.name == name:
                return node
        raise KeyError(name)


@dataclass(frozen=True)
class EntanglementRecord:
    entanglement_id: int
    local_qubit: int
    partner_address: str
    partner_qubit: int
    fidelity: float
    created_at: float


@dataclass(frozen=True)
class LinkHop:
    length_km: float
    attenuation_db_per_km: float
    coupling_eff: float
    detection_eff: float


@dataclass(frozen=True)
class NodeHop:
    node: str
    available_memory: int


@dataclass
class PathInfo:
    """Hop records appended in traversal order (node, link, node, link, node)."""

    hops: list = field(default_factory=list)

    def add_node(self, node: str, available_memory: int) -> None:
        self.hops.append(NodeHop(node, available_memory))

    def add_link(self, link: Link) -> None:
        self.hops.append(
            LinkHop(link.length_km, link.attenuation_db_per_km, link.coupling_eff, link.detection_eff)
        )

    @property
    def node_hops(self) -> list[NodeHop]:
        return [h for h in self.hops if isinstance(h, NodeHop)]

    @property
    def link_hops(self) -> list[LinkHop]:
        return [h for h in self.hops if isinstance(h, LinkHop)]

    def available(self, node: str) -> int:
        for hop in self.node_hops:
            if hop.node == node:
                return hop.available_memory
        raise KeyError(node)

    @classmethod
    def from_topology(cls, topo: Topology, available: Optional[dict[str, int]] = None) -> "PathInfo":
        available = available or {}
        path = cls()
        for i, node in enumerate(topo.nodes):
            path.add_node(node.name, available.get(node.name, node.memory))
            if i < len(topo.links):
                path.add_link(topo.links[i])
        return path
