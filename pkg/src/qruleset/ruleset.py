"""RuleSet data model and generation of the teleportation RuleSets.

A RuleSet is an ordered tuple of Rules. Each Rule pairs a Condition (a
conjunction of clauses) with an Action (a list of abstract steps that the
IR compiler lowers into instructions). Rules are scanned top to bottom and
the first satisfied one fires.
"""

from __future__ import annotations

import json
import operator
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .model import (
    AppType,
    ApplicationRequest,
    DataType,
    PathInfo,
    class_policy,
    validate_request,
)

FIRST_LINK_ID = 1001
FIRST_E2E_ID = 2001

VARIABLES = ("shot", "count", "app", "id_l", "ID")

_OPS = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


class RuleSetError(Exception):
    pass


class UnsupportedDataType(RuleSetError):
    pass


class UnsupportedAppType(RuleSetError):
    pass


class PathTooShort(RuleSetError):
    pass


class UndeclaredVariable(RuleSetError, KeyError):
    pass


@dataclass(frozen=True)
class Compare:
    """``variable <op> value`` over the RuleSet's variable store."""

    var: str
    op: str
    value: int

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown comparison {self.op!r}")

    def holds(self, variables: Mapping[str, int]) -> bool:
        try:
            current = variables[self.var]
        except KeyError:
            raise UndeclaredVariable(self.var) from None
        return _OPS[self.op](current, self.value)

    def to_dict(self) -> dict:
        return {"compare": [self.var, self.op, self.value]}


@dataclass(frozen=True)
class Available:
    """At least ``minimum`` (and at most ``maximum``) units of a resource kind."""

    kind: str
    minimum: int = 1
    maximum: Optional[int] = None

    def holds(self, resources: Mapping[str, int]) -> bool:
        have = resources.get(self.kind, 0)
        if have < self.minimum:
            return False
        return self.maximum is None or have <= self.maximum

    def to_dict(self) -> dict:
        return {"available": [self.kind, self.minimum, self.maximum]}


Clause = Union[Compare, Available]


def _clause_from_dict(data: dict) -> Clause:
    if "compare" in data:
        return Compare(*data["compare"])
    if "available" in data:
        return Available(*data["available"])
    raise ValueError(f"unknown clause {data!r}")


@dataclass(frozen=True)
class ActionStep:
    kind: str
    params: dict = field(default_factory=dict, hash=False, compare=True)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}


@dataclass(frozen=True)
class Rule:
    index: int
    name: str
    condition: tuple
    action: tuple

    def satisfied(self, variables: Mapping[str, int], resources: Mapping[str, int]) -> bool:
        for clause in self.condition:
            if isinstance(clause, Compare):
                if not clause.holds(variables):
                    return False
            elif not clause.holds(resources):
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "name": self.name,
            "condition": [c.to_dict() for c in self.condition],
            "action": [s.to_dict() for s in self.action],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Rule":
        return cls(
            index=data["index"],
            name=data["name"],
            condition=tuple(_clause_from_dict(c) for c in data["condition"]),
            action=tuple(ActionStep(s["kind"], dict(s["params"])) for s in data["action"]),
        )


@dataclass(frozen=True)
class RuleSet:
    connection_id: int
    owner: str
    role: str  # client | repeater | server
    rules: tuple
    termination: Compare
    variables: dict
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for i, rule in enumerate(self.rules):
            if rule.index != i:
                raise ValueError(f"rule at position {i} has index {rule.index}")
            if not rule.condition or not rule.action:
                raise ValueError(f"rule {i} needs a non-empty condition and action")
        if self.termination.var not in self.variables:
            raise UndeclaredVariable(self.termination.var)

    def initial_variables(self) -> dict:
        return dict(self.variables)

    def to_dict(self) -> dict:
        return {
            "connection_id": self.connection_id,
            "owner": self.owner,
            "role": self.role,
            "termination": self.termination.to_dict(),
            "variables": dict(self.variables),
            "params": dict(self.params),
            "rules": [r.to_dict() for r in self.rules],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RuleSet":
        return cls(
            connection_id=data["connection_id"],
            owner=data["owner"],
            role=data["role"],
            rules=tuple(Rule.from_dict(r) for r in data["rules"]),
            termination=_clause_from_dict(data["termination"]),
            variables=dict(data["variables"]),
            params=dict(data["params"]),
        )

    @classmethod
    def loads(cls, text: str) -> "RuleSet":
        return cls.from_dict(json.loads(text))


def check_termination(rs: RuleSet, variables: Mapping[str, int]) -> bool:
    return rs.termination.holds(variables)


def next_rule(rs: RuleSet, variables: Mapping[str, int], resources: Mapping[str, int]) -> Optional[int]:
    """Index of the first Rule whose condition holds, or None."""
    for rule in rs.rules:
        if rule.satisfied(variables, resources):
            return rule.index
    return None


# --- generation ----------------------------------------------------------


def _rule(index, name, condition, *steps) -> Rule:
    return Rule(index, name, tuple(condition), tuple(steps))


def _end_node_link_rules(partner: str, far_end: str, fidelity: float) -> list[Rule]:
    return [
        _rule(0, "generate_link", [Available("heralded")],
              ActionStep("generate_entanglement", {"partner": partner, "notify": [partner, far_end],
                                                   "fidelity": fidelity, "id_var": "id_l"})),
        _rule(1, "swap_success", [Available("swap_success")],
              ActionStep("relabel", {"via": partner, "new_partner": far_end, "fidelity": fidelity})),
        _rule(2, "swap_fail", [Available("swap_fail")],
              ActionStep("free_link", {"via": partner})),
    ]


def _client_rules(req: ApplicationRequest, repeater: str, server: str) -> tuple:
    rps, shots, fid = req.resource_per_shot, req.num_shots, req.fidelity
    rules = _end_node_link_rules(repeater, server, fid)
    rules += [
        _rule(3, "swap_correction", [Available("correction_ready")],
              ActionStep("swap_correct", {"via": repeater, "partner": server, "mask": 2, "fidelity": fid})),
        _rule(4, "bell_measurement",
              [Compare("app", "==", 1), Compare("count", "<", rps), Available("e2e_ready"), Available("data_ready")],
              ActionStep("bell_measure", {"partner": server})),
        _rule(5, "prepare_data",
              [Compare("app", "==", 1), Compare("count", "<", rps), Available("data_ready", 0, 0),
               Available("free_memory")],
              ActionStep("prepare_data", {})),
        _rule(6, "complete_shot", [Compare("app", "==", 1), Compare("count", "==", rps)],
              ActionStep("update_counters", {"complete_shot": True, "clear_app": True})),
        _rule(7, "start_shot", [Compare("app", "==", 0), Compare("shot", "<", shots)],
              ActionStep("update_counters", {"set_app": True})),
    ]
    return tuple(rules)


def _server_rules(req: ApplicationRequest, repeater: str, client: str) -> tuple:
    rps, fid = req.resource_per_shot, req.fidelity
    rules = _end_node_link_rules(repeater, client, fid)
    rules += [
        _rule(3, "swap_correction", [Available("correction_ready")],
              ActionStep("swap_correct", {"via": repeater, "partner": client, "mask": 1, "fidelity": fid})),
        _rule(4, "receive_teleport", [Compare("count", "<", rps), Available("teleport_result")],
              ActionStep("apply_frame", {"partner": client})),
        _rule(5, "complete_shot", [Compare("count", "==", rps)],
              ActionStep("update_counters", {"complete_shot": True})),
    ]
    return tuple(rules)


def _repeater_rules(req: ApplicationRequest, client: str, server: str) -> tuple:
    rps, fid = req.resource_per_shot, req.fidelity
    return (
        _rule(0, "generate_link_left", [Available("heralded_left")],
              ActionStep("generate_entanglement", {"partner": client, "notify": [client, server],
                                                   "fidelity": fid, "id_var": "id_l"})),
        _rule(1, "generate_link_right", [Available("heralded_right")],
              ActionStep("generate_entanglement", {"partner": server, "notify": [client, server],
                                                   "fidelity": fid, "id_var": "id_l"})),
        _rule(2, "entanglement_swap",
              [Compare("count", "<", rps), Available("link_left"), Available("link_right")],
              ActionStep("swap", {"left": client, "right": server})),
        _rule(3, "complete_shot", [Compare("count", "==", rps)],
              ActionStep("update_counters", {"complete_shot": True})),
    )


def generate_rulesets(req: ApplicationRequest, path: PathInfo) -> dict[str, RuleSet]:
    """RuleSets for client, repeater and server of one teleportation connection.

    Pure function of ``(req, path)``; the result is keyed by node name in
    path order.
    """
    validate_request(req)
    if req.data_type is not DataType.BELL_PAIR:
        raise UnsupportedDataType(req.data_type.value)
    if req.app_type is not AppType.T:
        raise UnsupportedAppType(req.app_type.value)
    names = [hop.node for hop in path.node_hops]
    if len(names) < 3 or len(path.link_hops) < 2:
        raise PathTooShort(f"path has {len(names)} nodes, need client, repeater and server")
    client, repeater, server = names[0], names[1], names[-1]
    policy = class_policy(req.app_type)
    params = {
        "num_shots": req.num_shots,
        "resource_per_shot": req.resource_per_shot,
        "fidelity": req.fidelity,
        "app_type": req.app_type.value,
        "exec_mode": req.exec_mode.value,
        "recv_success_notification": policy.recv_success_notification.value,
        "pauli_frame_propagation": policy.pauli_frame_propagation.value,
        "client": client,
        "repeater": repeater,
        "server": server,
    }
    variables = {"shot": 0, "count": 0, "app": 0, "id_l": FIRST_LINK_ID, "ID": FIRST_E2E_ID}
    termination = Compare("shot", "==", req.num_shots)
    builders = (
        (client, "client", _client_rules(req, repeater, server)),
        (repeater, "repeater", _repeater_rules(req, client, server)),
        (server, "server", _server_rules(req, repeater, client)),
    )
    return {
        owner: RuleSet(req.connection_id, owner, role, rules, termination, dict(variables), dict(params))
        for owner, role, rules in builders
    }
