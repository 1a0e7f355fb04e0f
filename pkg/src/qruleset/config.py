"""Scenario configuration files (YAML).

Every block is optional; missing fields take the defaults below, which
match the reference evaluation settings. Unknown keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .model import ApplicationRequest, Link, Node, RequestError, Topology, validate_request
from .sim.engine import SimConfig
from .sim.physics import JITTER_SCALE_KM, LinkModel, Timing


class ConfigError(ValueError):
    pass


@dataclass
class TopologyConfig:
    distance_km: float = 16.0
    lengths_km: Optional[list] = None  # explicit per-link lengths override the equal split
    memories: dict = field(default_factory=lambda: {"client": 10, "repeater": 7, "server": 10})
    attenuation_db_per_km: float = 0.2
    coupling_eff: float = 0.8
    detection_eff: float = 0.8
    bsa_success_factor: float = 0.5
    jitter_onset_km: float = 25.0
    jitter_scale_km: float = JITTER_SCALE_KM


@dataclass
class RequestConfig:
    server_address: str = "server"
    app_type: str = "T"
    data_type: str = "BellPair"
    fidelity: float = 0.95
    resource_per_shot: int = 1
    num_shots: int = 1000
    requested_execution_time: float = 60.0
    exec_mode: str = "RUS"
    client_address: str = "client"
    connection_id: int = 1


@dataclass
class SimulationConfig:
    seeds: list = field(default_factory=lambda: list(range(20)))
    sweep_km: list = field(default_factory=lambda: [8, 16, 24, 32])
    model: str = "auto"  # auto | Linear | JitterCorrected
    setup_time: float = 5.0
    gate_time: float = 1e-6
    message_time: float = 10e-6
    c_fiber: float = 2.0e8
    coincidence: bool = True
    swap_failure_prob: float = 0.0
    memory_lifetime: Optional[float] = None
    max_estimated_time: float = 3600.0  # larger estimates are reported as unreachable


@dataclass
class ProtocolSection:
    decision: str = "accept"  # accept | decline | timeout
    tbe_fraction: float = 0.5
    cap_fraction: float = 0.5
    estimate_time: float = 0.010
    decision_allowance: float = 1.0
    decision_time: float = 0.001
    amounts: dict = field(default_factory=dict)


@dataclass
class OutputConfig:
    dir: str = "out"


@dataclass
class ScenarioConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    request: RequestConfig = field(default_factory=RequestConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    protocol: ProtocolSection = field(default_factory=ProtocolSection)
    output: OutputConfig = field(default_factory=OutputConfig)

    def build_topology(self, distance_km: Optional[float] = None) -> Topology:
        t = self.topology
        names = (self.request.client_address, "repeater", self.request.server_address)
        mem = [int(t.memories.get(role, 0)) for role in ("client", "repeater", "server")]
        if distance_km is None and t.lengths_km is not None:
            lengths = [float(x) for x in t.lengths_km]
            if len(lengths) != 2:
                raise ConfigError("topology.lengths_km needs exactly two entries")
        else:
            total = float(t.distance_km if distance_km is None else distance_km)
            lengths = [total / 2, total / 2]
        links = tuple(
            Link(length, t.attenuation_db_per_km, t.coupling_eff, t.detection_eff) for length in lengths
        )
        try:
            return Topology(tuple(Node(n, m) for n, m in zip(names, mem)), links)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def link_models(self, topo: Topology) -> list:
        t = self.topology
        return [
            LinkModel.from_link(l, bsa_success_factor=t.bsa_success_factor, jitter_onset_km=t.jitter_onset_km,
                                jitter_scale_km=t.jitter_scale_km)
            for l in topo.links
        ]

    def build_request(self) -> ApplicationRequest:
        data = {f.name: getattr(self.request, f.name) for f in fields(RequestConfig)}
        try:
            return validate_request(ApplicationRequest.from_dict(data))
        except RequestError as exc:
            raise ConfigError(f"invalid request: {', '.join(exc.codes)}") from exc

    def timing(self) -> Timing:
        s = self.simulation
        return Timing(s.setup_time, s.gate_time, s.message_time, s.c_fiber)

    def sim_config(self) -> SimConfig:
        s = self.simulation
        return SimConfig(timing=self.timing(), coincidence=s.coincidence, swap_failure_prob=s.swap_failure_prob,
                         memory_lifetime=s.memory_lifetime, keep_trace=False)

    def model_override(self) -> Optional[str]:
        model = self.simulation.model
        if model == "auto":
            return None
        if model not in ("Linear", "JitterCorrected"):
            raise ConfigError(f"unknown model {model!r}")
        return model


_SECTIONS = {
    "topology": TopologyConfig,
    "request": RequestConfig,
    "simulation": SimulationConfig,
    "protocol": ProtocolSection,
    "output": OutputConfig,
}


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return cls(**data)


def from_dict(data: Optional[dict]) -> ScenarioConfig:
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    cfg = ScenarioConfig(**{name: _build(cls, data.get(name), name) for name, cls in _SECTIONS.items()})
    if cfg.protocol.decision not in ("accept", "decline", "timeout"):
        raise ConfigError(f"unknown decision {cfg.protocol.decision!r}")
    cfg.model_override()
    return cfg


def load(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    return from_dict(data)
