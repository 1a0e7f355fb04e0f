"""Link physics and the server-side execution-time estimator."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from ..model import ApplicationRequest, Link, PathInfo, Topology, total_resources

C_FIBER_M_PER_S = 2.0e8

# Fitted so that the exponential correction matches the simulator's
# coincidence loss at 32 km end to end (see calibrate_jitter_scale).
JITTER_SCALE_KM = 87.24


class ZeroRate(ArithmeticError):
    pass


class LossModel(str, enum.Enum):
    LINEAR = "Linear"
    JITTER = "JitterCorrected"


@dataclass(frozen=True)
class LinkModel:
    length_km: float
    attenuation_db_per_km: float = 0.2
    coupling_eff: float = 0.8
    detection_eff: float = 0.8
    bsa_success_factor: float = 0.5
    jitter_onset_km: float = 25.0
    jitter_scale_km: float = JITTER_SCALE_KM
    # simulator-side timing physics: detector jitter plus dispersion broadening
    coincidence_window_ps: float = 1000.0
    dispersion_ps_per_km: float = 25.0

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError("negative link length")
        for name in ("coupling_eff", "detection_eff", "bsa_success_factor"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name}={value} outside (0, 1]")

    @classmethod
    def from_link(cls, link: Link, **overrides) -> "LinkModel":
        return cls(
            length_km=link.length_km,
            attenuation_db_per_km=link.attenuation_db_per_km,
            coupling_eff=link.coupling_eff,
            detection_eff=link.detection_eff,
            **overrides,
        )


def transmittance(lm: LinkModel) -> float:
    # both arms reach the midpoint BSA; their losses multiply to the full length
    return 10.0 ** (-lm.attenuation_db_per_km * lm.length_km / 10.0)


def jitter_correction(lm: LinkModel, distance_km: Optional[float] = None) -> float:
    distance = lm.length_km if distance_km is None else distance_km
    if distance <= lm.jitter_onset_km:
        return 1.0
    return math.exp(-(distance - lm.jitter_onset_km) / lm.jitter_scale_km)


def link_success_probability(lm: LinkModel, model: LossModel | str = LossModel.LINEAR,
                             distance_km: Optional[float] = None) -> float:
    """Per-attempt heralding probability.

    ``distance_km`` is where the jitter correction is evaluated; the
    estimator passes the end-to-end distance, since that is the scale its
    onset threshold is stated in.
    """
    p = lm.bsa_success_factor * (lm.coupling_eff * lm.detection_eff) ** 2 * transmittance(lm)
    if LossModel(model) is LossModel.JITTER:
        p *= jitter_correction(lm, distance_km)
    return p


def coincidence_probability(lm: LinkModel) -> float:
    """Simulator ground truth: both photons land inside the coincidence window.

    Each photon's arrival time spreads by ``dispersion * half_length``; the
    difference of two such Gaussians must fall within +-window/2.
    """
    half = lm.length_km / 2.0
    sigma = lm.dispersion_ps_per_km * half
    if sigma <= 0:
        return 1.0
    return math.erf(lm.coincidence_window_ps / (4.0 * sigma))


def simulated_success_probability(lm: LinkModel) -> float:
    return link_success_probability(lm, LossModel.LINEAR) * coincidence_probability(lm)


def calibrate_jitter_scale(total_km: float = 32.0, template: Optional[LinkModel] = None) -> float:
    """Scale for which the exponential correction at ``total_km`` equals the
    simulator's coincidence loss on equal half-links."""
    template = template or LinkModel(length_km=total_km / 2)
    lm = replace(template, length_km=total_km / 2)
    c = coincidence_probability(lm)
    excess = total_km - lm.jitter_onset_km
    if excess <= 0 or c >= 1.0:
        raise ValueError("calibration point must lie beyond the jitter onset")
    return excess / -math.log(c)


def attempt_period(lm: LinkModel, c_fiber: float = C_FIBER_M_PER_S) -> float:
    """Photon to the midpoint plus herald back: one full link length of flight."""
    return lm.length_km * 1000.0 / c_fiber


def classical_delay(length_km: float, c_fiber: float = C_FIBER_M_PER_S) -> float:
    return length_km * 1000.0 / c_fiber


@dataclass(frozen=True)
class Timing:
    setup_time: float = 5.0
    gate_time: float = 1e-6
    message_time: float = 10e-6
    c_fiber: float = C_FIBER_M_PER_S


@dataclass(frozen=True)
class Estimate:
    attempt_periods: tuple
    success_probabilities: tuple
    link_rates: tuple
    pair_rate: float  # end-to-end pairs per second
    setup_time: float
    generation_time: float
    processing_time: float
    tail_time: float
    total_time: float
    model_used: LossModel
    per_resource_cost: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "attempt_periods": list(self.attempt_periods),
            "success_probabilities": list(self.success_probabilities),
            "link_rates": list(self.link_rates),
            "pair_rate": self.pair_rate,
            "setup_time": self.setup_time,
            "generation_time": self.generation_time,
            "processing_time": self.processing_time,
            "tail_time": self.tail_time,
            "total_time": self.total_time,
            "model_used": self.model_used.value,
        }


# rules fired once per resource / once per shot, by role
PER_RESOURCE_RULES = {"client": (0, 1, 3, 5, 4), "repeater": (0, 1, 2), "server": (0, 1, 3, 4)}
PER_SHOT_RULES = {"client": (6, 7), "repeater": (3,), "server": (5,)}


def success_path_cost(prog, timing: Timing) -> float:
    """Busy time of the action section along its success path."""
    from ..ir.isa import MESSAGE_OPCODES, QUANTUM_OPCODES

    sec = prog.action
    pc, cost, steps = 0, 0.0, 0
    while pc < len(sec.instructions) and steps < 10_000:
        steps += 1
        ins = sec.instructions[pc]
        if ins.opcode in QUANTUM_OPCODES:
            cost += timing.gate_time
        elif ins.opcode in MESSAGE_OPCODES:
            cost += timing.message_time
        if ins.opcode == "RET":
            break
        if ins.opcode in ("JMP", "BRANCH_IF_SUCCESS"):
            pc = sec.target(ins.operands[0])
        else:
            pc += 1
    return cost


def role_costs(req: ApplicationRequest, path: PathInfo, timing: Timing) -> dict:
    """(per-resource, per-shot) busy time for each role, from the compiled rules."""
    from ..ir.compiler import compile_ruleset
    from ..ruleset import generate_rulesets

    rulesets = generate_rulesets(req, path)
    costs = {}
    for rs in rulesets.values():
        programs = compile_ruleset(rs)
        per_res = sum(success_path_cost(programs[i], timing) for i in PER_RESOURCE_RULES[rs.role])
        per_shot = sum(success_path_cost(programs[i], timing) for i in PER_SHOT_RULES[rs.role])
        costs[rs.role] = (per_res, per_shot)
    return costs


def estimate_execution_time(
    req: ApplicationRequest,
    topo: Topology,
    link_models: Optional[Sequence[LinkModel]] = None,
    available: Optional[dict] = None,
    timing: Timing = Timing(),
    model: Optional[LossModel | str] = None,
) -> Estimate:
    """Expected wall time from connection start to the server's last shot."""
    links = list(link_models) if link_models is not None else [LinkModel.from_link(l) for l in topo.links]
    available = dict(available or {})
    mem = [available.get(n.name, n.memory) for n in topo.nodes]
    total_km = sum(lm.length_km for lm in links)
    if model is None:
        model = LossModel.LINEAR if total_km <= links[0].jitter_onset_km else LossModel.JITTER
    model = LossModel(model)

    periods, probs, rates = [], [], []
    for i, lm in enumerate(links):
        p = link_success_probability(lm, model, distance_km=total_km)
        if p <= 0.0:
            raise ZeroRate(f"link {i} success probability underflows to zero")
        period = attempt_period(lm, timing.c_fiber)
        pairs = min(mem[i], mem[i + 1])
        if pairs <= 0:
            raise ZeroRate(f"no memory on link {i}")
        periods.append(period)
        probs.append(p)
        rates.append(math.inf if period == 0 else pairs * p / period)

    resources = total_resources(req)
    # the repeater pool serves both links, so each end-to-end pair costs one slot-pair per side in turn
    pair_rate = min(rates) / 2.0
    generation = 0.0 if math.isinf(pair_rate) else resources / pair_rate

    path = PathInfo.from_topology(topo, {n.name: m for n, m in zip(topo.nodes, mem)})
    costs = role_costs(req, path, timing)
    processing = max(res * resources + shot * req.num_shots for res, shot in costs.values())

    d_links = [classical_delay(lm.length_km, timing.c_fiber) for lm in links]
    # last swap notice, then the final Bell-measurement outcome travelling end to end
    tail = max(d_links) + sum(d_links) + sum(c[0] for c in costs.values())
    total = timing.setup_time + max(generation, processing) + tail
    if math.isinf(pair_rate):
        pair_rate = resources / processing if processing > 0 else math.inf
    return Estimate(
        attempt_periods=tuple(periods),
        success_probabilities=tuple(probs),
        link_rates=tuple(rates),
        pair_rate=pair_rate,
        setup_time=timing.setup_time,
        generation_time=generation,
        processing_time=processing,
        tail_time=tail,
        total_time=total,
        model_used=model,
        per_resource_cost={role: c[0] for role, c in costs.items()},
    )
