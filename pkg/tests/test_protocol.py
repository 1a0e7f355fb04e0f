import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qruleset.messages import Message, MessageKind
from qruleset.model import ExecMode, Topology
from qruleset.protocol import (
    NoAvailableMemory,
    ProtocolConfig,
    ResourceLedger,
    TentativeExpired,
    confirm_qubits,
    decide_and_commit,
    expire_tentatives,
    ledgers_for,
    prepare,
    propagate_request,
)

from conftest import teleport_request
from scenarios import handshake_scenario, replay_alone

RUS = ExecMode.RUS


def full_ledgers(topo):
    # whole memory usable by one application, all in the RUS partition
    return ledgers_for(topo, tbe_fraction=0.0, cap_fraction=1.0)


def test_partition_split():
    l = ResourceLedger("n", 7, tbe_fraction=0.5)
    assert l.tbe_capacity + l.rus_capacity == 7
    assert l.per_app_cap == 3


def test_propagation_records_repeater_seven():
    topo = Topology.from_distance(16)
    ledgers = full_ledgers(topo)
    path, holds = propagate_request(teleport_request(), topo, ledgers)
    assert path.available("repeater") == 7
    assert ledgers["repeater"].tentative[42][0] == 7
    assert holds["client"] == (10, 0.0)
    assert holds["server"][1] == pytest.approx(16e3 / 2e8)


def test_propagation_exhaustion_releases_upstream():
    topo = Topology.from_distance(16, memories=(10, 0, 10))
    ledgers = full_ledgers(topo)
    before = {n: l.dumps() for n, l in ledgers.items()}
    with pytest.raises(NoAvailableMemory) as exc:
        propagate_request(teleport_request(), topo, ledgers)
    assert exc.value.node == "repeater"
    assert {n: l.dumps() for n, l in ledgers.items()} == before


def test_two_requests_share_repeater():
    topo = Topology.from_distance(16)
    ledgers = ledgers_for(topo, tbe_fraction=0.0, cap_fraction=0.5)
    propagate_request(teleport_request(cid=1), topo, ledgers)
    propagate_request(teleport_request(cid=2), topo, ledgers)
    rep = ledgers["repeater"]
    assert sum(a for a, _, _ in rep.tentative.values()) <= 7
    assert rep.check() == []


def test_confirm_qubits():
    ledger = ResourceLedger("server", 10, tbe_fraction=0.0, cap_fraction=1.0)
    assert confirm_qubits(ledger, teleport_request()) == 10
    full = ResourceLedger("server", 10, tbe_fraction=0.0, cap_fraction=1.0)
    full.hold(1, 10, math.inf, RUS)
    full.commit(1, 10, 0.0)
    with pytest.raises(NoAvailableMemory):
        confirm_qubits(full, teleport_request())
    partial = ResourceLedger("server", 10, tbe_fraction=0.0, cap_fraction=1.0)
    partial.hold(1, 6, math.inf, RUS)
    assert confirm_qubits(partial, teleport_request()) == 4


def test_accept_commits_server_amount():
    topo = Topology.from_distance(16)
    ledgers = full_ledgers(topo)
    propagate_request(teleport_request(), topo, ledgers)
    assert decide_and_commit("accept", 42, ledgers, {"repeater": 5}) == "committed"
    rep = ledgers["repeater"]
    assert rep.official[42] == (5, RUS)
    assert 42 not in rep.tentative
    assert rep.free[RUS] == 2


def test_decline_restores_ledgers():
    topo = Topology.from_distance(16)
    ledgers = full_ledgers(topo)
    before = {n: l.dumps() for n, l in ledgers.items()}
    propagate_request(teleport_request(), topo, ledgers)
    assert decide_and_commit("decline", 42, ledgers) == "released"
    assert {n: l.dumps() for n, l in ledgers.items()} == before


def test_accept_after_expiry():
    topo = Topology.from_distance(16)
    ledgers = full_ledgers(topo)
    propagate_request(teleport_request(), topo, ledgers)
    with pytest.raises(TentativeExpired):
        decide_and_commit("accept", 42, ledgers, now=1e6)
    assert all(not l.tentative and not l.official for l in ledgers.values())


def test_expiry_boundary():
    l = ResourceLedger("n", 10)
    l.hold(1, 2, 5.0, RUS)
    l.hold(2, 2, 6.0, RUS)
    assert expire_tentatives(l, 5.0) == [1]
    assert list(l.tentative) == [2]


def test_timeout_formula():
    cfg = ProtocolConfig()
    assert cfg.timeout(1e-4) == pytest.approx(0.01 + 1.0 + 2e-4 + 1e-3)


def test_message_trace_line():
    msg = Message(MessageKind.APP_REQUEST, 9, "client", "repeater", {"x": 1}, 0.0)
    assert msg.trace_line(0.5) == "0.500000000 AppRequest client->repeater conn=9"


def test_handshake_accept():
    topo = Topology.from_distance(16)
    prep, sim = prepare(teleport_request(), topo, "accept", full_ledgers(topo), amounts={"repeater": 5})
    assert prep.outcome == "committed"
    kinds = [line.split()[1] for line in sim.trace]
    assert kinds[-2:] == ["RuleSetDistribution", "RuleSetDistribution"]
    assert kinds.index("EstimateNotice") > kinds.index("AppRequest")
    assert prep.rulesets_created_at <= prep.estimate_sent_at
    assert prep.official == {"repeater": 5, "server": 10, "client": 10}
    assert sim.violations == []
    assert all("conn=42" in line for line in sim.trace if " conn=" in line)


@pytest.mark.parametrize("decision", ["decline", "timeout"])
def test_handshake_rollback(decision):
    topo = Topology.from_distance(16)
    ledgers = full_ledgers(topo)
    before = {n: l.dumps() for n, l in ledgers.items()}
    prep, sim = prepare(teleport_request(), topo, decision, ledgers)
    assert prep.outcome == ("declined" if decision == "decline" else "expired")
    assert {n: l.dumps() for n, l in ledgers.items()} == before
    assert sim.violations == []
    if decision == "timeout":
        assert any(" Expire " in line for line in sim.trace)


def test_handshake_rejects_without_memory():
    topo = Topology.from_distance(16, memories=(10, 0, 10))
    prep, sim = prepare(teleport_request(), topo, "accept", full_ledgers(topo))
    assert prep.outcome == "rejected"
    assert all(not l.tentative and not l.official for l in sim.ledgers.values())


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_random_handshakes_keep_ledger_invariants(seed):
    sim, preps, pristine, setup = handshake_scenario(random.Random(seed))
    assert sim.violations == []
    for cid in preps:
        if preps[cid].outcome != "committed":
            for ledger in sim.ledgers.values():
                assert cid not in ledger.tentative and cid not in ledger.official
    if all(p.outcome != "committed" for p in preps.values()):
        assert {n: l.dumps() for n, l in sim.ledgers.items()} == pristine
    for cid, (_, decision, _) in setup[2].items():
        if decision != "accept":
            prep, solo, before = replay_alone(setup, cid)
            assert {n: l.dumps() for n, l in solo.ledgers.items()} == before
