import pytest

from qruleset.model import ExecMode, PathInfo, Topology
from qruleset.ruleset import generate_rulesets
from qruleset.scheduler import check_decision
from qruleset.sim.engine import DeadlockedAt, SimConfig, Simulator, run_connection
from qruleset.sim.physics import LinkModel, estimate_execution_time

import oracles
from conftest import teleport_request

PERFECT = dict(attenuation_db_per_km=0.0, coupling_eff=1.0, detection_eff=1.0)


def perfect(km):
    topo = Topology.from_distance(km, **PERFECT)
    return topo, [LinkModel.from_link(l, bsa_success_factor=1.0) for l in topo.links]


def rulesets_for(topo, **kw):
    return generate_rulesets(teleport_request(**kw), PathInfo.from_topology(topo))


DETERMINISTIC = SimConfig(coincidence=False)


@pytest.mark.parametrize("km", [2.0, 16.0, 40.0])
def test_single_pair_closed_form(km):
    topo, lms = perfect(km)
    report = run_connection(rulesets_for(topo, rps=1, shots=1), topo, lms, config=DETERMINISTIC)
    link_delay = km / 2 * 1000 / 2e8
    assert report.elapsed == pytest.approx(oracles.single_pair_time(5.0, link_delay), abs=1e-12)
    assert report.shots == 1 and report.resources == 1


def test_same_seed_same_report():
    topo = Topology.from_distance(16)
    rs = rulesets_for(topo, rps=20, shots=3)
    a = run_connection(rs, topo, seed=7)
    b = run_connection(rs, topo, seed=7)
    assert a.to_text() == b.to_text()
    assert a.trace == b.trace
    c = run_connection(rs, topo, seed=8)
    assert c.elapsed != a.elapsed


def test_counters_exact_at_every_completion():
    topo = Topology.from_distance(8)
    report = run_connection(rulesets_for(topo, rps=3, shots=20), topo, seed=1)
    assert report.violations == []
    assert report.shots == 20 and report.resources == 60
    servers = [c for c in report.shot_completions if c[1] == "server"]
    assert [c[2] for c in servers] == list(range(1, 21))
    assert all(c[3] == 3 for c in report.shot_completions)
    for status in report.connections[42]["status"].values():
        assert status == "Finished"


def test_teleport_bookkeeping():
    topo = Topology.from_distance(8)
    report = run_connection(rulesets_for(topo, rps=5, shots=40), topo, seed=3)
    assert report.teleport_matches == 200 and report.teleport_mismatches == 0
    assert report.frame_before_outcome == 0
    assert {m for _, m in report.outcome_combos} == {0, 1, 2, 3}


def test_message_trace_format():
    topo, lms = perfect(2)
    report = run_connection(rulesets_for(topo, rps=1, shots=1), topo, lms, config=DETERMINISTIC)
    kinds = [line.split()[1] for line in report.trace]
    assert "SwapResult" in kinds and "MeasureResult" in kinds
    assert all(line.endswith("conn=42") for line in report.trace)


def test_deadlock_reported():
    topo = Topology.from_distance(2)
    with pytest.raises(DeadlockedAt) as exc:
        run_connection(rulesets_for(topo, rps=2, shots=2), topo, reservations={"repeater": 1})
    assert "42" in exc.value.snapshot


def test_reservations_cannot_exceed_memory():
    topo = Topology.from_distance(2)
    sim = Simulator(topo)
    with pytest.raises(ValueError):
        sim.add_connection(rulesets_for(topo), reservations={"repeater": 8})


def test_swap_failures_are_retried():
    topo = Topology.from_distance(8)
    report = run_connection(rulesets_for(topo, rps=4, shots=10), topo, seed=2,
                            config=SimConfig(swap_failure_prob=0.3))
    assert report.shots == 10 and report.violations == []
    assert report.connections[42]["swaps"] == 40
    notices = sum(" SwapResult " in line for line in report.trace)
    assert notices > 2 * 40  # failed swaps notify both ends as well


def test_decay_discards_and_regenerates():
    topo = Topology.from_distance(16)
    rs = rulesets_for(topo, rps=10, shots=2)
    base = run_connection(rs, topo, seed=4)
    decayed = run_connection(rs, topo, seed=4, config=SimConfig(memory_lifetime=0.001, generation_fidelity=1.0))
    assert decayed.shots == 2 and decayed.violations == []
    assert decayed.elapsed > base.elapsed
    notices = sum(" SwapResult repeater->" in line for line in decayed.trace)
    assert notices > 2 * decayed.connections[42]["swaps"]  # discarded records notify their end


def _tbe_run(deadline, topo, lms):
    rs = rulesets_for(topo, rps=1, shots=100, mode=ExecMode.TBE)
    return run_connection(rs, topo, lms, config=DETERMINISTIC, deadline=deadline)


def test_tbe_expires_with_server_count():
    topo, lms = perfect(16)
    lo, hi = 5.0, 6.0
    # bisect for a deadline that lands after the 37th completed shot
    for _ in range(60):
        mid = (lo + hi) / 2
        shots = _tbe_run(mid, topo, lms).connections[42]["shots"]
        if shots < 37:
            lo = mid
        elif shots > 37:
            hi = mid
        else:
            break
    report = _tbe_run(mid, topo, lms)
    assert report.partial_results[0]["shots"] == 37
    assert set(report.connections[42]["status"].values()) == {"Expired"}
    assert report.partial_results[0]["time"] == pytest.approx(mid)
    assert any(" PartialResults server->client" in line for line in report.trace)


def test_rus_ignores_deadline():
    topo, lms = perfect(16)
    rs = rulesets_for(topo, rps=1, shots=5)
    report = run_connection(rs, topo, lms, config=DETERMINISTIC, deadline=5.0)
    assert report.shots == 5 and report.partial_results == []


def test_two_connections_share_nodes():
    topo = Topology.from_distance(8)
    sim = Simulator(topo, seed=5)
    a = generate_rulesets(teleport_request(cid=1, rps=2, shots=5), PathInfo.from_topology(topo))
    b = generate_rulesets(teleport_request(cid=2, rps=2, shots=5), PathInfo.from_topology(topo))
    sim.add_connection(a, {"client": 5, "repeater": 4, "server": 5}, priority=1)
    sim.add_connection(b, {"client": 5, "repeater": 3, "server": 5}, priority=2)
    report = sim.run()
    assert {c: v["shots"] for c, v in report.connections.items()} == {1: 5, 2: 5}
    assert report.violations == []
    assert all(check_decision(d) == [] for d in sim.decisions)


def test_estimator_consistency_in_lossless_limit():
    topo, lms = perfect(0.02)
    req = teleport_request(rps=1000, shots=1)
    rs = generate_rulesets(req, PathInfo.from_topology(topo))
    measured = run_connection(rs, topo, lms, config=SimConfig(coincidence=False, keep_trace=False)).elapsed
    est = estimate_execution_time(req, topo, lms)
    ratio = (measured - 5.0) / (est.total_time - 5.0)
    assert ratio == pytest.approx(1.0, abs=0.01)


def test_report_text_roundtrips_as_json():
    import json
    topo, lms = perfect(2)
    report = run_connection(rulesets_for(topo, rps=1, shots=2), topo, lms, config=DETERMINISTIC)
    data = json.loads(report.to_text())
    assert data["connections"]["42"]["shots"] == 2
