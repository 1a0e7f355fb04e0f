import pytest
from hypothesis import given
from hypothesis import strategies as st

from qruleset.model import ExecMode, PathInfo, Topology
from qruleset.ruleset import generate_rulesets
from qruleset.scheduler import (
    ALLOWED,
    Decision,
    IllegalTransition,
    RuleSetInstance,
    Status,
    assign_priority,
    check_decision,
    decide,
    enforce_deadline,
    pick_next,
)

from conftest import teleport_request


def _instance(priority, arrival, cid=1, mode=ExecMode.RUS, deadline=None, shots=100):
    req = teleport_request(cid=cid, shots=shots)
    rs = generate_rulesets(req, PathInfo.from_topology(Topology.from_distance(16)))["repeater"]
    return RuleSetInstance(rs, rs.initial_variables(), priority, mode, deadline, arrival)


RUNNABLE = {"heralded_left": 1}


def test_priority_examples():
    minute = assign_priority(teleport_request(seconds=60))
    six_hours = assign_priority(teleport_request(seconds=6 * 3600))
    assert minute < six_hours
    assert assign_priority(teleport_request(seconds=60)) == minute
    p = [assign_priority(teleport_request(seconds=s)) for s in (1, 2, 3)]
    assert p[0] < p[1] < p[2]


@given(a=st.floats(1e-3, 1e7), b=st.floats(1e-3, 1e7))
def test_priority_monotone(a, b):
    if a <= b:
        assert assign_priority(teleport_request(seconds=a)) <= assign_priority(teleport_request(seconds=b))


def test_lower_number_wins():
    a, b = _instance(2, 1, cid=1), _instance(1, 2, cid=2)
    assert pick_next([a, b], lambda i: RUNNABLE) is b


def test_fifo_tie_break():
    a, b = _instance(1, 1, cid=1), _instance(1, 2, cid=2)
    assert pick_next([b, a], lambda i: RUNNABLE) is a


def test_no_head_of_line_blocking():
    urgent, lazy = _instance(1, 1, cid=1), _instance(3, 2, cid=2)
    res = {1: {}, 2: RUNNABLE}
    assert pick_next([urgent, lazy], lambda i: res[i.connection_id]) is lazy
    assert urgent.pending_rule is None and lazy.pending_rule == 0


def test_decide_logs_and_transitions():
    a, b = _instance(1, 1, cid=1), _instance(2, 2, cid=2)
    chosen, d = decide([a, b], lambda i: RUNNABLE, 1.5, "repeater")
    assert chosen is a and a.status is Status.RUNNING and b.status is Status.QUEUED
    assert str(d) == "1.500000000 repeater conn=1 rule=0 priority=1"
    assert check_decision(d) == []
    chosen, d = decide([a, b], lambda i: RUNNABLE if i is b else {}, 2.0, "repeater")
    assert chosen is b and a.status is Status.BLOCKED
    chosen, d = decide([a, b], lambda i: {}, 3.0, "repeater")
    assert chosen is None and str(d).endswith("conn=- idle")


def test_check_decision_flags_violations():
    cands = ((1, 1, 0, True), (2, 2, 1, True))
    assert check_decision(Decision(0.0, "n", 2, "x", cands))
    assert check_decision(Decision(0.0, "n", None, "idle", cands))
    assert check_decision(Decision(0.0, "n", None, "idle", ((1, 1, 0, False),))) == []


def test_transition_dag():
    inst = _instance(1, 0)
    inst.transition(Status.RUNNING)
    inst.transition(Status.BLOCKED)
    inst.transition(Status.RUNNING)
    inst.transition(Status.FINISHED)
    with pytest.raises(IllegalTransition):
        inst.transition(Status.RUNNING)
    assert ALLOWED[Status.EXPIRED] == set()
    with pytest.raises(IllegalTransition):
        _instance(1, 0).transition(Status.BLOCKED)


def test_tbe_needs_deadline_and_rus_has_none():
    with pytest.raises(ValueError):
        _instance(1, 0, mode=ExecMode.TBE)
    assert _instance(1, 0, deadline=5.0).deadline is None


def test_tbe_expires_with_partial_results():
    inst = _instance(1, 0, mode=ExecMode.TBE, deadline=10.0)
    inst.variables.update(shot=37, count=0)
    assert enforce_deadline(inst, 9.999) is None
    partial = enforce_deadline(inst, 10.0)
    assert inst.status is Status.EXPIRED
    assert (partial.shots, partial.resources) == (37, 0)


def test_rus_never_expires():
    inst = _instance(1, 0)
    inst.transition(Status.RUNNING)
    assert enforce_deadline(inst, 1e9) is None
    assert inst.status is Status.RUNNING


def test_finished_before_deadline_stays_finished():
    inst = _instance(1, 0, mode=ExecMode.TBE, deadline=10.0)
    inst.transition(Status.RUNNING)
    inst.transition(Status.FINISHED)
    assert enforce_deadline(inst, 10.0) is None
    assert inst.status is Status.FINISHED
