import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qruleset.model import (
    INT64_MAX,
    AppType,
    ApplicationRequest,
    DataType,
    ExecMode,
    Gate,
    Link,
    Node,
    PathInfo,
    RequestError,
    Topology,
    class_policy,
    mint_connection_id,
    total_resources,
    validate_request,
)

from conftest import teleport_request


def test_class_data_modes():
    assert class_policy("B").recv_success_notification is Gate.IMMEDIATE
    assert class_policy("B").pauli_frame_propagation is Gate.IMMEDIATE
    assert class_policy("C").recv_success_notification is Gate.WAIT
    assert class_policy("C").pauli_frame_propagation is Gate.IMMEDIATE
    assert class_policy(AppType.T) == class_policy("T")
    assert class_policy("T").recv_success_notification is Gate.WAIT
    assert class_policy("T").pauli_frame_propagation is Gate.WAIT


def test_valid_request_passes_through(request_t):
    assert validate_request(request_t) is request_t


def test_invalid_request_reports_every_violation():
    bad = ApplicationRequest.from_dict(dict(
        server_address="s", app_type="Q", data_type="Cat", fidelity=1.5,
        resource_per_shot=0, num_shots=-1, requested_execution_time=0, exec_mode="NOPE",
    ))
    with pytest.raises(RequestError) as exc:
        validate_request(bad)
    codes = exc.value.codes
    for code in ("UnknownAppType", "UnknownDataType", "UnknownExecMode", "FidelityOutOfRange",
                 "NonPositiveDuration"):
        assert code in codes
    assert codes.count("NonPositiveCount") == 2


@pytest.mark.parametrize("fid", [0.0, -0.1, 1.01])
def test_fidelity_bounds(fid):
    with pytest.raises(RequestError):
        validate_request(teleport_request(fidelity=fid))


def test_fidelity_one_is_allowed():
    validate_request(teleport_request(fidelity=1.0))


def test_bool_is_not_a_count():
    with pytest.raises(RequestError):
        validate_request(teleport_request(rps=True))


def test_request_dict_roundtrip(request_t):
    again = ApplicationRequest.from_dict(request_t.to_dict())
    assert again == request_t
    assert again.app_type is AppType.T and again.exec_mode is ExecMode.RUS


def test_with_connection_id(request_t):
    other = request_t.with_connection_id(7)
    assert other.connection_id == 7 and request_t.connection_id == 42


def test_total_resources_overflow():
    assert total_resources(teleport_request(rps=3, shots=5)) == 15
    big = teleport_request(rps=INT64_MAX, shots=2)
    with pytest.raises(OverflowError):
        total_resources(big)


def test_connection_id_is_64_bit():
    rng = random.Random(3)
    ids = {mint_connection_id(rng) for _ in range(100)}
    assert len(ids) == 100
    assert all(0 <= i < 2**64 for i in ids)


def test_topology_from_distance():
    topo = Topology.from_distance(24)
    assert topo.total_km == 24
    assert [l.length_km for l in topo.links] == [12, 12]
    assert (topo.client.memory, topo.repeater.memory, topo.server.memory) == (10, 7, 10)
    assert topo.node("repeater").name == "repeater"
    with pytest.raises(KeyError):
        topo.node("nowhere")


@pytest.mark.parametrize("nodes,links", [
    ((Node("a", 1), Node("b", 1)), (Link(1),)),
    ((Node("a", -1), Node("b", 1), Node("c", 1)), (Link(1), Link(1))),
    ((Node("a", 1), Node("b", 1), Node("c", 1)), (Link(0), Link(1))),
    ((Node("a", 1), Node("b", 1), Node("c", 1)), (Link(1, coupling_eff=0), Link(1))),
])
def test_topology_rejects_bad_shapes(nodes, links):
    with pytest.raises(ValueError):
        Topology(nodes, links)


def test_pathinfo_order_and_availability(topo16):
    path = PathInfo.from_topology(topo16, {"repeater": 3})
    assert [h.node for h in path.node_hops] == ["client", "repeater", "server"]
    assert len(path.link_hops) == 2
    assert path.available("repeater") == 3
    assert path.available("client") == 10
    kinds = [type(h).__name__ for h in path.hops]
    assert kinds == ["NodeHop", "LinkHop", "NodeHop", "LinkHop", "NodeHop"]


def test_documented_examples_valid():
    small = ApplicationRequest("qc002", AppType.T, DataType.BELL_PAIR, 0.95, 1, 100, 60.0)
    large = ApplicationRequest("qc001", AppType.T, DataType.BELL_PAIR, 0.8, 10000, 4_000_000, 6 * 3600.0)
    assert validate_request(small) is small
    assert validate_request(large) is large
    assert total_resources(large) == 4 * 10**10
    assert total_resources(small) == 100
    assert total_resources(teleport_request(rps=1, shots=1)) == 1


def test_fidelity_above_one_code():
    with pytest.raises(RequestError) as exc:
        validate_request(teleport_request(fidelity=1.2))
    assert exc.value.codes == ["FidelityOutOfRange"]


def test_class_policy_is_constant():
    for cls in "BCT":
        assert class_policy(cls) == class_policy(cls)


CORRUPTIONS = {
    "app_type": "X",
    "data_type": "Qudit",
    "exec_mode": "SOMETIMES",
    "fidelity": 0.0,
    "resource_per_shot": 0,
    "num_shots": -3,
    "requested_execution_time": -1.0,
}


@settings(max_examples=200, deadline=None)
@given(field=st.sampled_from(sorted(CORRUPTIONS)), rps=st.integers(1, 50), shots=st.integers(1, 50),
       fid=st.floats(0.01, 1.0))
def test_any_single_field_corruption_rejected(field, rps, shots, fid):
    good = teleport_request(rps=rps, shots=shots, fidelity=fid)
    validate_request(good)
    data = {**good.to_dict(), field: CORRUPTIONS[field]}
    with pytest.raises(RequestError) as exc:
        validate_request(ApplicationRequest.from_dict(data))
    assert len(exc.value.codes) == 1


@given(a=st.integers(1, 10**6), b=st.integers(1, 10**6))
def test_total_resources_commutes(a, b):
    assert total_resources(teleport_request(rps=a, shots=b)) == total_resources(teleport_request(rps=b, shots=a))
