from pathlib import Path

import pytest

from qruleset.model import AppType, ApplicationRequest, DataType, ExecMode, PathInfo, Topology
from qruleset.ruleset import generate_rulesets

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def listing_text():
    return (FIXTURES / "listing_bell_measurement.qir").read_text()


def teleport_request(rps=1, shots=100, fidelity=0.95, seconds=60.0, mode=ExecMode.RUS, cid=42):
    return ApplicationRequest(
        server_address="server",
        app_type=AppType.T,
        data_type=DataType.BELL_PAIR,
        fidelity=fidelity,
        resource_per_shot=rps,
        num_shots=shots,
        requested_execution_time=seconds,
        exec_mode=mode,
        connection_id=cid,
    )


@pytest.fixture
def request_t():
    return teleport_request()


@pytest.fixture
def topo16():
    return Topology.from_distance(16)


@pytest.fixture
def rulesets(request_t, topo16):
    return generate_rulesets(request_t, PathInfo.from_topology(topo16))
