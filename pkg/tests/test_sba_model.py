import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import traces
from nwdaf_lab.sba_model import (
    LEGAL_TRANSITIONS,
    IllegalTransition,
    NfProfile,
    NfStatus,
    NfType,
    OtherNfType,
    OtherProtocol,
    PacketRecord,
    Protocol,
    Topology,
    Trace,
    check_transition,
    parse_nf_type,
    parse_protocol,
    render,
    validate_trace,
)


@pytest.mark.parametrize(
    "text, expected",
    [("PFCP", Protocol.PFCP), ("TCP", Protocol.TCP), ("HTTP2-custom", OtherProtocol("HTTP2-custom"))],
)
def test_parse_protocol(text, expected):
    assert parse_protocol(text) == expected


def test_parse_protocol_is_case_sensitive():
    assert parse_protocol("tcp") == OtherProtocol("tcp")


@given(st.text(min_size=1))
def test_protocol_round_trip(text):
    assert render(parse_protocol(text)) == text
    assert parse_protocol(render(parse_protocol(text))) == parse_protocol(text)


@pytest.mark.parametrize("value", list(Protocol) + [OtherProtocol("X-1")])
def test_protocol_variants_round_trip(value):
    assert parse_protocol(render(value)) == value


@pytest.mark.parametrize("value", list(NfType) + [OtherNfType("SEPP")])
def test_nf_type_round_trip(value):
    assert parse_nf_type(render(value)) == value


def test_transition_matrix_is_exhaustive():
    legal = {
        (NfStatus.DEREGISTERED, NfStatus.REGISTERED),
        (NfStatus.REGISTERED, NfStatus.SUSPENDED),
        (NfStatus.SUSPENDED, NfStatus.REGISTERED),
        (NfStatus.REGISTERED, NfStatus.DEREGISTERED),
        (NfStatus.SUSPENDED, NfStatus.DEREGISTERED),
    }
    assert LEGAL_TRANSITIONS == legal
    for old, new in itertools.product(NfStatus, NfStatus):
        if (old, new) in legal:
            assert check_transition(old, new) is new
        else:
            with pytest.raises(IllegalTransition):
                check_transition(old, new)


def test_profile_violations():
    assert NfProfile("bsf-1", NfType.BSF, load=10).violations() == []
    assert NfProfile("bsf-1", NfType.BSF, load=150).violations() == ["load must be in [0, 100]"]
    assert "heartbeat_interval must be > 0" in NfProfile("bsf-1", NfType.BSF, heartbeat_interval=0).violations()


def test_profile_dict_round_trip():
    p = NfProfile("amf-1", NfType.AMF, heartbeat_interval=5, load=3, services=("namf-comm",), registered_at=1.5)
    assert NfProfile.from_dict(p.to_dict()) == p


def test_validate_trace_examples():
    assert validate_trace(Trace([], 0.0)) == []
    out_of_order = Trace([PacketRecord(5, "a", "b", Protocol.TCP, 10), PacketRecord(3, "a", "b", Protocol.TCP, 10)], 10)
    assert validate_trace(out_of_order) == ["ordering violated at index 1"]
    zero = Trace([PacketRecord(0, "a", "b", Protocol.TCP, 0)], 1)
    assert validate_trace(zero) == ["length ≥ 1 violated at index 0"]


def test_validate_trace_other_rules():
    t = Trace([PacketRecord(2, "a", "a", Protocol.TCP, 1), PacketRecord(9, "a", "b", Protocol.TCP, 1)], 5)
    assert validate_trace(t) == ["src ≠ dst violated at index 0", "timestamp ≤ duration violated at index 1"]


@given(traces())
def test_generated_traces_validate_clean(trace):
    assert validate_trace(trace) == []


def test_topology_violations():
    good = Topology.build([("nrf-1", "NRF"), ("bsf-1", "BSF")], [("bsf-1", "nrf-1")])
    assert good.violations() == []
    assert good.node_type("bsf-1") == NfType.BSF
    bad = Topology.build([("nrf-1", "NRF")], [("nrf-1", "nrf-1"), ("nrf-1", "x")])
    assert bad.violations() == ["self-link at link 0", "link 1 names undeclared node 'x'"]
