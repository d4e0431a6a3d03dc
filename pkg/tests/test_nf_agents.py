from dataclasses import replace

import numpy as np
import pytest

from oracles import heartbeat_count
from nwdaf_lab.capture import to_csv_text
from nwdaf_lab.nf_agents import (
    AgentSpec,
    Behavior,
    Chatty,
    ConfigError,
    Event,
    EventQueue,
    Simulation,
    SimulationConfig,
    config_from_dict,
    default_config,
    default_config_dict,
    load_config,
    next_event,
    run_simulation,
    schedule_event,
)
from nwdaf_lab.sba_model import NfProfile, NfType, Protocol, Topology, validate_trace

TOPO = Topology.build([("nrf-1", "NRF"), ("bsf-1", "BSF"), ("smf-1", "SMF"), ("upf-1", "UPF")])


def bsf_only(duration=8280.0, jitter=0.0, acks=False, **agent_kw):
    agent = AgentSpec(NfProfile("bsf-1", NfType.BSF, heartbeat_interval=10, load=10), jitter_stddev=jitter, **agent_kw)
    return SimulationConfig(TOPO, (agent,), duration=duration, seed=3, transport_acks=acks)


def requests(trace, src="bsf-1", dst="nrf-1"):
    return [r for r in trace.records if r.src == src and r.dst == dst]


# -- event queue ------------------------------------------------------------------


def test_queue_orders_by_time():
    q = EventQueue()
    schedule_event(q, Event(5, "a"))
    schedule_event(q, Event(3, "a"))
    assert next_event(q).time == 3
    assert next_event(q).time == 5


def test_queue_ties_broken_by_agent_then_sequence():
    q = EventQueue()
    schedule_event(q, Event(7, "b", label="b1"))
    schedule_event(q, Event(7, "a", label="a1"))
    schedule_event(q, Event(7, "a", label="a2"))
    assert [next_event(q).label for _ in range(3)] == ["a1", "a2", "b1"]


def test_queue_rejects_past():
    q = EventQueue()
    schedule_event(q, Event(2, "a"))
    next_event(q)
    with pytest.raises(ValueError):
        schedule_event(q, Event(1, "a"))


# -- simulation ---------------------------------------------------------------------


def test_ten_second_cadence_counts():
    sim = Simulation(bsf_only()).run()
    out = requests(sim.trace())
    expected = heartbeat_count(0, 10, 8280, 0.001)
    assert expected == 827
    assert len(out) == 1 + expected
    beats = [r.timestamp for r in out[1:]]
    assert beats[0] == 10 and beats[-1] == 8270
    assert sim.exchanges == 828
    assert len(sim.trace()) == 2 * sim.exchanges


def test_short_run_registration_only():
    trace = run_simulation(bsf_only(duration=5))
    assert len(trace) == 2
    assert [(r.src, r.dst) for r in trace.records] == [("bsf-1", "nrf-1"), ("nrf-1", "bsf-1")]


def test_determinism_byte_identical():
    cfg = bsf_only(jitter=0.05)
    assert to_csv_text(run_simulation(cfg)) == to_csv_text(run_simulation(cfg))


def test_seed_changes_timestamps_not_counts():
    a = run_simulation(bsf_only(jitter=0.05))
    b = run_simulation(replace(bsf_only(jitter=0.05), seed=99))
    assert len(a) == len(b)
    assert [r.timestamp for r in a.records] != [r.timestamp for r in b.records]


def test_zero_jitter_cadence_exact():
    beats = [r.timestamp for r in requests(run_simulation(bsf_only()))[1:]]
    assert set(np.diff(beats)) == {10.0}


def test_jitter_clamped():
    trace = run_simulation(bsf_only(jitter=0.05))
    beats = np.array([r.timestamp for r in requests(trace)[1:]])
    nominal = 10.0 * np.arange(1, beats.size + 1)
    assert np.all(np.abs(beats - nominal) <= 0.15 + 1e-12)


def test_exchange_pairing():
    cfg = replace(default_config(), transport_acks=False)
    trace = run_simulation(cfg)
    for agent in cfg.agents:
        src = agent.profile.instance_id
        dst = agent.behavior.peer if agent.kind == Behavior.CHATTY else cfg.nrf
        reqs = [r.timestamp for r in trace.records if (r.src, r.dst) == (src, dst)]
        resps = [r.timestamp for r in trace.records if (r.src, r.dst) == (dst, src)]
        assert len(reqs) == len(resps) > 0
        assert all(q <= p for q, p in zip(reqs, resps))
        # each response lands before the next request goes out
        assert all(p <= q for p, q in zip(resps, reqs[1:]))
    assert validate_trace(trace) == []


def test_tap_completeness_with_acks():
    sim = Simulation(default_config()).run()
    assert len(sim.trace()) == 2 * sim.exchanges + sim.acks
    assert sim.acks == sim.exchanges


def test_registration_dominance():
    trace = run_simulation(default_config())
    for agent in ("bsf-1", "amf-1", "smf-1", "nwdaf-1"):
        sent = [r.length for r in trace.records if r.src == agent and r.dst == "nrf-1"]
        assert sent[0] > max(sent[1:])


def test_stop_time_deregisters():
    sim = Simulation(bsf_only(duration=100, stop_time=55.0)).run()
    out = requests(sim.trace())
    assert [r.timestamp for r in out] == [0, 10, 20, 30, 40, 50, 55]
    assert sim.registry.deregistrations("bsf-1") == [55.0]


def test_chatty_stub_labels():
    spec = AgentSpec(
        NfProfile("upf-1", NfType.UPF, heartbeat_interval=60),
        Chatty("smf-1", 60, 80, Protocol.PFCP),
        start_time=5,
        jitter_stddev=0,
    )
    trace = run_simulation(SimulationConfig(TOPO, (spec,), duration=300))
    assert {r.protocol for r in trace.records} == {Protocol.PFCP}
    assert [r.timestamp for r in trace.records if r.src == "upf-1"] == [5, 65, 125, 185, 245]


def test_register_only_agent():
    spec = AgentSpec(NfProfile("smf-1", NfType.SMF), Behavior.REGISTER_ONLY, jitter_stddev=0)
    assert len(run_simulation(SimulationConfig(TOPO, (spec,), duration=100))) == 2


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d.update(duration_s=0), "duration_s"),
        (lambda d: d["agents"][0].update(instance_id="nowhere"), "agents[0].instance_id"),
        (lambda d: d["agents"][0].update(jitter_stddev_s=6), "agents[0].jitter_stddev_s"),
        (lambda d: d["agents"][0].update(load=101), "agents[0]"),
        (lambda d: d["agents"][0].pop("nf_type"), "agents[0].nf_type"),
        (lambda d: d["agents"][0].update(behavior="DANCE"), "agents[0].behavior"),
        (lambda d: d.update(duraton_s=5), "duraton_s"),
        (lambda d: d["topology"]["nodes"].pop(0), "topology"),
        (lambda d: d["topology"].update(links=[]) or d["topology"]["nodes"].pop(0), "topology.nodes"),
    ],
)
def test_config_errors_name_field(mutate, field):
    d = default_config_dict()
    mutate(d)
    with pytest.raises(ConfigError) as err:
        config_from_dict(d)
    assert err.value.field == field


def test_invalid_config_fails_before_running():
    cfg = replace(bsf_only(), duration=-1)
    with pytest.raises(ConfigError):
        Simulation(cfg)


def test_load_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_default_config_overrides():
    cfg = default_config(duration=30, transport_acks=False)
    assert cfg.duration == 30 and not cfg.transport_acks
    with pytest.raises(ConfigError):
        default_config(duration=0)


def test_default_scenario_shape():
    cfg = default_config()
    assert cfg.duration == 8280
    assert cfg.nrf == "nrf-1"
    bsf = next(a for a in cfg.agents if a.profile.instance_id == "bsf-1")
    assert bsf.profile.heartbeat_interval == 10
    assert bsf.kind == Behavior.REGISTER_THEN_HEARTBEAT
