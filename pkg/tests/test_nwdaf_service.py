import numpy as np
import pytest

from oracles import schedule_count
from nwdaf_lab.analytics import DEFAULTS, EventKind, ThroughputSeries, one_way_series
from nwdaf_lab.nf_agents import Simulation, default_config
from nwdaf_lab.nrf_registry import ConflictError, NotFoundError, NrfRegistry
from nwdaf_lab.nwdaf_service import (
    AnalyticsId,
    AnalyticsKind,
    AnalyticsSubscriptionRecord,
    Decision,
    ExchangeProfile,
    Nwdaf,
    RecordFilter,
    placement_decision,
    recommend_placement,
    run_with_nwdaf,
)
from nwdaf_lab.sba_model import NfStatus, NfType, PacketRecord, Protocol, Trace

SMALL = Trace(
    [
        PacketRecord(0.0, "bsf-1", "nrf-1", Protocol.TCP, 190),
        PacketRecord(0.1, "nrf-1", "bsf-1", Protocol.TCP, 200),
        PacketRecord(1.0, "smf-1", "upf-1", Protocol.PFCP, 80),
        PacketRecord(2.0, "bsf-1", "nrf-1", Protocol.TCP, 99),
    ],
    2.0,
)


@pytest.fixture
def inbox():
    return []


@pytest.fixture
def nwdaf(inbox):
    return Nwdaf(SMALL, endpoints={"cb": inbox.append})


def sub(sub_id="s1", cadence=60.0, analytics=AnalyticsId.protocol_counts()):
    return AnalyticsSubscriptionRecord(sub_id, "pcf-1", analytics, cadence, "cb")


# -- analytics ids ------------------------------------------------------------------------


@pytest.mark.parametrize("text", ["PROTOCOL_COUNTS", "NF_LOAD", "PAIR_THROUGHPUT(bsf-1,nrf-1)", "PLACEMENT(a,b)"])
def test_analytics_id_round_trip(text):
    assert str(AnalyticsId.parse(text)) == text


@pytest.mark.parametrize("text", ["PAIR_THROUGHPUT", "PROTOCOL_COUNTS(a,b)", "NOPE", "NF_EVENTS(a,a)"])
def test_analytics_id_rejects(text):
    with pytest.raises(ValueError):
        AnalyticsId.parse(text)


# -- AnalyticsInfo --------------------------------------------------------------------------


def test_info_delegates_counts(nwdaf):
    report = nwdaf.analytics_info(AnalyticsId.protocol_counts())
    assert report.data == {"counts": {"PFCP": 1, "TCP": 3}}
    assert report.status == "OK" and report.generated_at == 2.0
    assert report.source.startswith("sha256:")


def test_info_unknown_node(nwdaf):
    with pytest.raises(NotFoundError):
        nwdaf.analytics_info("PAIR_THROUGHPUT(bsf-1,ghost-9)")


def test_info_insufficient_is_a_value(nwdaf):
    report = nwdaf.analytics_info("NF_EVENTS(bsf-1,nrf-1)")
    assert report.insufficient
    assert nwdaf.analytics_info(AnalyticsId.nf_load()).insufficient


def test_info_is_deterministic(default_trace):
    a = Nwdaf(default_trace).analytics_info("PROTOCOL_STATS")
    b = Nwdaf(default_trace).analytics_info("PROTOCOL_STATS")
    assert a.to_json() == b.to_json()


def test_info_events_default(default_trace):
    report = Nwdaf(default_trace).analytics_info(AnalyticsId.nf_events("bsf-1", "nrf-1"))
    assert report.data["counts"]["REGISTRATION_SPIKE"] == 1
    assert report.data["counts"]["HEARTBEAT_REQUEST"] == 827


def test_info_all_kinds_on_live_sim():
    sim = Simulation(default_config(duration=600))
    nwdaf = Nwdaf(sim, registry=sim.registry)
    sim.run()
    for kind in AnalyticsKind:
        aid = AnalyticsId(kind, "bsf-1", "nrf-1") if kind.parameterized else AnalyticsId(kind)
        assert nwdaf.analytics_info(aid).analytics == aid
    loads = nwdaf.analytics_info("NF_LOAD").data["loads"]
    assert loads["bsf-1"] == 10


# -- AnalyticsSubscription ---------------------------------------------------------------


def test_cadence_notifications(nwdaf, inbox):
    nwdaf.analytics_subscribe(sub())
    nwdaf.advance(300)
    assert len(inbox) == schedule_count(300, 60) == 5
    assert [n.seq for n in inbox] == [1, 2, 3, 4, 5]
    assert [n.at for n in inbox] == [60, 120, 180, 240, 300]


def test_unsubscribe_halts(nwdaf, inbox):
    nwdaf.analytics_subscribe(sub())
    nwdaf.advance(150)
    nwdaf.analytics_unsubscribe("s1")
    nwdaf.advance(1000)
    assert len(inbox) == 2
    with pytest.raises(NotFoundError):
        nwdaf.analytics_unsubscribe("s1")


def test_subscription_errors(nwdaf):
    nwdaf.analytics_subscribe(sub())
    with pytest.raises(ConflictError):
        nwdaf.analytics_subscribe(sub())
    with pytest.raises(ValueError):
        nwdaf.analytics_subscribe(sub("s2", cadence=0))
    with pytest.raises(NotFoundError):
        nwdaf.analytics_subscribe(AnalyticsSubscriptionRecord("s3", "pcf-1", AnalyticsId.nf_load(), 5, "nowhere"))


def test_notifications_follow_live_source():
    got = []
    sim = Simulation(default_config(duration=400))
    nwdaf = Nwdaf(sim, endpoints={"cb": got.append})
    nwdaf.analytics_subscribe(sub(cadence=60))
    run_with_nwdaf(sim, nwdaf, 300)
    assert len(got) == 5
    totals = [sum(n.report.data["counts"].values()) for n in got]
    assert totals == sorted(totals) and totals[0] < totals[-1]
    assert [n.report.generated_at for n in got] == [60, 120, 180, 240, 300]


# -- DataManagement ------------------------------------------------------------------------


def test_dm_historical_replay(default_trace, inbox):
    nwdaf = Nwdaf(default_trace, endpoints={"cb": inbox.append})
    nwdaf.data_management_subscribe("pcf-1", RecordFilter(src="bsf-1", dst="nrf-1"), "cb", historical=True)
    (batch,) = inbox
    assert batch.historical
    assert [(r.timestamp, r.length) for r in batch.records] == one_way_series(default_trace, "bsf-1", "nrf-1")


def test_dm_update_in_place(nwdaf, inbox):
    flt = RecordFilter(src="bsf-1")
    nwdaf.add_endpoint("cb2", inbox.append)
    first = nwdaf.data_management_subscribe("pcf-1", flt, "cb", historical=True)
    second = nwdaf.data_management_subscribe("pcf-1", flt, "cb2", cadence=30)
    assert first == second
    (only,) = nwdaf.data_subscriptions()
    assert only.notify_target == "cb2" and only.cadence == 30
    assert len(inbox) == 1
    other = nwdaf.data_management_subscribe("pcf-2", flt, "cb")
    assert other != first and len(nwdaf.data_subscriptions()) == 2


def test_dm_empty_filter_match_then_live(inbox):
    sim = Simulation(default_config(duration=120))
    nwdaf = Nwdaf(sim, endpoints={"cb": inbox.append})
    sim.tap.add_listener(nwdaf.on_record)
    nwdaf.data_management_subscribe("pcf-1", RecordFilter(src="nobody"), "cb", historical=True)
    live = nwdaf.data_management_subscribe("pcf-1", RecordFilter(src="bsf-1"), "cb")
    assert len(inbox) == 1 and inbox[0].records == ()
    nwdaf.analytics_subscribe(sub(cadence=60))
    run_with_nwdaf(sim, nwdaf, 120)
    batches = [b for b in inbox if getattr(b, "subscription_id", None) == live]
    assert batches and not any(b.historical for b in batches)
    assert all(r.src == "bsf-1" for b in batches for r in b.records)


def test_dm_unsubscribe(nwdaf):
    sid = nwdaf.data_management_subscribe("pcf-1", RecordFilter(), "cb")
    nwdaf.data_management_unsubscribe(sid)
    assert nwdaf.data_subscriptions() == []
    with pytest.raises(NotFoundError):
        nwdaf.data_management_unsubscribe(sid)


# -- placement ------------------------------------------------------------------------------


def test_placement_default_pair(default_trace):
    rec = Nwdaf(default_trace).placement(default_trace, "bsf-1", "nrf-1")
    assert rec.exchange_profile == ExchangeProfile.REGISTRATION_THEN_HEARTBEAT
    assert rec.decision == Decision.NO_COLOCATION_REQUIRED
    assert rec.period == pytest.approx(10, abs=0.05)
    assert f"{rec.mean_rate:.1f}" in rec.rationale


def test_placement_sustained_heavy_pair():
    buckets = tuple((float(i), 1_000_000) for i in range(120))
    rec = recommend_placement([], ThroughputSeries("upf-1", "smf-1", 1.0, buckets))
    assert rec.exchange_profile == ExchangeProfile.SUSTAINED
    assert rec.mean_rate == 1e6
    assert rec.decision == Decision.COLOCATE


def test_placement_short_window():
    assert placement_decision(ExchangeProfile.REGISTRATION_THEN_HEARTBEAT, 50, 30, 10) == Decision.INSUFFICIENT_DATA
    assert placement_decision(ExchangeProfile.BURSTY, 50, 59, None) == Decision.INSUFFICIENT_DATA
    assert placement_decision(ExchangeProfile.BURSTY, 50, 60, None) == Decision.NO_COLOCATION_REQUIRED


def test_placement_short_trace_end_to_end():
    trace = Simulation(default_config(duration=30)).run().trace()
    assert Nwdaf(trace).placement(trace, "bsf-1", "nrf-1").decision == Decision.INSUFFICIENT_DATA


RANK = {Decision.NO_COLOCATION_REQUIRED: 0, Decision.COLOCATE: 1}


@pytest.mark.parametrize("profile", list(ExchangeProfile))
@pytest.mark.parametrize("period", [None, 10.0])
def test_placement_monotone_in_rate(profile, period):
    rates = np.geomspace(1, 1e7, 50)
    decisions = [placement_decision(profile, r, 10_000, period) for r in rates]
    ranks = [RANK[d] for d in decisions]
    assert ranks == sorted(ranks)
    assert decisions[-1] == Decision.COLOCATE


def test_placement_thresholds_configurable():
    from dataclasses import replace

    strict = replace(DEFAULTS, high_rate=10.0)
    assert placement_decision(ExchangeProfile.BURSTY, 20, 10_000, None, strict) == Decision.COLOCATE


# -- catalog and registration -------------------------------------------------------------


def test_ml_services_not_implemented(nwdaf):
    assert nwdaf.ml_model_provision()["status"] == "NOT_IMPLEMENTED"
    assert nwdaf.ml_model_info("anything")["status"] == "NOT_IMPLEMENTED"


def test_nwdaf_registers_in_nrf(nwdaf):
    nrf = NrfRegistry()
    nwdaf.register_with(nrf, now=0)
    (found,) = nrf.discover(NfType.NWDAF)
    assert found.status == NfStatus.REGISTERED and "nnwdaf-analyticsinfo" in found.services


def test_events_kinds_listed():
    assert {k.value for k in EventKind} >= {"REGISTRATION_SPIKE", "HEARTBEAT_REQUEST", "HEARTBEAT_ACK"}
