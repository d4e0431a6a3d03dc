"""NWDAF consumer-facing services and the placement consumer logic.

Three services are implemented:

* AnalyticsInfo: synchronous request/response over the analytics catalog;
* AnalyticsSubscription: periodic notifications on virtual time;
* DataManagement: historical replay plus live batches of packet records.

MLModelProvision and MLModelInfo are listed in the catalog but answer
with a fixed NOT_IMPLEMENTED result.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import math
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from . import analytics as an
from .analytics import EventKind, NfEvent, Thresholds, ThroughputSeries
from .capture import to_csv_text
from .nrf_registry import ConflictError, NotFoundError, NrfRegistry
from .sba_model import NfProfile, NfStatus, NfType, PacketRecord, Trace, dumps

logger = logging.getLogger(__name__)

SERVICE_CATALOG = {
    "AnalyticsSubscription": "implemented",
    "AnalyticsInfo": "implemented",
    "DataManagement": "implemented",
    "MLModelProvision": "not-implemented",
    "MLModelInfo": "not-implemented",
}

NWDAF_SERVICES = ("nnwdaf-analyticsinfo", "nnwdaf-eventssubscription", "nnwdaf-datamanagement")


# -- analytics identifiers ----------------------------------------------------------


class AnalyticsKind(str, Enum):
    PROTOCOL_COUNTS = "PROTOCOL_COUNTS"
    PROTOCOL_STATS = "PROTOCOL_STATS"
    PAIR_THROUGHPUT = "PAIR_THROUGHPUT"
    NF_EVENTS = "NF_EVENTS"
    NF_LOAD = "NF_LOAD"
    PLACEMENT = "PLACEMENT"

    @property
    def parameterized(self) -> bool:
        return self in (AnalyticsKind.PAIR_THROUGHPUT, AnalyticsKind.NF_EVENTS, AnalyticsKind.PLACEMENT)


_ID_RE = re.compile(r"^([A-Z_]+)(?:\(([^,()]+),([^,()]+)\))?$")


@dataclass(frozen=True)
class AnalyticsId:
    kind: AnalyticsKind
    a: Optional[str] = None
    b: Optional[str] = None

    def __post_init__(self):
        if self.kind.parameterized and not (self.a and self.b):
            raise ValueError(f"{self.kind.value} needs two node names")
        if self.kind.parameterized and self.a == self.b:
            raise ValueError(f"{self.kind.value} needs two distinct nodes")
        if not self.kind.parameterized and (self.a or self.b):
            raise ValueError(f"{self.kind.value} takes no parameters")

    def __str__(self) -> str:
        if self.kind.parameterized:
            return f"{self.kind.value}({self.a},{self.b})"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "AnalyticsId":
        """Parse ``KIND`` or ``KIND(a,b)``."""
        m = _ID_RE.match(text.strip())
        if not m:
            raise ValueError(f"malformed analytics id {text!r}")
        try:
            kind = AnalyticsKind(m.group(1))
        except ValueError:
            raise ValueError(f"unknown analytics {m.group(1)!r}") from None
        a, b = m.group(2), m.group(3)
        return cls(kind, a.strip() if a else None, b.strip() if b else None)

    # shorthands
    @classmethod
    def protocol_counts(cls):
        return cls(AnalyticsKind.PROTOCOL_COUNTS)

    @classmethod
    def protocol_stats(cls):
        return cls(AnalyticsKind.PROTOCOL_STATS)

    @classmethod
    def pair_throughput(cls, a, b):
        return cls(AnalyticsKind.PAIR_THROUGHPUT, a, b)

    @classmethod
    def nf_events(cls, src, dst):
        return cls(AnalyticsKind.NF_EVENTS, src, dst)

    @classmethod
    def nf_load(cls):
        return cls(AnalyticsKind.NF_LOAD)

    @classmethod
    def placement(cls, a, b):
        return cls(AnalyticsKind.PLACEMENT, a, b)


@dataclass(frozen=True)
class AnalyticsReport:
    analytics: AnalyticsId
    generated_at: float
    source: str
    data: dict
    status: str = "OK"

    @property
    def insufficient(self) -> bool:
        return self.status == "INSUFFICIENT_DATA"

    def to_dict(self) -> dict:
        return {
            "analytics": str(self.analytics),
            "generated_at": self.generated_at,
            "source": self.source,
            "status": self.status,
            "data": self.data,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())


# -- placement -----------------------------------------------------------------------


class ExchangeProfile(str, Enum):
    REGISTRATION_THEN_HEARTBEAT = "REGISTRATION_THEN_HEARTBEAT"
    SUSTAINED = "SUSTAINED"
    BURSTY = "BURSTY"


class Decision(str, Enum):
    COLOCATE = "COLOCATE"
    NO_COLOCATION_REQUIRED = "NO_COLOCATION_REQUIRED"
    INSUFFICIENT_DATA = "INSUFFICIENT_DATA"


@dataclass(frozen=True)
class PlacementRecommendation:
    pair: tuple[str, str]
    mean_rate: float
    peak_rate: float
    exchange_profile: ExchangeProfile
    decision: Decision
    rationale: str
    window: float = 0.0
    period: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "mean_rate": self.mean_rate,
            "peak_rate": self.peak_rate,
            "exchange_profile": self.exchange_profile.value,
            "decision": self.decision.value,
            "rationale": self.rationale,
            "window": self.window,
            "period": self.period,
        }


def placement_decision(
    profile: ExchangeProfile,
    mean_rate: float,
    window: float,
    period: Optional[float],
    thresholds: Thresholds = an.DEFAULTS,
) -> Decision:
    """Co-location verdict from the traffic pattern and steady-state rate.

    The window rule comes first: fewer than ``min_periods`` periods (or
    ``min_aperiodic_window`` seconds without a period) is never enough.
    Rates at or above ``high_rate`` always co-locate; a sustained pair
    co-locates from ``low_rate`` up.  Everything else, including a
    registration-then-heartbeat pair under ``low_rate``, needs no
    co-location.
    """
    needed = thresholds.min_periods * period if period else thresholds.min_aperiodic_window
    if window < needed:
        return Decision.INSUFFICIENT_DATA
    if mean_rate >= thresholds.high_rate:
        return Decision.COLOCATE
    if profile == ExchangeProfile.SUSTAINED and mean_rate >= thresholds.low_rate:
        return Decision.COLOCATE
    return Decision.NO_COLOCATION_REQUIRED


def recommend_placement(
    events: list[NfEvent],
    throughput: ThroughputSeries,
    thresholds: Thresholds = an.DEFAULTS,
) -> PlacementRecommendation:
    pair = (throughput.endpoint_a, throughput.endpoint_b)
    width = throughput.bucket_width
    window = throughput.window
    bytes_ = np.array([b for _, b in throughput.buckets], dtype=float)
    starts = np.array([s for s, _ in throughput.buckets], dtype=float)
    steady = starts >= thresholds.steady_fraction * window
    if not steady.any():
        steady = np.ones_like(steady)
    mean_rate = float(bytes_[steady].sum() / (steady.sum() * width)) if bytes_.size else 0.0
    peak_rate = float(bytes_.max() / width) if bytes_.size else 0.0

    spike = any(e.kind == EventKind.REGISTRATION_SPIKE for e in events)
    beats = sorted(e.timestamp for e in events if e.kind == EventKind.HEARTBEAT_REQUEST)
    period = None
    if len(beats) >= 3:
        try:
            est = an.estimate_period(beats)
        except ValueError:
            est = None
        if est is not None and est.jitter_ratio < thresholds.periodicity_gate:
            period = est.period

    fill = float((bytes_[steady] > 0).mean()) if bytes_.size else 0.0
    if spike and period is not None:
        profile = ExchangeProfile.REGISTRATION_THEN_HEARTBEAT
    elif fill >= thresholds.sustained_fill:
        profile = ExchangeProfile.SUSTAINED
    else:
        profile = ExchangeProfile.BURSTY

    decision = placement_decision(profile, mean_rate, window, period, thresholds)
    if decision == Decision.INSUFFICIENT_DATA:
        needed = thresholds.min_periods * period if period else thresholds.min_aperiodic_window
        why = f"observed {window:g} s, need {needed:g} s"
    elif decision == Decision.COLOCATE:
        why = f"steady mean {mean_rate:.1f} B/s (peak {peak_rate:.1f} B/s) is heavy for a {profile.value.lower()} pair"
    else:
        why = (
            f"steady mean {mean_rate:.1f} B/s (peak {peak_rate:.1f} B/s) is below "
            f"{thresholds.high_rate:g} B/s"
        )
        if profile == ExchangeProfile.REGISTRATION_THEN_HEARTBEAT:
            why += f"; registration burst then heartbeats every {period:g} s"
    return PlacementRecommendation(pair, mean_rate, peak_rate, profile, decision, why, window, period)


# -- subscriptions ---------------------------------------------------------------------


@dataclass
class AnalyticsSubscriptionRecord:
    subscription_id: str
    consumer: str
    analytics: AnalyticsId
    cadence: float
    notify_target: str
    active: bool = True
    start: float = 0.0
    delivered: int = 0


@dataclass(frozen=True)
class AnalyticsNotification:
    subscription_id: str
    seq: int
    at: float
    report: AnalyticsReport

    def to_dict(self) -> dict:
        return {"subscriptionId": self.subscription_id, "seq": self.seq, "at": self.at, "report": self.report.to_dict()}


@dataclass(frozen=True)
class RecordFilter:
    """Equality filter over packet record fields; ``None`` matches anything."""

    src: Optional[str] = None
    dst: Optional[str] = None
    protocol: Optional[str] = None

    def matches(self, r: PacketRecord) -> bool:
        return (
            (self.src is None or r.src == self.src)
            and (self.dst is None or r.dst == self.dst)
            and (self.protocol is None or str(r.protocol) == self.protocol)
        )

    def to_dict(self) -> dict:
        return {k: v for k, v in (("src", self.src), ("dst", self.dst), ("protocol", self.protocol)) if v is not None}


@dataclass
class DataSubscription:
    subscription_id: str
    consumer: str
    filter: RecordFilter
    notify_target: str
    cadence: Optional[float] = None
    active: bool = True
    pending: list = field(default_factory=list)
    last_flush: float = 0.0


@dataclass(frozen=True)
class DataBatch:
    subscription_id: str
    seq: int
    historical: bool
    records: tuple[PacketRecord, ...]


def trace_fingerprint(trace: Trace) -> str:
    return "sha256:" + hashlib.sha256(to_csv_text(trace).encode("utf-8")).hexdigest()[:16]


class Nwdaf:
    """NWDAF instance bound to a trace source.

    Args:
        source: a frozen :class:`Trace`, or anything with a ``trace()``
            method returning the trace captured so far (a capture tap or a
            running simulation).
        registry: optional NRF, used for NF_LOAD and deregistration audit.
        endpoints: notify-target name -> callable.
    """

    def __init__(
        self,
        source,
        registry: Optional[NrfRegistry] = None,
        thresholds: Thresholds = an.DEFAULTS,
        endpoints: Optional[dict[str, Callable]] = None,
        instance_id: str = "nwdaf-1",
        source_name: Optional[str] = None,
    ):
        self.source = source
        self.registry = registry
        self.thresholds = thresholds
        self.instance_id = instance_id
        self.source_name = source_name
        self.now = 0.0
        self._endpoints: dict[str, Callable] = dict(endpoints or {})
        self._lock = threading.RLock()
        self._subs: dict[str, AnalyticsSubscriptionRecord] = {}
        self._data_subs: dict[str, DataSubscription] = {}
        self._data_keys: dict[tuple[str, RecordFilter], str] = {}
        self._data_seq: dict[str, int] = {}
        self._ids = itertools.count(1)

    # -- plumbing ---------------------------------------------------------------

    def add_endpoint(self, name: str, callback: Callable) -> None:
        with self._lock:
            self._endpoints[name] = callback

    def snapshot(self) -> Trace:
        if isinstance(self.source, Trace):
            return self.source
        return self.source.trace()

    def register_with(self, registry: NrfRegistry, now: float = 0.0):
        """Register this NWDAF in the NRF like any other NF."""
        profile = NfProfile(self.instance_id, NfType.NWDAF, services=NWDAF_SERVICES)
        return registry.register(profile, now)

    # -- AnalyticsInfo ---------------------------------------------------------------

    def analytics_info(self, request: Union[AnalyticsId, str], source: Optional[Trace] = None) -> AnalyticsReport:
        """Compute one analytics report.

        Raises:
            NotFoundError: a node named in ``request`` never appears in the source.
        """
        aid = AnalyticsId.parse(request) if isinstance(request, str) else request
        trace = source if source is not None else self.snapshot()
        if aid.kind.parameterized:
            known = trace.nodes
            for node in (aid.a, aid.b):
                if node not in known:
                    raise NotFoundError(f"unknown node {node!r}")
        ident = self.source_name or trace_fingerprint(trace)
        status = "OK"
        try:
            data = self._compute(aid, trace)
        except an.InsufficientDataError as exc:
            data, status = {"reason": str(exc)}, "INSUFFICIENT_DATA"
        return AnalyticsReport(aid, float(trace.duration), ident, data, status)

    def _compute(self, aid: AnalyticsId, trace: Trace) -> dict:
        kind = aid.kind
        if kind == AnalyticsKind.PROTOCOL_COUNTS:
            counts = an.packets_per_protocol(trace)
            return {"counts": {str(p): n for p, n in sorted(counts.items(), key=lambda kv: str(kv[0]))}}
        if kind == AnalyticsKind.PROTOCOL_STATS:
            return {"stats": [s.to_dict() for s in an.length_stats(trace)]}
        if kind == AnalyticsKind.PAIR_THROUGHPUT:
            return an.pair_throughput(trace, aid.a, aid.b).to_dict()
        if kind == AnalyticsKind.NF_EVENTS:
            report = self._events(trace, aid.a, aid.b)
            return {
                "src": aid.a,
                "dst": aid.b,
                "spike_threshold": report.spike_threshold,
                "period": None if report.request_period is None else report.request_period.period,
                "counts": {k.value: len(report.of_kind(k)) for k in EventKind},
                "events": [e.to_dict() for e in report.events],
            }
        if kind == AnalyticsKind.NF_LOAD:
            if self.registry is None:
                raise an.InsufficientDataError("no registry attached")
            return {
                "loads": {p.instance_id: p.load for p in self.registry.profiles() if p.status == NfStatus.REGISTERED}
            }
        return self.placement(trace, aid.a, aid.b).to_dict()

    def _events(self, trace: Trace, src: str, dst: str) -> an.EventReport:
        deregs = self.registry.deregistrations(src) if self.registry is not None else ()
        return an.event_report(
            an.one_way_series(trace, src, dst),
            an.one_way_series(trace, dst, src),
            deregs,
            self.thresholds,
        )

    def placement(self, trace: Trace, a: str, b: str) -> PlacementRecommendation:
        try:
            events = self._events(trace, a, b).events
        except an.InsufficientDataError:
            events = []
        return recommend_placement(events, an.pair_throughput(trace, a, b), self.thresholds)

    # -- AnalyticsSubscription ---------------------------------------------------------

    def analytics_subscribe(self, record: AnalyticsSubscriptionRecord) -> str:
        with self._lock:
            if record.subscription_id in self._subs:
                raise ConflictError(f"subscription {record.subscription_id!r} already exists")
            if not record.cadence > 0:
                raise ValueError("cadence must be > 0")
            if record.notify_target not in self._endpoints:
                raise NotFoundError(f"notify target {record.notify_target!r} is not resolvable")
            record.start = self.now
            record.active = True
            self._subs[record.subscription_id] = record
            return record.subscription_id

    def analytics_unsubscribe(self, subscription_id: str) -> None:
        with self._lock:
            sub = self._subs.get(subscription_id)
            if sub is None or not sub.active:
                raise NotFoundError(f"unknown subscription {subscription_id!r}")
            sub.active = False

    def subscription(self, subscription_id: str) -> AnalyticsSubscriptionRecord:
        return self._subs[subscription_id]

    def has_subscription(self, subscription_id: str) -> bool:
        return subscription_id in self._subs

    def next_due(self) -> float:
        with self._lock:
            dues = [s.start + (s.delivered + 1) * s.cadence for s in self._subs.values() if s.active]
            return min(dues, default=math.inf)

    def advance(self, now: float) -> None:
        """Move virtual time to ``now`` and deliver everything that fell due.

        Reports are computed on the source as it is when called, so a
        live source should be advanced to each due time first (see
        :func:`run_with_nwdaf`).
        """
        with self._lock:
            if now < self.now:
                raise ValueError("virtual time cannot go backwards")
            self.now = now
            for sub in sorted(self._subs.values(), key=lambda s: s.subscription_id):
                while sub.active and sub.start + (sub.delivered + 1) * sub.cadence <= now:
                    sub.delivered += 1
                    at = sub.start + sub.delivered * sub.cadence
                    report = self.analytics_info(sub.analytics)
                    self._endpoints[sub.notify_target](AnalyticsNotification(sub.subscription_id, sub.delivered, at, report))
            self._flush_data(now)

    # -- DataManagement -------------------------------------------------------------------

    def data_management_subscribe(
        self,
        consumer: str,
        filter: RecordFilter,
        notify_target: str,
        historical: bool = False,
        cadence: Optional[float] = None,
    ) -> str:
        """Subscribe to packet records matching ``filter``.

        A repeat subscription for the same consumer and filter updates the
        existing one (target, cadence) and returns its id; no replay is
        sent for an update.
        """
        with self._lock:
            if notify_target not in self._endpoints:
                raise NotFoundError(f"notify target {notify_target!r} is not resolvable")
            key = (consumer, filter)
            existing = self._data_keys.get(key)
            if existing is not None:
                sub = self._data_subs[existing]
                sub.notify_target = notify_target
                sub.cadence = cadence
                return existing
            sub_id = f"dm-{next(self._ids)}"
            sub = DataSubscription(sub_id, consumer, filter, notify_target, cadence, last_flush=self.now)
            self._data_subs[sub_id] = sub
            self._data_keys[key] = sub_id
            self._data_seq[sub_id] = 0
            if historical:
                replay = tuple(r for r in self.snapshot().records if filter.matches(r))
                self._deliver_batch(sub, replay, historical=True)
            return sub_id

    def data_management_unsubscribe(self, subscription_id: str) -> None:
        with self._lock:
            sub = self._data_subs.pop(subscription_id, None)
            if sub is None:
                raise NotFoundError(f"unknown subscription {subscription_id!r}")
            del self._data_keys[(sub.consumer, sub.filter)]

    def data_subscriptions(self) -> list[DataSubscription]:
        return list(self._data_subs.values())

    def on_record(self, record: PacketRecord) -> None:
        """Tap listener: queue a live record for every matching data subscription."""
        with self._lock:
            for sub in self._data_subs.values():
                if sub.filter.matches(record):
                    sub.pending.append(record)

    def _deliver_batch(self, sub: DataSubscription, records, historical: bool) -> None:
        self._data_seq[sub.subscription_id] += 1
        batch = DataBatch(sub.subscription_id, self._data_seq[sub.subscription_id], historical, tuple(records))
        self._endpoints[sub.notify_target](batch)

    def _flush_data(self, now: float) -> None:
        for sub in list(self._data_subs.values()):
            if not sub.pending:
                continue
            if sub.cadence is not None and now - sub.last_flush < sub.cadence:
                continue
            records, sub.pending = sub.pending, []
            sub.last_flush = now
            self._deliver_batch(sub, records, historical=False)

    # -- ML model services ----------------------------------------------------------------

    def ml_model_provision(self, *args, **kwargs) -> dict:
        return {"service": "MLModelProvision", "status": "NOT_IMPLEMENTED"}

    def ml_model_info(self, *args, **kwargs) -> dict:
        return {"service": "MLModelInfo", "status": "NOT_IMPLEMENTED"}


def run_with_nwdaf(sim, nwdaf: Nwdaf, until: float) -> None:
    """Advance a :class:`~nwdaf_lab.nf_agents.Simulation` and an NWDAF in lockstep."""
    while True:
        step = min(nwdaf.next_due(), until)
        sim.run_until(step)
        nwdaf.advance(step)
        if step >= until:
            return
