"""NWDAF analytics over packet traces.

Covers per-protocol packet counts and length statistics, bucketed pair
throughput, one-way (timestamp, length) series, inter-arrival period
estimation, two-class packet size splitting and NF event detection
(registration spike, heartbeat requests and acknowledgements).

Standard deviations are population (divide-by-N) throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .sba_model import ProtocolLike, Trace


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class Thresholds:
    """Tunable numeric defaults for qualitative judgements.

    Attributes:
        steady_fraction: leading share of a series treated as warm-up.
        spike_sigmas: spike threshold is steady mean + this many stddevs.
        periodicity_gate: heartbeat candidates need stddev/period below this.
        low_rate: bytes/s under which a periodic pair needs no co-location.
        high_rate: bytes/s at or above which co-location is recommended.
        min_periods: observation window must span this many periods.
        min_aperiodic_window: seconds required when no period is detected.
        sustained_fill: share of non-empty buckets that counts as sustained.
    """

    steady_fraction: float = 0.05
    spike_sigmas: float = 3.0
    periodicity_gate: float = 0.1
    low_rate: float = 1_000.0
    high_rate: float = 100_000.0
    min_periods: float = 10.0
    min_aperiodic_window: float = 60.0
    sustained_fill: float = 0.9


DEFAULTS = Thresholds()


# -- trace columns ---------------------------------------------------------------


def _columns(trace: Trace):
    recs = trace.records
    n = len(recs)
    ts = np.fromiter((r.timestamp for r in recs), dtype=float, count=n)
    lengths = np.fromiter((r.length for r in recs), dtype=np.int64, count=n)
    return ts, lengths


# -- protocol distributions -------------------------------------------------------


def packets_per_protocol(trace: Trace) -> dict[ProtocolLike, int]:
    counts: dict[ProtocolLike, int] = {}
    for r in trace.records:
        counts[r.protocol] = counts.get(r.protocol, 0) + 1
    return counts


@dataclass(frozen=True)
class ProtocolStats:
    protocol: ProtocolLike
    count: int
    mean_length: float
    stddev_length: float
    max_length: int
    min_length: int

    def to_dict(self) -> dict:
        return {
            "protocol": str(self.protocol),
            "count": self.count,
            "mean_length": self.mean_length,
            "stddev_length": self.stddev_length,
            "max_length": self.max_length,
            "min_length": self.min_length,
        }


def length_stats(trace: Trace) -> list[ProtocolStats]:
    """Per-protocol length statistics, most frequent protocol first.

    Ties in count are broken by protocol label so the order is stable.
    """
    if not trace.records:
        return []
    codes: dict[ProtocolLike, int] = {}
    inverse = np.fromiter(
        (codes.setdefault(r.protocol, len(codes)) for r in trace.records), dtype=np.int64, count=len(trace.records)
    )
    uniq = list(codes)
    _, lengths = _columns(trace)
    x = lengths.astype(float)
    counts = np.bincount(inverse, minlength=len(uniq))
    means = np.bincount(inverse, weights=x, minlength=len(uniq)) / counts
    # second pass around the group mean avoids sum-of-squares cancellation
    dev = x - means[inverse]
    variances = np.bincount(inverse, weights=dev * dev, minlength=len(uniq)) / counts
    maxima = np.full(len(uniq), np.iinfo(np.int64).min)
    minima = np.full(len(uniq), np.iinfo(np.int64).max)
    np.maximum.at(maxima, inverse, lengths)
    np.minimum.at(minima, inverse, lengths)
    out = []
    for i, protocol in enumerate(uniq):
        mean = float(means[i])
        lo, hi = int(minima[i]), int(maxima[i])
        out.append(
            ProtocolStats(
                protocol,
                int(counts[i]),
                min(max(mean, lo), hi),
                math.sqrt(max(float(variances[i]), 0.0)),
                hi,
                lo,
            )
        )
    out.sort(key=lambda s: (-s.count, str(s.protocol)))
    return out


# -- throughput ---------------------------------------------------------------------


class Direction(str, Enum):
    BIDIRECTIONAL = "BIDIRECTIONAL"
    A_TO_B = "A_TO_B"


@dataclass(frozen=True)
class ThroughputSeries:
    endpoint_a: str
    endpoint_b: str
    bucket_width: float
    buckets: tuple[tuple[float, int], ...]
    direction: Direction = Direction.BIDIRECTIONAL

    @property
    def total_bytes(self) -> int:
        return sum(b for _, b in self.buckets)

    @property
    def window(self) -> float:
        return len(self.buckets) * self.bucket_width

    def rates(self) -> np.ndarray:
        return np.array([b for _, b in self.buckets], dtype=float) / self.bucket_width

    def to_dict(self) -> dict:
        return {
            "endpoint_a": self.endpoint_a,
            "endpoint_b": self.endpoint_b,
            "bucket_width": self.bucket_width,
            "direction": self.direction.value,
            "buckets": [[s, b] for s, b in self.buckets],
        }


def _pair_mask(trace: Trace, a: str, b: str, direction: Direction) -> np.ndarray:
    if direction == Direction.A_TO_B:
        sel = [r.src == a and r.dst == b for r in trace.records]
    else:
        sel = [(r.src == a and r.dst == b) or (r.src == b and r.dst == a) for r in trace.records]
    return np.asarray(sel, dtype=bool)


def pair_throughput(
    trace: Trace,
    a: str,
    b: str,
    bucket_width: float = 1.0,
    direction: Direction = Direction.BIDIRECTIONAL,
) -> ThroughputSeries:
    """Bytes exchanged between ``a`` and ``b`` per ``bucket_width`` seconds.

    Buckets start at 0 and are gap-free up to the bucket holding
    ``trace.duration`` (or the last record, if later).
    """
    if not bucket_width > 0:
        raise ValueError("bucket_width must be > 0")
    direction = Direction(direction)
    ts, lengths = _columns(trace)
    horizon = max(trace.duration, float(ts[-1]) if len(ts) else 0.0)
    n = int(math.floor(horizon / bucket_width)) + 1
    mask = _pair_mask(trace, a, b, direction)
    idx = np.floor(ts[mask] / bucket_width).astype(np.int64)
    sums = np.zeros(n, dtype=np.int64)
    np.add.at(sums, idx, lengths[mask])
    buckets = tuple((i * bucket_width, int(v)) for i, v in enumerate(sums))
    return ThroughputSeries(a, b, float(bucket_width), buckets, direction)


# -- one-way series ---------------------------------------------------------------------


def one_way_series(trace: Trace, src: str, dst: str) -> list[tuple[float, int]]:
    return [(r.timestamp, r.length) for r in trace.records if r.src == src and r.dst == dst]


# -- periodicity ----------------------------------------------------------------------------


class PeriodEstimate(NamedTuple):
    period: float
    stddev: float
    support: int

    @property
    def jitter_ratio(self) -> float:
        return self.stddev / self.period


def estimate_period(timestamps: Sequence[float]) -> PeriodEstimate:
    """Median inter-arrival time with the population stddev of the gaps.

    Raises:
        InsufficientDataError: fewer than 3 timestamps.
        ValueError: timestamps not strictly increasing.
    """
    t = np.asarray(timestamps, dtype=float)
    if t.size < 3:
        raise InsufficientDataError(f"need at least 3 timestamps, got {t.size}")
    gaps = np.diff(t)
    if np.any(gaps <= 0):
        raise ValueError("timestamps must be strictly increasing")
    return PeriodEstimate(float(np.median(gaps)), float(np.std(gaps)), int(gaps.size))


# -- size classes ------------------------------------------------------------------------------


class SizeClasses(NamedTuple):
    """Two-way split of packet lengths.

    ``threshold`` is None (and ``large`` empty) when every length is equal.
    """

    threshold: Optional[float]
    small: tuple
    large: tuple

    @property
    def single_class(self) -> bool:
        return self.threshold is None


def classify_sizes(lengths: Sequence[int]) -> SizeClasses:
    """Split lengths in two so that the total within-class squared deviation is minimal.

    Every cut between consecutive distinct values is scored exactly (with
    rationals), and the lowest cut wins ties.
    """
    values, counts = np.unique(np.asarray(lengths), return_counts=True)
    if values.size == 0:
        raise InsufficientDataError("no lengths to classify")
    uniq = [v.item() for v in values]
    if len(uniq) == 1:
        return SizeClasses(None, tuple(uniq), ())
    w = [int(c) for c in counts]
    s = [Fraction(v) * c for v, c in zip(uniq, w)]
    q = [Fraction(v) * Fraction(v) * c for v, c in zip(uniq, w)]
    n_tot, s_tot, q_tot = sum(w), sum(s), sum(q)
    best_cut, best_cost = None, None
    n_l = s_l = q_l = 0
    for i in range(len(uniq) - 1):
        n_l += w[i]
        s_l += s[i]
        q_l += q[i]
        n_r, s_r, q_r = n_tot - n_l, s_tot - s_l, q_tot - q_l
        cost = (q_l - s_l * s_l / n_l) + (q_r - s_r * s_r / n_r)
        if best_cost is None or cost < best_cost:
            best_cut, best_cost = i, cost
    threshold = (uniq[best_cut] + uniq[best_cut + 1]) / 2
    return SizeClasses(threshold, tuple(uniq[: best_cut + 1]), tuple(uniq[best_cut + 1 :]))


# -- event detection ---------------------------------------------------------------------------


class EventKind(str, Enum):
    REGISTRATION_SPIKE = "REGISTRATION_SPIKE"
    HEARTBEAT_REQUEST = "HEARTBEAT_REQUEST"
    HEARTBEAT_ACK = "HEARTBEAT_ACK"
    DEREGISTRATION = "DEREGISTRATION"


@dataclass(frozen=True, order=True)
class NfEvent:
    timestamp: float
    kind: EventKind = field(compare=False)
    packet_length: int = field(compare=False)
    confidence: float = field(default=1.0, compare=False)

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "kind": self.kind.value,
            "packet_length": self.packet_length,
            "confidence": self.confidence,
        }


@dataclass
class EventReport:
    """Events plus the intermediate quantities that justified them."""

    events: list[NfEvent]
    spike_threshold: Optional[float] = None
    size_classes: Optional[SizeClasses] = None
    request_period: Optional[PeriodEstimate] = None
    ack_period: Optional[PeriodEstimate] = None

    def of_kind(self, kind: EventKind) -> list[NfEvent]:
        return [e for e in self.events if e.kind == kind]


MIN_SERIES = 10


def _gated_period(timestamps: list[float], gate: float) -> Optional[PeriodEstimate]:
    if len(timestamps) < 3:
        return None
    try:
        est = estimate_period(timestamps)
    except ValueError:
        return None
    return est if est.jitter_ratio < gate else None


def _answered(times: np.ndarray, peer_times: np.ndarray, horizon: float) -> np.ndarray:
    """For each time, whether some peer packet falls in ``[t, t + horizon)``."""
    if peer_times.size == 0:
        return np.zeros(times.size, dtype=bool)
    j = np.searchsorted(peer_times, times, side="left")
    ok = j < peer_times.size
    nxt = np.where(ok, peer_times[np.minimum(j, peer_times.size - 1)], np.inf)
    return ok & (nxt < times + horizon)


def _preceded(times: np.ndarray, peer_times: np.ndarray, horizon: float) -> np.ndarray:
    """For each time, whether some peer packet falls in ``(t - horizon, t]``."""
    if peer_times.size == 0:
        return np.zeros(times.size, dtype=bool)
    j = np.searchsorted(peer_times, times, side="right") - 1
    ok = j >= 0
    prev = np.where(ok, peer_times[np.maximum(j, 0)], -np.inf)
    return ok & (prev > times - horizon)


def detect_events(
    series: Sequence[tuple[float, int]],
    peer_series: Sequence[tuple[float, int]] = (),
    deregistrations: Sequence[float] = (),
    thresholds: Thresholds = DEFAULTS,
) -> list[NfEvent]:
    """Time-ordered events for ``series``; see :func:`event_report`."""
    return event_report(series, peer_series, deregistrations, thresholds).events


def event_report(
    series: Sequence[tuple[float, int]],
    peer_series: Sequence[tuple[float, int]] = (),
    deregistrations: Sequence[float] = (),
    thresholds: Thresholds = DEFAULTS,
) -> EventReport:
    """Annotate a one-way NF->NRF series with lifecycle and heartbeat events.

    The first ``steady_fraction`` of the series' time span is warm-up.
    The registration spike is the earliest packet longer than the steady
    mean plus ``spike_sigmas`` steady stddevs.  Remaining packets are
    split with :func:`classify_sizes` fitted on steady-state lengths: the
    large class are heartbeat requests, the small class acknowledgements.
    Each class is reported only if its arrivals pass the periodicity
    gate.  A heartbeat request answered by ``peer_series`` within half a
    period gets confidence 1.0, otherwise 0.5; acknowledgements are
    scored the same way against a preceding peer packet.

    ``deregistrations`` are audit-log times (simulation mode); the first
    packet at or after each is reported as DEREGISTRATION.
    """
    if len(series) < MIN_SERIES:
        raise InsufficientDataError(f"need at least {MIN_SERIES} packets, got {len(series)}")
    arr = np.asarray(series, dtype=float)
    order = np.argsort(arr[:, 0], kind="stable")
    times, lengths = arr[order, 0], arr[order, 1]
    peer = np.asarray(sorted(t for t, _ in peer_series), dtype=float)

    t0, span = times[0], times[-1] - times[0]
    steady = times > t0 + thresholds.steady_fraction * span
    if steady.sum() < 2:
        raise InsufficientDataError("too few steady-state packets")
    s_mean = lengths[steady].mean()
    s_std = lengths[steady].std()
    spike_threshold = float(s_mean + thresholds.spike_sigmas * s_std)

    events: list[NfEvent] = []
    used = np.zeros(times.size, dtype=bool)

    over = np.flatnonzero(lengths > spike_threshold)
    if over.size:
        i = int(over[0])
        events.append(NfEvent(float(times[i]), EventKind.REGISTRATION_SPIKE, int(lengths[i]), 1.0 / over.size))
        used[i] = True

    for d in deregistrations:
        j = int(np.searchsorted(times, d, side="left"))
        if j < times.size and not used[j]:
            events.append(NfEvent(float(times[j]), EventKind.DEREGISTRATION, int(lengths[j]), 1.0))
            used[j] = True

    classes = classify_sizes(lengths[steady & ~used].astype(np.int64))
    rest = ~used
    if classes.single_class:
        is_request = rest.copy()
        is_ack = np.zeros(times.size, dtype=bool)
    else:
        is_request = rest & (lengths > classes.threshold)
        is_ack = rest & (lengths <= classes.threshold)

    req_period = _gated_period(list(times[is_request]), thresholds.periodicity_gate)
    if req_period is not None:
        idx = np.flatnonzero(is_request)
        answered = _answered(times[idx], peer, req_period.period / 2)
        for i, ok in zip(idx, answered):
            events.append(NfEvent(float(times[i]), EventKind.HEARTBEAT_REQUEST, int(lengths[i]), 1.0 if ok else 0.5))

    ack_period = _gated_period(list(times[is_ack]), thresholds.periodicity_gate)
    if ack_period is not None:
        idx = np.flatnonzero(is_ack)
        preceded = _preceded(times[idx], peer, ack_period.period / 2)
        for i, ok in zip(idx, preceded):
            events.append(NfEvent(float(times[i]), EventKind.HEARTBEAT_ACK, int(lengths[i]), 1.0 if ok else 0.5))

    events.sort(key=lambda e: (e.timestamp, e.kind.value))
    return EventReport(events, spike_threshold, classes, req_period, ack_period)
