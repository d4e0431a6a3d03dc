"""Desk-scale 5G core control-plane testbed with a functional NWDAF.

Simulated NFs register with and heartbeat to an NRF, a capture tap turns
their signalling into packet traces, and the NWDAF analytics engine turns
traces into protocol statistics, throughput series, NF events and
placement recommendations.
"""

from .analytics import (
    Direction,
    EventKind,
    InsufficientDataError,
    NfEvent,
    PeriodEstimate,
    ProtocolStats,
    SizeClasses,
    Thresholds,
    ThroughputSeries,
    classify_sizes,
    detect_events,
    estimate_period,
    event_report,
    length_stats,
    one_way_series,
    pair_throughput,
    packets_per_protocol,
)
from .capture import Message, Tap, TraceFormatError, export_csv, ingest_csv
from .nf_agents import (
    AgentSpec,
    Behavior,
    Chatty,
    ConfigError,
    EventQueue,
    Simulation,
    SimulationConfig,
    default_config,
    load_config,
    run_simulation,
)
from .nrf_registry import NrfRegistry, ProfilePatch, ResponseCode, StatusSubscription
from .nwdaf_service import (
    AnalyticsId,
    AnalyticsSubscriptionRecord,
    Decision,
    ExchangeProfile,
    Nwdaf,
    PlacementRecommendation,
    RecordFilter,
    recommend_placement,
)
from .sba_model import (
    NfProfile,
    NfStatus,
    NfType,
    PacketRecord,
    Protocol,
    Topology,
    Trace,
    parse_nf_type,
    parse_protocol,
    validate_trace,
)

__version__ = "0.1.0"

__all__ = [
    "AgentSpec",
    "AnalyticsId",
    "AnalyticsSubscriptionRecord",
    "Behavior",
    "Chatty",
    "ConfigError",
    "Decision",
    "Direction",
    "EventKind",
    "EventQueue",
    "ExchangeProfile",
    "InsufficientDataError",
    "Message",
    "NfEvent",
    "NfProfile",
    "NfStatus",
    "NfType",
    "NrfRegistry",
    "Nwdaf",
    "PacketRecord",
    "PeriodEstimate",
    "PlacementRecommendation",
    "ProfilePatch",
    "Protocol",
    "ProtocolStats",
    "RecordFilter",
    "ResponseCode",
    "Simulation",
    "SimulationConfig",
    "SizeClasses",
    "StatusSubscription",
    "Tap",
    "Thresholds",
    "ThroughputSeries",
    "Topology",
    "Trace",
    "TraceFormatError",
    "classify_sizes",
    "default_config",
    "detect_events",
    "estimate_period",
    "event_report",
    "export_csv",
    "ingest_csv",
    "length_stats",
    "load_config",
    "one_way_series",
    "packets_per_protocol",
    "pair_throughput",
    "parse_nf_type",
    "parse_protocol",
    "recommend_placement",
    "run_simulation",
    "validate_trace",
]
