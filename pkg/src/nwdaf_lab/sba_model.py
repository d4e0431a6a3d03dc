"""Shared domain types for the simulated 5G core control plane.

Everything here is a plain value: NF identities and profiles, the status
lifecycle, protocol labels, captured packets, traces and topologies.
Validation is exposed as functions returning violation lists so that
callers (the registry, the CSV reader) can decide how to react.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple, Optional, Union


class NfType(str, Enum):
    NRF = "NRF"
    BSF = "BSF"
    AMF = "AMF"
    SMF = "SMF"
    UPF = "UPF"
    AUSF = "AUSF"
    UDM = "UDM"
    UDR = "UDR"
    PCF = "PCF"
    NSSF = "NSSF"
    NWDAF = "NWDAF"
    GNB = "GNB"

    def __str__(self) -> str:
        return self.value


class Protocol(str, Enum):
    TCP = "TCP"
    SSL = "SSL"
    PFCP = "PFCP"
    NGAP_SETUP = "NGAP_SETUP"
    NGAP_INITIAL = "NGAP_INITIAL"
    NGAP_UPLINK = "NGAP_UPLINK"
    SCTP = "SCTP"
    ICMP = "ICMP"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class OtherNfType:
    """An NF type outside the known catalog, kept by name."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class OtherProtocol:
    """A protocol label outside the known taxonomy, kept verbatim."""

    name: str

    def __str__(self) -> str:
        return self.name


NfTypeLike = Union[NfType, OtherNfType]
ProtocolLike = Union[Protocol, OtherProtocol]

_NF_TYPES = {t.value: t for t in NfType}
_PROTOCOLS = {p.value: p for p in Protocol}


def parse_nf_type(text: str) -> NfTypeLike:
    if not text:
        raise ValueError("NF type label must be non-empty")
    return _NF_TYPES.get(text) or OtherNfType(text)


def parse_protocol(text: str) -> ProtocolLike:
    """Map a protocol label to :class:`Protocol`, falling back to :class:`OtherProtocol`.

    Matching is exact (case-sensitive) so that every label round-trips
    through ``str()`` unchanged.
    """
    if not text:
        raise ValueError("protocol label must be non-empty")
    return _PROTOCOLS.get(text) or OtherProtocol(text)


def render(value: Union[NfTypeLike, ProtocolLike]) -> str:
    return str(value)


class NfStatus(str, Enum):
    REGISTERED = "REGISTERED"
    SUSPENDED = "SUSPENDED"
    DEREGISTERED = "DEREGISTERED"

    def __str__(self) -> str:
        return self.value


LEGAL_TRANSITIONS = frozenset(
    {
        (NfStatus.DEREGISTERED, NfStatus.REGISTERED),
        (NfStatus.REGISTERED, NfStatus.SUSPENDED),
        (NfStatus.SUSPENDED, NfStatus.REGISTERED),
        (NfStatus.REGISTERED, NfStatus.DEREGISTERED),
        (NfStatus.SUSPENDED, NfStatus.DEREGISTERED),
    }
)


class IllegalTransition(ValueError):
    pass


def is_legal_transition(old: NfStatus, new: NfStatus) -> bool:
    return (old, new) in LEGAL_TRANSITIONS


def check_transition(old: NfStatus, new: NfStatus) -> NfStatus:
    """Return ``new`` if ``old -> new`` is a legal lifecycle step, else raise."""
    if not is_legal_transition(old, new):
        raise IllegalTransition(f"illegal NF status transition {old} -> {new}")
    return new


@dataclass(frozen=True)
class NfProfile:
    """Registry unit of state for one NF instance.

    Construction does not validate; use :meth:`violations` so that a
    registry can answer BAD_REQUEST instead of raising.
    """

    instance_id: str
    nf_type: NfTypeLike
    status: NfStatus = NfStatus.REGISTERED
    heartbeat_interval: int = 10
    load: int = 0
    services: tuple[str, ...] = ()
    registered_at: Optional[float] = None

    def violations(self) -> list[str]:
        problems = []
        if not self.instance_id:
            problems.append("instance_id must be non-empty")
        if isinstance(self.heartbeat_interval, bool) or not isinstance(self.heartbeat_interval, int):
            problems.append("heartbeat_interval must be an integer")
        elif self.heartbeat_interval <= 0:
            problems.append("heartbeat_interval must be > 0")
        if not 0 <= self.load <= 100:
            problems.append("load must be in [0, 100]")
        return problems

    def is_valid(self) -> bool:
        return not self.violations()

    def to_dict(self) -> dict:
        # key names follow the NRF profile naming convention
        d = {
            "nfInstanceId": self.instance_id,
            "nfType": str(self.nf_type),
            "nfStatus": str(self.status),
            "heartBeatTimer": self.heartbeat_interval,
            "load": self.load,
            "nfServices": list(self.services),
        }
        if self.registered_at is not None:
            d["registeredAt"] = self.registered_at
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NfProfile":
        return cls(
            instance_id=d["nfInstanceId"],
            nf_type=parse_nf_type(d["nfType"]),
            status=NfStatus(d.get("nfStatus", "REGISTERED")),
            heartbeat_interval=d.get("heartBeatTimer", 10),
            load=d.get("load", 0),
            services=tuple(d.get("nfServices", ())),
            registered_at=d.get("registeredAt"),
        )

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def with_changes(self, **changes) -> "NfProfile":
        return replace(self, **changes)


def dumps(obj) -> str:
    """Canonical compact JSON used for every size estimate."""
    return json.dumps(obj, separators=(",", ":"), sort_keys=True)


class PacketRecord(NamedTuple):
    timestamp: float
    src: str
    dst: str
    protocol: ProtocolLike
    length: int


@dataclass(frozen=True)
class Topology:
    nodes: tuple[tuple[str, NfTypeLike], ...] = ()
    links: tuple[frozenset, ...] = ()

    @classmethod
    def build(cls, nodes, links=()) -> "Topology":
        """Convenience constructor accepting lists of pairs."""
        return cls(
            nodes=tuple((name, t if not isinstance(t, str) else parse_nf_type(t)) for name, t in nodes),
            links=tuple(frozenset(pair) for pair in links),
        )

    @property
    def names(self) -> set[str]:
        return {name for name, _ in self.nodes}

    def node_type(self, name: str) -> Optional[NfTypeLike]:
        for n, t in self.nodes:
            if n == name:
                return t
        return None

    def violations(self) -> list[str]:
        problems = []
        names = [n for n, _ in self.nodes]
        if len(set(names)) != len(names):
            problems.append("duplicate node names")
        declared = set(names)
        for i, link in enumerate(self.links):
            if len(link) != 2:
                problems.append(f"self-link at link {i}")
                continue
            for end in link:
                if end not in declared:
                    problems.append(f"link {i} names undeclared node {end!r}")
        return problems


@dataclass
class Trace:
    """Time-ordered packet records plus capture metadata.

    ``metadata`` carries free-form capture notes (e.g. how many rows were
    re-sorted on ingest) and is ignored by equality.
    """

    records: list[PacketRecord] = field(default_factory=list)
    duration: float = 0.0
    topology: Optional[Topology] = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def nodes(self) -> set[str]:
        names = set()
        for r in self.records:
            names.add(r.src)
            names.add(r.dst)
        if self.topology is not None:
            names |= self.topology.names
        return names


def validate_trace(trace: Trace) -> list[str]:
    """Return one message per broken Trace/PacketRecord invariant; ``[]`` when valid."""
    problems = []
    prev = None
    for i, r in enumerate(trace.records):
        if r.timestamp < 0:
            problems.append(f"timestamp ≥ 0 violated at index {i}")
        if r.length < 1:
            problems.append(f"length ≥ 1 violated at index {i}")
        if r.src == r.dst:
            problems.append(f"src ≠ dst violated at index {i}")
        if prev is not None and r.timestamp < prev:
            problems.append(f"ordering violated at index {i}")
        if r.timestamp > trace.duration:
            problems.append(f"timestamp ≤ duration violated at index {i}")
        prev = r.timestamp
    if trace.topology is not None:
        problems.extend(f"topology: {p}" for p in trace.topology.violations())
    return problems
