"""Network Repository Function: an HTTP-style registry state machine.

NFs register with a full profile (PUT), assert liveness with partial
updates (PATCH heartbeats), are discovered by type (GET) and leave with
DELETE.  Consumers subscribe (POST) to status transitions and receive one
notification per matching transition.

Heartbeat expiry is an explicit assumption, not taken from any standard
document: an instance silent for more than 3 heartbeat intervals is
SUSPENDED and one silent for more than 6 intervals is DEREGISTERED.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

from .sba_model import (
    NfProfile,
    NfStatus,
    NfTypeLike,
    check_transition,
    dumps,
    parse_nf_type,
)

logger = logging.getLogger(__name__)

HEADER_BYTES = 64
SUSPEND_AFTER = 3
DEREGISTER_AFTER = 6


class ResponseCode(str, Enum):
    CREATED = "CREATED"
    OK = "OK"
    NO_CONTENT = "NO_CONTENT"
    NOT_FOUND = "NOT_FOUND"
    CONFLICT = "CONFLICT"
    BAD_REQUEST = "BAD_REQUEST"

    @property
    def http_status(self) -> int:
        return _HTTP_STATUS[self]


_HTTP_STATUS = {
    ResponseCode.CREATED: 201,
    ResponseCode.OK: 200,
    ResponseCode.NO_CONTENT: 204,
    ResponseCode.NOT_FOUND: 404,
    ResponseCode.CONFLICT: 409,
    ResponseCode.BAD_REQUEST: 400,
}


class RegistryError(Exception):
    pass


class NotFoundError(RegistryError, LookupError):
    pass


class ConflictError(RegistryError):
    pass


@dataclass(frozen=True)
class ProfilePatch:
    """Heartbeat body.  ``status`` is mandatory; ``load`` is optional."""

    status: NfStatus = NfStatus.REGISTERED
    load: Optional[int] = None

    def to_dict(self) -> dict:
        d = {"nfStatus": str(self.status)}
        if self.load is not None:
            d["load"] = self.load
        return d

    def to_json(self) -> str:
        return dumps(self.to_dict())


def body_size(body) -> int:
    """Bytes on the wire: serialized JSON body plus a fixed header."""
    if body is None:
        return HEADER_BYTES
    if isinstance(body, list):
        text = dumps([p.to_dict() for p in body])
    else:
        text = body.to_json()
    return len(text.encode("utf-8")) + HEADER_BYTES


@dataclass(frozen=True)
class RegistryResponse:
    code: ResponseCode
    body: Union[NfProfile, list, None] = None
    size_estimate: int = HEADER_BYTES

    @classmethod
    def of(cls, code: ResponseCode, body=None) -> "RegistryResponse":
        return cls(code, body, body_size(body))


@dataclass(frozen=True)
class RegistryRequest:
    method: str
    target: str = ""
    body: Union[NfProfile, ProfilePatch, "StatusSubscription", None] = None
    issued_at: float = 0.0

    def violations(self) -> list[str]:
        if self.method not in ("PUT", "PATCH", "GET", "DELETE", "POST"):
            return [f"unsupported method {self.method}"]
        if self.method == "PUT" and not isinstance(self.body, NfProfile):
            return ["PUT requires a full NfProfile body"]
        if self.method == "PATCH" and not isinstance(self.body, ProfilePatch):
            return ["PATCH requires a ProfilePatch body"]
        if self.method in ("GET", "DELETE") and self.body is not None:
            return [f"{self.method} carries no body"]
        return []

    @property
    def size_estimate(self) -> int:
        return body_size(self.body if self.method in ("PUT", "PATCH") else None)


@dataclass(frozen=True)
class StatusNotification:
    subscription_id: str
    instance_id: str
    nf_type: NfTypeLike
    old_status: NfStatus
    new_status: NfStatus
    at: float

    @property
    def event(self) -> str:
        return f"NF_{self.new_status.value}"

    def to_dict(self) -> dict:
        return {
            "subscriptionId": self.subscription_id,
            "nfInstanceId": self.instance_id,
            "nfType": str(self.nf_type),
            "event": self.event,
            "from": str(self.old_status),
            "to": str(self.new_status),
            "at": self.at,
        }


@dataclass(frozen=True)
class StatusSubscription:
    """Interest in status transitions, optionally narrowed by NF type and target status.

    ``predicate`` may refine the match further; it receives
    ``(nf_type, old_status, new_status)``.
    """

    subscription_id: str
    consumer: str
    notify_target: str
    nf_type: Optional[NfTypeLike] = None
    to_status: Optional[NfStatus] = None
    predicate: Optional[Callable[[NfTypeLike, NfStatus, NfStatus], bool]] = field(
        default=None, compare=False
    )

    def matches(self, nf_type: NfTypeLike, old: NfStatus, new: NfStatus) -> bool:
        if self.nf_type is not None and nf_type != self.nf_type:
            return False
        if self.to_status is not None and new != self.to_status:
            return False
        if self.predicate is not None and not self.predicate(nf_type, old, new):
            return False
        return True

    def to_json(self) -> str:
        return dumps(
            {
                "subscriptionId": self.subscription_id,
                "consumer": self.consumer,
                "notifyTarget": self.notify_target,
                "nfType": None if self.nf_type is None else str(self.nf_type),
                "toStatus": None if self.to_status is None else str(self.to_status),
            }
        )

    @classmethod
    def from_dict(cls, d: dict) -> "StatusSubscription":
        return cls(
            subscription_id=d["subscriptionId"],
            consumer=d["consumer"],
            notify_target=d["notifyTarget"],
            nf_type=parse_nf_type(d["nfType"]) if d.get("nfType") else None,
            to_status=NfStatus(d["toStatus"]) if d.get("toStatus") else None,
        )


@dataclass(frozen=True)
class Transition:
    at: float
    instance_id: str
    old: Optional[NfStatus]
    new: NfStatus


class NrfRegistry:
    """In-memory NRF.

    All mutations run under one lock, and notifications are delivered
    synchronously while it is held, so each subscriber sees transitions
    in the order they were applied.

    Args:
        endpoints: notify-target name -> callable receiving a
            :class:`StatusNotification`.  More can be added with
            :meth:`add_endpoint`.
    """

    def __init__(self, endpoints: Optional[dict[str, Callable]] = None):
        self._lock = threading.RLock()
        self._profiles: dict[str, NfProfile] = {}
        self._last_heartbeat: dict[str, float] = {}
        self._subscriptions: dict[str, StatusSubscription] = {}
        self._endpoints: dict[str, Callable] = dict(endpoints or {})
        self.audit_log: list[Transition] = []

    # -- subscriber plumbing ---------------------------------------------

    def add_endpoint(self, name: str, callback: Callable) -> None:
        with self._lock:
            self._endpoints[name] = callback

    def subscribe(self, sub: StatusSubscription) -> str:
        with self._lock:
            if sub.notify_target not in self._endpoints:
                raise NotFoundError(f"notify target {sub.notify_target!r} is not resolvable")
            if sub.subscription_id in self._subscriptions:
                raise ConflictError(f"subscription {sub.subscription_id!r} already exists")
            self._subscriptions[sub.subscription_id] = sub
            return sub.subscription_id

    def unsubscribe(self, subscription_id: str) -> bool:
        with self._lock:
            if self._subscriptions.pop(subscription_id, None) is None:
                raise NotFoundError(f"unknown subscription {subscription_id!r}")
            return True

    def _transition(self, profile: NfProfile, old: Optional[NfStatus], new: NfStatus, now: float) -> None:
        if old is not None:
            check_transition(old, new)
        self.audit_log.append(Transition(now, profile.instance_id, old, new))
        effective_old = NfStatus.DEREGISTERED if old is None else old
        for sub in list(self._subscriptions.values()):
            if sub.matches(profile.nf_type, effective_old, new):
                note = StatusNotification(
                    sub.subscription_id, profile.instance_id, profile.nf_type, effective_old, new, now
                )
                self._endpoints[sub.notify_target](note)

    # -- NF management ------------------------------------------------------

    def register(self, profile: NfProfile, now: float) -> RegistryResponse:
        if profile.violations():
            logger.debug("rejecting registration of %s: %s", profile.instance_id, profile.violations())
            return RegistryResponse.of(ResponseCode.BAD_REQUEST)
        with self._lock:
            previous = self._profiles.get(profile.instance_id)
            stored = profile.with_changes(status=NfStatus.REGISTERED, registered_at=now)
            self._profiles[profile.instance_id] = stored
            self._last_heartbeat[profile.instance_id] = now
            old = None if previous is None else previous.status
            if old != NfStatus.REGISTERED:
                self._transition(stored, old, NfStatus.REGISTERED, now)
            code = ResponseCode.CREATED if previous is None else ResponseCode.OK
            return RegistryResponse.of(code, stored)

    def heartbeat(self, instance_id: str, patch: ProfilePatch, now: float) -> RegistryResponse:
        with self._lock:
            current = self._profiles.get(instance_id)
            if current is None or current.status == NfStatus.DEREGISTERED:
                return RegistryResponse.of(ResponseCode.NOT_FOUND)
            if patch.status != NfStatus.REGISTERED:
                return RegistryResponse.of(ResponseCode.BAD_REQUEST)
            if patch.load is not None and not 0 <= patch.load <= 100:
                return RegistryResponse.of(ResponseCode.BAD_REQUEST)
            self._last_heartbeat[instance_id] = now
            changes = {}
            if patch.status != current.status:
                changes["status"] = patch.status
            if patch.load is not None and patch.load != current.load:
                changes["load"] = patch.load
            if not changes:
                return RegistryResponse.of(ResponseCode.NO_CONTENT)
            updated = current.with_changes(**changes)
            self._profiles[instance_id] = updated
            if "status" in changes:
                self._transition(updated, current.status, updated.status, now)
            return RegistryResponse.of(ResponseCode.OK, updated)

    def deregister(self, instance_id: str, now: float = 0.0) -> RegistryResponse:
        with self._lock:
            current = self._profiles.get(instance_id)
            if current is None or current.status == NfStatus.DEREGISTERED:
                return RegistryResponse.of(ResponseCode.NOT_FOUND)
            # tombstone: kept for audit and so a repeat DELETE is NOT_FOUND
            gone = current.with_changes(status=NfStatus.DEREGISTERED)
            self._profiles[instance_id] = gone
            self._transition(gone, current.status, NfStatus.DEREGISTERED, now)
            return RegistryResponse.of(ResponseCode.NO_CONTENT)

    def expire_stale(self, now: float) -> list[tuple[str, NfStatus]]:
        applied = []
        with self._lock:
            for instance_id in sorted(self._profiles):
                profile = self._profiles[instance_id]
                silent = now - self._last_heartbeat[instance_id]
                interval = profile.heartbeat_interval
                if profile.status == NfStatus.REGISTERED and silent > SUSPEND_AFTER * interval:
                    profile = profile.with_changes(status=NfStatus.SUSPENDED)
                    self._profiles[instance_id] = profile
                    self._transition(profile, NfStatus.REGISTERED, NfStatus.SUSPENDED, now)
                    applied.append((instance_id, NfStatus.SUSPENDED))
                if profile.status == NfStatus.SUSPENDED and silent > DEREGISTER_AFTER * interval:
                    profile = profile.with_changes(status=NfStatus.DEREGISTERED)
                    self._profiles[instance_id] = profile
                    self._transition(profile, NfStatus.SUSPENDED, NfStatus.DEREGISTERED, now)
                    applied.append((instance_id, NfStatus.DEREGISTERED))
        return applied

    def discover(self, query: NfTypeLike) -> list[NfProfile]:
        with self._lock:
            return [
                p
                for _, p in sorted(self._profiles.items())
                if p.nf_type == query and p.status == NfStatus.REGISTERED
            ]

    # -- inspection ---------------------------------------------------------

    def get(self, instance_id: str) -> Optional[NfProfile]:
        with self._lock:
            return self._profiles.get(instance_id)

    def profiles(self) -> list[NfProfile]:
        with self._lock:
            return [p for _, p in sorted(self._profiles.items())]

    def status_history(self, instance_id: str) -> list[NfStatus]:
        with self._lock:
            return [t.new for t in self.audit_log if t.instance_id == instance_id]

    def deregistrations(self, instance_id: str) -> list[float]:
        with self._lock:
            return [
                t.at
                for t in self.audit_log
                if t.instance_id == instance_id and t.new == NfStatus.DEREGISTERED
            ]

    def dump_json(self) -> str:
        """Debug dump of every stored profile and subscription."""
        with self._lock:
            return dumps(
                {
                    "nfInstances": [p.to_dict() for p in self.profiles()],
                    "lastHeartbeat": dict(sorted(self._last_heartbeat.items())),
                    "subscriptions": sorted(self._subscriptions),
                }
            )

    # -- HTTP-style dispatch -------------------------------------------------

    def handle(self, request: RegistryRequest) -> RegistryResponse:
        if request.violations():
            return RegistryResponse.of(ResponseCode.BAD_REQUEST)
        now = request.issued_at
        if request.method == "PUT":
            if request.target and request.target != request.body.instance_id:
                return RegistryResponse.of(ResponseCode.BAD_REQUEST)
            return self.register(request.body, now)
        if request.method == "PATCH":
            return self.heartbeat(request.target, request.body, now)
        if request.method == "DELETE":
            return self.deregister(request.target, now)
        if request.method == "GET":
            try:
                nf_type = parse_nf_type(request.target)
            except ValueError:
                return RegistryResponse.of(ResponseCode.BAD_REQUEST)
            return RegistryResponse.of(ResponseCode.OK, self.discover(nf_type))
        # POST
        if not isinstance(request.body, StatusSubscription):
            return RegistryResponse.of(ResponseCode.BAD_REQUEST)
        try:
            self.subscribe(request.body)
        except ConflictError:
            return RegistryResponse.of(ResponseCode.CONFLICT)
        except NotFoundError:
            return RegistryResponse.of(ResponseCode.BAD_REQUEST)
        return RegistryResponse(ResponseCode.CREATED, None, body_size(request.body))
