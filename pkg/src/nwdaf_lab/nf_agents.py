"""Deterministic discrete-event simulation of NF agents talking to the NRF.

Agents are small state machines driven by a single event loop on a
virtual clock.  Every message they exchange passes through a capture
:class:`~nwdaf_lab.capture.Tap`, so a run yields a packet trace.

Timing model:
  * a request at ``t`` gets its response at ``t + latency``;
  * with ``transport_acks`` on, the requester acknowledges that
    response at ``t + 2 * latency`` with a header-only packet;
  * heartbeats are anchored to a grid ``start + k * interval`` and
    perturbed by gaussian jitter clamped to +/- 3 sigma;
  * an exchange is only started if it completes by ``duration``
    (both at its nominal and at its jittered time).
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Optional, Union

import numpy as np

from .capture import Message, Tap
from .nrf_registry import HEADER_BYTES, NrfRegistry, ProfilePatch, ResponseCode
from .sba_model import (
    NfProfile,
    NfType,
    Protocol,
    ProtocolLike,
    Topology,
    Trace,
    parse_nf_type,
    parse_protocol,
)

logger = logging.getLogger(__name__)

DEFAULT_JITTER = 0.05
DEFAULT_LATENCY = 0.001
DEFAULT_DURATION = 8280.0  # 138 minutes


class ConfigError(ValueError):
    """Invalid simulation configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, reason: str):
        self.field = field_name
        super().__init__(f"{field_name}: {reason}")


# -- event queue -------------------------------------------------------------


@dataclass(order=True)
class Event:
    time: float
    agent: str
    seq: int = 0
    action: Callable[[], None] = field(default=None, compare=False, repr=False)
    label: str = field(default="", compare=False)


class EventQueue:
    """Priority queue ordered by ``(time, agent, seq)`` with a virtual clock.

    ``seq`` is assigned on insertion, so two events for the same agent at
    the same time come out in scheduling order.
    """

    def __init__(self, start: float = 0.0):
        self.now = float(start)
        self._heap: list[Event] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, event: Event) -> Event:
        if event.time < self.now:
            raise ValueError(f"cannot schedule at t={event.time} before clock t={self.now}")
        self._seq += 1
        event.seq = self._seq
        heapq.heappush(self._heap, event)
        return event

    def peek_time(self) -> Optional[float]:
        return self._heap[0].time if self._heap else None

    def pop(self) -> Event:
        event = heapq.heappop(self._heap)
        self.now = event.time
        return event


def schedule_event(queue: EventQueue, event: Event) -> None:
    queue.schedule(event)


def next_event(queue: EventQueue) -> Event:
    return queue.pop()


# -- configuration -------------------------------------------------------------


class Behavior(str, Enum):
    REGISTER_THEN_HEARTBEAT = "REGISTER_THEN_HEARTBEAT"
    REGISTER_ONLY = "REGISTER_ONLY"
    CHATTY = "CHATTY"


@dataclass(frozen=True)
class Chatty:
    """Periodic protocol-labelled exchange with a peer, standing in for non-SBI signalling."""

    peer: str
    period: float
    size: int
    protocol: ProtocolLike = Protocol.PFCP
    response_size: Optional[int] = None


@dataclass(frozen=True)
class AgentSpec:
    profile: NfProfile
    behavior: Union[Behavior, Chatty] = Behavior.REGISTER_THEN_HEARTBEAT
    start_time: float = 0.0
    jitter_stddev: float = DEFAULT_JITTER
    stop_time: Optional[float] = None

    @property
    def kind(self) -> Behavior:
        return Behavior.CHATTY if isinstance(self.behavior, Chatty) else self.behavior

    @property
    def period(self) -> float:
        if isinstance(self.behavior, Chatty):
            return self.behavior.period
        return float(self.profile.heartbeat_interval)


@dataclass(frozen=True)
class SimulationConfig:
    topology: Topology
    agents: tuple[AgentSpec, ...]
    duration: float = DEFAULT_DURATION
    seed: int = 0
    latency: float = DEFAULT_LATENCY
    transport_acks: bool = False

    def validate(self) -> None:
        """Raise :class:`ConfigError` on the first broken invariant."""
        if not self.duration > 0:
            raise ConfigError("duration_s", "must be > 0")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed", "must be an unsigned integer")
        if not self.latency >= 0:
            raise ConfigError("latency_s", "must be ≥ 0")
        problems = self.topology.violations()
        if problems:
            raise ConfigError("topology", problems[0])
        nrfs = [n for n, t in self.topology.nodes if t == NfType.NRF]
        if len(nrfs) != 1:
            raise ConfigError("topology.nodes", f"exactly one NRF node required, found {len(nrfs)}")
        names = self.topology.names
        seen = set()
        for i, agent in enumerate(self.agents):
            where = f"agents[{i}]"
            p = agent.profile
            if p.instance_id not in names:
                raise ConfigError(f"{where}.instance_id", f"{p.instance_id!r} is not a topology node")
            if p.instance_id in seen:
                raise ConfigError(f"{where}.instance_id", f"duplicate agent {p.instance_id!r}")
            if p.instance_id == self.nrf:
                raise ConfigError(f"{where}.instance_id", "the NRF is not an agent")
            seen.add(p.instance_id)
            bad = p.violations()
            if bad:
                raise ConfigError(f"{where}", bad[0])
            if agent.start_time < 0:
                raise ConfigError(f"{where}.start_time_s", "must be ≥ 0")
            if agent.jitter_stddev < 0:
                raise ConfigError(f"{where}.jitter_stddev_s", "must be ≥ 0")
            if agent.jitter_stddev >= agent.period / 2:
                raise ConfigError(f"{where}.jitter_stddev_s", "must be < period / 2")
            if isinstance(agent.behavior, Chatty):
                c = agent.behavior
                if c.peer not in names or c.peer == p.instance_id:
                    raise ConfigError(f"{where}.behavior.peer", f"{c.peer!r} is not another topology node")
                if not c.period > 0:
                    raise ConfigError(f"{where}.behavior.period_s", "must be > 0")
                if c.size < 1 or (c.response_size is not None and c.response_size < 1):
                    raise ConfigError(f"{where}.behavior.size_bytes", "must be ≥ 1")

    @property
    def nrf(self) -> str:
        return next(n for n, t in self.topology.nodes if t == NfType.NRF)


# -- agents -------------------------------------------------------------------


class _Agent:
    def __init__(self, sim: "Simulation", spec: AgentSpec):
        self.sim = sim
        self.spec = spec
        self.id = spec.profile.instance_id
        self.registered = False

    def first_action(self) -> None:
        spec = self.spec
        if spec.kind == Behavior.CHATTY:
            self.sim._at(spec.start_time, self.id, self.chat, "chatty", nominal=spec.start_time)
        else:
            self.sim._at(spec.start_time, self.id, self.register, "register", nominal=spec.start_time)
        if spec.stop_time is not None and spec.kind != Behavior.CHATTY:
            self.sim._at(spec.stop_time, self.id, self.deregister, "deregister", nominal=spec.stop_time)

    def register(self) -> None:
        if not self.sim._fits(self.sim.queue.now):
            return
        self.registered = self.sim._sbi_exchange(self.id, "PUT", self.spec.profile)
        if self.spec.kind == Behavior.REGISTER_THEN_HEARTBEAT:
            self.schedule_beat(1)

    def schedule_beat(self, k: int) -> None:
        spec = self.spec
        nominal = spec.start_time + k * spec.profile.heartbeat_interval
        if spec.stop_time is not None and nominal >= spec.stop_time:
            return
        self.sim._at(
            nominal + self.sim._jitter(spec.jitter_stddev), self.id, lambda: self.beat(k), "heartbeat", nominal
        )

    def beat(self, k: int) -> None:
        if not self.sim._fits(self.sim.queue.now):
            return
        if self.registered:
            patch = ProfilePatch(load=self.spec.profile.load)
            self.registered = self.sim._sbi_exchange(self.id, "PATCH", patch)
        else:
            self.registered = self.sim._sbi_exchange(self.id, "PUT", self.spec.profile)
        self.schedule_beat(k + 1)

    def deregister(self) -> None:
        if self.registered and self.sim._fits(self.sim.queue.now):
            self.sim._sbi_exchange(self.id, "DELETE", None)
            self.registered = False

    def chat(self, k: int = 0) -> None:
        c: Chatty = self.spec.behavior
        if self.sim._fits(self.sim.queue.now):
            resp = c.response_size if c.response_size is not None else c.size
            self.sim._exchange(self.id, c.peer, c.size, resp, c.protocol)
        nominal = self.spec.start_time + (k + 1) * c.period
        if self.spec.stop_time is not None and nominal >= self.spec.stop_time:
            return
        self.sim._at(
            nominal + self.sim._jitter(self.spec.jitter_stddev),
            self.id,
            lambda: self.chat(k + 1),
            "chatty",
            nominal,
        )


class Simulation:
    """Stepwise runner; :func:`run_simulation` is the one-shot wrapper.

    Attributes:
        registry: the NRF state machine the agents talk to.
        tap: capture point for every exchanged message.
        exchanges: number of request/response exchanges executed.
        acks: number of transport acknowledgements emitted.
    """

    def __init__(self, config: SimulationConfig, registry: Optional[NrfRegistry] = None, tap: Optional[Tap] = None):
        config.validate()
        self.config = config
        self.registry = registry if registry is not None else NrfRegistry()
        self.tap = tap if tap is not None else Tap(config.topology)
        self.queue = EventQueue()
        self.rng = np.random.default_rng(config.seed)
        self.exchanges = 0
        self.acks = 0
        self.nrf = config.nrf
        self._span = config.latency * (2 if config.transport_acks else 1)
        self._agents = [_Agent(self, spec) for spec in sorted(config.agents, key=lambda a: a.profile.instance_id)]
        for agent in self._agents:
            agent.first_action()

    def _jitter(self, sigma: float) -> float:
        if sigma <= 0:
            return 0.0
        return float(np.clip(self.rng.normal(0.0, sigma), -3 * sigma, 3 * sigma))

    def _fits(self, t: float) -> bool:
        return t + self._span <= self.config.duration

    def _at(self, t: float, agent: str, action, label: str, nominal: float) -> None:
        # nominal-time gate keeps exchange counts independent of the seed
        if nominal + self._span > self.config.duration:
            return
        self.queue.schedule(Event(max(t, self.queue.now), agent, action=action, label=label))

    def _emit(self, t: float, agent: str, message: Message) -> None:
        self.queue.schedule(Event(t, agent, action=lambda: self.tap.tap_record(message, t), label=message.kind))

    def _exchange(self, src: str, dst: str, req_size: int, resp_size: int, protocol: ProtocolLike, kind: str = "") -> None:
        now = self.queue.now
        lat = self.config.latency
        self.tap.tap_record(Message(src, dst, req_size, protocol, kind), now)
        self._emit(now + lat, src, Message(dst, src, resp_size, protocol, kind + "-response"))
        if self.config.transport_acks:
            self._emit(now + 2 * lat, src, Message(src, dst, HEADER_BYTES, protocol, "ack"))
            self.acks += 1
        self.exchanges += 1

    def _sbi_exchange(self, agent: str, method: str, body) -> bool:
        """Run one registry exchange; returns whether the agent is registered afterwards."""
        now = self.queue.now
        if method == "PUT":
            req = len(body.to_json().encode()) + HEADER_BYTES
            resp = self.registry.register(body, now)
        elif method == "PATCH":
            req = len(body.to_json().encode()) + HEADER_BYTES
            resp = self.registry.heartbeat(agent, body, now)
        else:
            req = HEADER_BYTES
            resp = self.registry.deregister(agent, now)
        self._exchange(agent, self.nrf, req, resp.size_estimate, Protocol.TCP, method)
        if method == "DELETE":
            return False
        return resp.code in (ResponseCode.CREATED, ResponseCode.OK, ResponseCode.NO_CONTENT)

    def run_until(self, t: float) -> None:
        t = min(t, self.config.duration)
        while self.queue and self.queue.peek_time() <= t:
            self.queue.pop().action()
        self.queue.now = max(self.queue.now, t)

    def run(self) -> "Simulation":
        self.run_until(self.config.duration)
        return self

    @property
    def now(self) -> float:
        return self.queue.now

    @property
    def done(self) -> bool:
        return self.queue.now >= self.config.duration or not self.queue

    def trace(self) -> Trace:
        return self.tap.trace(duration=self.config.duration if self.done else self.queue.now)


def run_simulation(config: SimulationConfig) -> Trace:
    """Run ``config`` to completion and return the captured trace."""
    return Simulation(config).run().trace()


# -- config files ---------------------------------------------------------------


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}.{key}" if where else key, "missing")
    return d[key]


def _agent_from_dict(d: dict, i: int) -> AgentSpec:
    where = f"agents[{i}]"
    try:
        profile = NfProfile(
            instance_id=_require(d, "instance_id", where),
            nf_type=parse_nf_type(_require(d, "nf_type", where)),
            heartbeat_interval=d.get("heartbeat_interval_s", 10),
            load=d.get("load", 0),
            services=tuple(d.get("services", ())),
        )
        behavior = d.get("behavior", "REGISTER_THEN_HEARTBEAT")
        if isinstance(behavior, dict):
            bw = f"{where}.behavior"
            kind = _require(behavior, "kind", bw)
            if kind != "CHATTY":
                raise ConfigError(f"{bw}.kind", f"unknown behavior {kind!r}")
            behavior = Chatty(
                peer=_require(behavior, "peer", bw),
                period=float(_require(behavior, "period_s", bw)),
                size=int(_require(behavior, "size_bytes", bw)),
                protocol=parse_protocol(behavior.get("protocol", "PFCP")),
                response_size=behavior.get("response_size_bytes"),
            )
        else:
            try:
                behavior = Behavior(behavior)
            except ValueError:
                raise ConfigError(f"{where}.behavior", f"unknown behavior {behavior!r}") from None
            if behavior == Behavior.CHATTY:
                raise ConfigError(f"{where}.behavior", "CHATTY needs peer/period_s/size_bytes")
        stop = d.get("stop_time_s")
        return AgentSpec(
            profile=profile,
            behavior=behavior,
            start_time=float(d.get("start_time_s", 0.0)),
            jitter_stddev=float(d.get("jitter_stddev_s", DEFAULT_JITTER)),
            stop_time=None if stop is None else float(stop),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(where, str(exc)) from None


_TOP_LEVEL_KEYS = ("duration_s", "seed", "latency_s", "transport_acks", "topology", "agents", "description")


def config_from_dict(d: dict) -> SimulationConfig:
    """Build and validate a :class:`SimulationConfig` from a parsed config tree."""
    if not isinstance(d, dict):
        raise ConfigError("<root>", "expected an object")
    for key in d:
        if key not in _TOP_LEVEL_KEYS:
            raise ConfigError(key, "unknown key")
    topo = _require(d, "topology", "")
    nodes = _require(topo, "nodes", "topology")
    try:
        topology = Topology.build(
            [(n["name"], n["type"]) for n in nodes],
            [tuple(link) for link in topo.get("links", [])],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("topology.nodes", f"malformed node entry ({exc})") from None
    agents = tuple(_agent_from_dict(a, i) for i, a in enumerate(_require(d, "agents", "")))
    config = SimulationConfig(
        topology=topology,
        agents=agents,
        duration=float(d.get("duration_s", DEFAULT_DURATION)),
        seed=d.get("seed", 0),
        latency=float(d.get("latency_s", DEFAULT_LATENCY)),
        transport_acks=bool(d.get("transport_acks", False)),
    )
    config.validate()
    return config


def load_config(path: Union[str, Path]) -> SimulationConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(tree)


def default_config_dict() -> dict[str, Any]:
    """The packaged 138-minute mixed scenario."""
    text = resources.files("nwdaf_lab").joinpath("data/default_scenario.json").read_text(encoding="utf-8")
    return json.loads(text)


def default_config(**overrides) -> SimulationConfig:
    """The packaged scenario, with ``SimulationConfig`` fields overridden by keyword."""
    config = replace(config_from_dict(default_config_dict()), **overrides)
    config.validate()
    return config


def without_jitter(config: SimulationConfig) -> SimulationConfig:
    return replace(config, agents=tuple(replace(a, jitter_stddev=0.0) for a in config.agents))
