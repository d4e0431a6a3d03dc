"""JSON-over-HTTP front end for a live simulation, its NRF and its NWDAF.

Routes (all bodies JSON)::

    GET    /nnwdaf-analyticsinfo/v1/analytics?analytics-id=PROTOCOL_COUNTS
    POST   /nnwdaf-eventssubscription/v1/subscriptions
    DELETE /nnwdaf-eventssubscription/v1/subscriptions/{id}
    GET    /nnwdaf-eventssubscription/v1/subscriptions/{id}/notifications
    POST   /nnwdaf-datamanagement/v1/subscriptions
    DELETE /nnwdaf-datamanagement/v1/subscriptions/{id}
    GET    /nnwdaf-datamanagement/v1/subscriptions/{id}/batches
    GET    /nnwdaf-mlmodelprovision/v1/...  and /nnwdaf-mlmodelinfo/v1/...  (501)
    GET    /nnwdaf/v1/services
    GET    /nnrf-nfm/v1/nf-instances          registry debug dump
    GET    /control/status
    POST   /control/advance    {"until": seconds}
    POST   /control/shutdown

Notifications are kept in a per-subscription outbox.  When the notify
target is an ``http(s)://`` URL they are also POSTed there.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional
from urllib.parse import parse_qs, urlparse

from .capture import export_csv
from .nf_agents import Simulation, SimulationConfig
from .nrf_registry import ConflictError, NotFoundError
from .nwdaf_service import (
    SERVICE_CATALOG,
    AnalyticsId,
    AnalyticsSubscriptionRecord,
    DataBatch,
    Nwdaf,
    RecordFilter,
    run_with_nwdaf,
)
from .analytics import Thresholds, DEFAULTS
from .sba_model import dumps

logger = logging.getLogger(__name__)


class ServeSession:
    """Simulation, NRF and NWDAF driven together under one lock."""

    def __init__(self, config: SimulationConfig, thresholds: Thresholds = DEFAULTS, out_path: Optional[str] = None):
        self.sim = Simulation(config)
        self.nwdaf = Nwdaf(self.sim, registry=self.sim.registry, thresholds=thresholds)
        self.sim.tap.add_listener(self.nwdaf.on_record)
        self.out_path = out_path
        self.lock = threading.RLock()
        self.outbox: dict[str, list] = {}
        self.shutdown_requested = threading.Event()

    def _sink(self, key: str, url: Optional[str]):
        box = self.outbox.setdefault(key, [])

        def deliver(item):
            payload = item.to_dict() if hasattr(item, "to_dict") else _batch_dict(item)
            box.append(payload)
            if url:
                _post_json(url, payload)

        return deliver

    def advance(self, until: float) -> float:
        with self.lock:
            until = max(until, self.nwdaf.now)
            run_with_nwdaf(self.sim, self.nwdaf, until)
            return self.nwdaf.now

    def status(self) -> dict:
        with self.lock:
            return {
                "now": self.nwdaf.now,
                "records": len(self.sim.tap.records),
                "duration": self.sim.config.duration,
                "done": self.sim.done,
            }

    def flush(self) -> None:
        if self.out_path:
            with self.lock:
                export_csv(self.sim.trace(), self.out_path)
            logger.info("trace flushed to %s", self.out_path)

    # -- request handlers return (status, body) ----------------------------------

    def analytics_info(self, query: dict):
        ids = query.get("analytics-id")
        if not ids:
            return 400, {"error": "analytics-id query parameter required"}
        try:
            aid = AnalyticsId.parse(ids[0])
        except ValueError as exc:
            return 400, {"error": str(exc)}
        with self.lock:
            try:
                return 200, self.nwdaf.analytics_info(aid).to_dict()
            except NotFoundError as exc:
                return 404, {"error": str(exc)}

    def subscribe(self, body: dict):
        try:
            sub_id = body["subscriptionId"]
            target = body.get("notifyTarget", sub_id)
            record = AnalyticsSubscriptionRecord(
                subscription_id=sub_id,
                consumer=body["consumer"],
                analytics=AnalyticsId.parse(body["analytics"]),
                cadence=float(body["cadence"]),
                notify_target=target,
            )
        except (KeyError, TypeError, ValueError) as exc:
            return 400, {"error": f"bad subscription body: {exc}"}
        with self.lock:
            if self.nwdaf.has_subscription(sub_id):
                return 409, {"error": f"subscription {sub_id!r} already exists"}
            url = target if target.startswith(("http://", "https://")) else None
            self.nwdaf.add_endpoint(f"sub:{sub_id}", self._sink(sub_id, url))
            try:
                self.nwdaf.analytics_subscribe(
                    AnalyticsSubscriptionRecord(
                        record.subscription_id, record.consumer, record.analytics, record.cadence, f"sub:{sub_id}"
                    )
                )
            except ConflictError as exc:
                return 409, {"error": str(exc)}
            except ValueError as exc:
                return 400, {"error": str(exc)}
        return 201, {"subscriptionId": sub_id}

    def unsubscribe(self, sub_id: str):
        with self.lock:
            try:
                self.nwdaf.analytics_unsubscribe(sub_id)
            except NotFoundError as exc:
                return 404, {"error": str(exc)}
        return 204, None

    def data_subscribe(self, body: dict):
        try:
            consumer = body["consumer"]
            flt = RecordFilter(**body.get("filter", {}))
            target = body.get("notifyTarget", consumer)
            historical = bool(body.get("historical", False))
            cadence = body.get("cadence")
        except (KeyError, TypeError) as exc:
            return 400, {"error": f"bad data subscription body: {exc}"}
        with self.lock:
            key = f"dm-target:{consumer}:{target}"
            url = target if target.startswith(("http://", "https://")) else None
            if key not in self.outbox:
                self.nwdaf.add_endpoint(key, self._sink(key, url))
            sub_id = self.nwdaf.data_management_subscribe(consumer, flt, key, historical, cadence)
        return 201, {"subscriptionId": sub_id}

    def data_unsubscribe(self, sub_id: str):
        with self.lock:
            try:
                self.nwdaf.data_management_unsubscribe(sub_id)
            except NotFoundError as exc:
                return 404, {"error": str(exc)}
        return 204, None

    def batches(self, sub_id: str):
        with self.lock:
            subs = {s.subscription_id: s for s in self.nwdaf.data_subscriptions()}
            if sub_id not in subs:
                return 404, {"error": f"unknown subscription {sub_id!r}"}
            box = self.outbox.get(subs[sub_id].notify_target, [])
            return 200, [b for b in box if b["subscriptionId"] == sub_id]

    def notifications(self, sub_id: str):
        with self.lock:
            if not self.nwdaf.has_subscription(sub_id):
                return 404, {"error": f"unknown subscription {sub_id!r}"}
            return 200, list(self.outbox.get(sub_id, []))


def _batch_dict(batch: DataBatch) -> dict:
    return {
        "subscriptionId": batch.subscription_id,
        "seq": batch.seq,
        "historical": batch.historical,
        "records": [[r.timestamp, r.src, r.dst, str(r.protocol), r.length] for r in batch.records],
    }


def _post_json(url: str, payload: dict) -> None:
    req = urllib.request.Request(
        url, data=json.dumps(payload).encode(), headers={"Content-Type": "application/json"}, method="POST"
    )
    try:
        urllib.request.urlopen(req, timeout=2).close()
    except OSError as exc:
        logger.warning("notification to %s failed: %s", url, exc)


def make_handler(session: ServeSession):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            logger.debug("%s - " + fmt, self.address_string(), *args)

        def _send(self, status: int, body) -> None:
            data = b"" if body is None else dumps(body).encode()
            self.send_response(status)
            if body is not None:
                self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _body(self) -> dict:
            n = int(self.headers.get("Content-Length") or 0)
            if not n:
                return {}
            return json.loads(self.rfile.read(n))

        def do_GET(self):
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            if url.path == "/nnwdaf-analyticsinfo/v1/analytics":
                return self._send(*session.analytics_info(parse_qs(url.query)))
            if len(parts) == 5 and parts[:3] == ["nnwdaf-eventssubscription", "v1", "subscriptions"] and parts[4] == "notifications":
                return self._send(*session.notifications(parts[3]))
            if len(parts) == 5 and parts[:3] == ["nnwdaf-datamanagement", "v1", "subscriptions"] and parts[4] == "batches":
                return self._send(*session.batches(parts[3]))
            if parts and parts[0] in ("nnwdaf-mlmodelprovision", "nnwdaf-mlmodelinfo"):
                return self._send(501, session.nwdaf.ml_model_info() if parts[0].endswith("info") else session.nwdaf.ml_model_provision())
            if url.path == "/nnwdaf/v1/services":
                return self._send(200, SERVICE_CATALOG)
            if url.path == "/nnrf-nfm/v1/nf-instances":
                with session.lock:
                    return self._send(200, json.loads(session.sim.registry.dump_json()))
            if url.path == "/control/status":
                return self._send(200, session.status())
            self._send(404, {"error": f"no route for GET {url.path}"})

        def do_POST(self):
            url = urlparse(self.path)
            try:
                body = self._body()
            except json.JSONDecodeError:
                return self._send(400, {"error": "body is not valid JSON"})
            if url.path == "/nnwdaf-eventssubscription/v1/subscriptions":
                return self._send(*session.subscribe(body))
            if url.path == "/nnwdaf-datamanagement/v1/subscriptions":
                return self._send(*session.data_subscribe(body))
            if url.path == "/control/advance":
                try:
                    until = float(body["until"])
                except (KeyError, TypeError, ValueError):
                    return self._send(400, {"error": "expected {\"until\": seconds}"})
                return self._send(200, {"now": session.advance(until)})
            if url.path == "/control/shutdown":
                session.shutdown_requested.set()
                self._send(202, {"status": "shutting down"})
                threading.Thread(target=self.server.shutdown, daemon=True).start()
                return
            self._send(404, {"error": f"no route for POST {url.path}"})

        def do_DELETE(self):
            parts = [p for p in urlparse(self.path).path.split("/") if p]
            if len(parts) == 4 and parts[:3] == ["nnwdaf-eventssubscription", "v1", "subscriptions"]:
                return self._send(*session.unsubscribe(parts[3]))
            if len(parts) == 4 and parts[:3] == ["nnwdaf-datamanagement", "v1", "subscriptions"]:
                return self._send(*session.data_unsubscribe(parts[3]))
            self._send(404, {"error": f"no route for DELETE {self.path}"})

    return Handler


def make_server(session: ServeSession, host: str, port: int) -> ThreadingHTTPServer:
    """Bind the HTTP front end; raises OSError if the address is unavailable."""
    server = ThreadingHTTPServer((host, port), make_handler(session))
    server.daemon_threads = True
    return server


def pace(session: ServeSession, virtual_per_second: float, stop: threading.Event, tick: float = 0.1) -> None:
    """Advance virtual time in step with the wall clock until the run ends or ``stop`` is set."""
    while not stop.is_set():
        target = session.nwdaf.now + virtual_per_second * tick
        session.advance(min(target, session.sim.config.duration))
        if session.nwdaf.now >= session.sim.config.duration:
            return
        time.sleep(tick)
