"""Trace acquisition: an in-simulation tap and the CSV trace format.

CSV layout (header required, UTF-8, LF line endings)::

    timestamp_s,src,dst,protocol,length_bytes
    12.503,bsf-1,nrf-1,TCP,212

Optional ``#`` lines before the header carry capture metadata::

    # duration_s=8280
    # node=bsf-1:BSF
    # link=bsf-1:nrf-1

Registry (SBI) exchanges are labelled TCP because HTTP/2 control traffic
shows up as TCP in a packet capture.
"""

from __future__ import annotations

import bisect
import csv
import io
import logging
import os
import sys
from dataclasses import dataclass
from typing import Callable, Optional, TextIO

from .sba_model import (
    PacketRecord,
    Protocol,
    ProtocolLike,
    Topology,
    Trace,
    parse_nf_type,
    parse_protocol,
    validate_trace,
)

logger = logging.getLogger(__name__)

HEADER = ("timestamp_s", "src", "dst", "protocol", "length_bytes")


class TraceFormatError(ValueError):
    """A CSV trace row could not be parsed; carries the 1-based line and column name."""

    def __init__(self, line: int, column: Optional[str], reason: str):
        self.line = line
        self.column = column
        where = f"line {line}: {column} {reason}" if column else f"line {line}: {reason}"
        super().__init__(where)


@dataclass(frozen=True)
class Message:
    src: str
    dst: str
    size_estimate: int
    protocol: ProtocolLike = Protocol.TCP
    kind: str = ""


class Tap:
    """Records every message seen by the event loop as a :class:`PacketRecord`.

    Listeners are called with each new record; the NWDAF's data
    management service hooks in here for live streams.
    """

    def __init__(self, topology: Optional[Topology] = None):
        self.topology = topology
        self.records: list[PacketRecord] = []
        self._listeners: list[Callable[[PacketRecord], None]] = []

    def add_listener(self, fn: Callable[[PacketRecord], None]) -> None:
        self._listeners.append(fn)

    def tap_record(self, message: Message, now: float) -> PacketRecord:
        record = PacketRecord(float(now), message.src, message.dst, message.protocol, int(message.size_estimate))
        if not self.records or self.records[-1].timestamp <= record.timestamp:
            self.records.append(record)
        else:
            idx = bisect.bisect_right([r.timestamp for r in self.records], record.timestamp)
            self.records.insert(idx, record)
        for fn in self._listeners:
            fn(record)
        return record

    def trace(self, duration: Optional[float] = None) -> Trace:
        if duration is None:
            duration = self.records[-1].timestamp if self.records else 0.0
        return Trace(list(self.records), float(duration), self.topology)


def _open_source(source) -> tuple[TextIO, bool]:
    if source == "-":
        return sys.stdin, False
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline=""), True
    return source, False


def _parse_metadata(line: str, meta: dict, nodes: list, links: list) -> None:
    body = line.lstrip("#").strip()
    if "=" not in body:
        return
    key, _, value = body.partition("=")
    key, value = key.strip(), value.strip()
    if key == "duration_s":
        meta["duration_s"] = float(value)
    elif key == "node":
        name, _, kind = value.partition(":")
        nodes.append((name, parse_nf_type(kind or "OTHER")))
    elif key == "link":
        a, _, b = value.partition(":")
        links.append((a, b))
    else:
        meta[key] = value


def ingest_csv(source, strict: bool = False) -> Trace:
    """Read a CSV trace from a path, an open text file, or ``"-"`` (stdin).

    Out-of-order rows are sorted and counted in
    ``trace.metadata["reordered_rows"]``; with ``strict=True`` they raise.

    Raises:
        TraceFormatError: on a bad header or a malformed row.
    """
    fh, owned = _open_source(source)
    try:
        return _ingest(fh, strict)
    finally:
        if owned:
            fh.close()


def _ingest(fh: TextIO, strict: bool) -> Trace:
    meta: dict = {}
    nodes: list = []
    links: list = []
    records: list[PacketRecord] = []
    reordered = 0
    header_seen = False
    lineno = 0
    for lineno, raw in enumerate(fh, start=1):
        line = raw.rstrip("\r\n")
        if not header_seen:
            if line.startswith("#"):
                _parse_metadata(line, meta, nodes, links)
                continue
            if tuple(line.split(",")) != HEADER:
                raise TraceFormatError(lineno, None, f"expected header {','.join(HEADER)!r}")
            header_seen = True
            continue
        if not line:
            continue
        fields = next(csv.reader([line]))
        if len(fields) != len(HEADER):
            raise TraceFormatError(lineno, None, f"expected {len(HEADER)} fields, got {len(fields)}")
        ts_text, src, dst, proto_text, len_text = fields
        try:
            ts = float(ts_text)
        except ValueError:
            raise TraceFormatError(lineno, "timestamp_s", "not numeric") from None
        if ts != ts or ts < 0:
            raise TraceFormatError(lineno, "timestamp_s", "must be a non-negative number")
        if not src:
            raise TraceFormatError(lineno, "src", "empty")
        if not dst:
            raise TraceFormatError(lineno, "dst", "empty")
        if src == dst:
            raise TraceFormatError(lineno, "dst", "equals src")
        if not proto_text:
            raise TraceFormatError(lineno, "protocol", "empty")
        try:
            length = int(len_text)
        except ValueError:
            raise TraceFormatError(lineno, "length_bytes", "not an integer") from None
        if length < 1:
            raise TraceFormatError(lineno, "length_bytes", "must be ≥ 1")
        if records and ts < records[-1].timestamp:
            if strict:
                raise TraceFormatError(lineno, "timestamp_s", "out of order (strict mode)")
            reordered += 1
        records.append(PacketRecord(ts, src, dst, parse_protocol(proto_text), length))
    if not header_seen:
        raise TraceFormatError(max(lineno, 1), None, "missing header")

    if reordered:
        logger.warning("sorted %d out-of-order rows", reordered)
        records.sort(key=lambda r: r.timestamp)
    duration = meta.pop("duration_s", records[-1].timestamp if records else 0.0)
    topology = Topology.build(nodes, links) if nodes else None
    meta["reordered_rows"] = reordered
    trace = Trace(records, duration, topology, meta)
    problems = validate_trace(trace)
    if problems:
        raise TraceFormatError(lineno, None, "; ".join(problems[:5]))
    return trace


def _format_ts(ts: float) -> str:
    # repr is the shortest string that parses back to the same float
    return repr(float(ts))


def export_csv(trace: Trace, sink) -> None:
    """Write ``trace`` to a path, an open text file, or ``"-"`` (stdout)."""
    if sink == "-":
        _export(trace, sys.stdout)
    elif isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            _export(trace, fh)
    else:
        _export(trace, sink)


def _export(trace: Trace, fh: TextIO) -> None:
    implied = trace.records[-1].timestamp if trace.records else 0.0
    if trace.duration != implied:
        fh.write(f"# duration_s={_format_ts(trace.duration)}\n")
    if trace.topology is not None:
        for name, kind in trace.topology.nodes:
            fh.write(f"# node={name}:{kind}\n")
        for link in trace.topology.links:
            a, b = sorted(link)
            fh.write(f"# link={a}:{b}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(HEADER)
    writer.writerows(
        (_format_ts(r.timestamp), r.src, r.dst, str(r.protocol), r.length) for r in trace.records
    )


def to_csv_text(trace: Trace) -> str:
    buf = io.StringIO()
    _export(trace, buf)
    return buf.getvalue()


def from_csv_text(text: str, strict: bool = False) -> Trace:
    return _ingest(io.StringIO(text), strict)
