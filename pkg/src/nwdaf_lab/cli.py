"""Command line entry point: ``nwdaf-lab {simulate,analyze,serve}``.

Exit codes: 0 ok, 2 configuration error, 3 trace error, 4 bind failure.

Placement and detection thresholds can be overridden through the
environment: NWDAF_LOW_RATE, NWDAF_HIGH_RATE, NWDAF_SPIKE_SIGMAS,
NWDAF_PERIODICITY_GATE, NWDAF_STEADY_FRACTION, NWDAF_MIN_PERIODS.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import signal
import sys
import threading
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import analytics as an
from .capture import TraceFormatError, export_csv, ingest_csv
from .nf_agents import ConfigError, Simulation, config_from_dict, default_config_dict, load_config
from .nwdaf_service import Nwdaf

EXIT_OK, EXIT_CONFIG, EXIT_TRACE, EXIT_BIND = 0, 2, 3, 4

_ENV_THRESHOLDS = {
    "NWDAF_LOW_RATE": "low_rate",
    "NWDAF_HIGH_RATE": "high_rate",
    "NWDAF_SPIKE_SIGMAS": "spike_sigmas",
    "NWDAF_PERIODICITY_GATE": "periodicity_gate",
    "NWDAF_STEADY_FRACTION": "steady_fraction",
    "NWDAF_MIN_PERIODS": "min_periods",
}

log = logging.getLogger("nwdaf_lab")


def thresholds_from_env(environ=os.environ) -> an.Thresholds:
    overrides = {}
    for var, name in _ENV_THRESHOLDS.items():
        if var in environ:
            try:
                overrides[name] = float(environ[var])
            except ValueError:
                raise ConfigError(var, f"not a number: {environ[var]!r}") from None
    return replace(an.DEFAULTS, **overrides)


def _load(config_path: Optional[str], seed: Optional[int]):
    if config_path is None:
        tree = default_config_dict()
        if seed is not None:
            tree["seed"] = seed
        return config_from_dict(tree)
    config = load_config(config_path)
    if seed is not None:
        config = replace(config, seed=seed)
        config.validate()
    return config


def _parse_pair(text: str) -> tuple[str, str]:
    a, sep, b = text.partition(":")
    if not sep or not a or not b:
        raise argparse.ArgumentTypeError(f"expected a:b, got {text!r}")
    return a, b


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _num(x) -> str:
    return repr(float(x))


# -- subcommands ---------------------------------------------------------------------


def cmd_simulate(args) -> int:
    try:
        config = _load(args.config, args.seed)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sim = Simulation(config).run()
    trace = sim.trace()
    export_csv(trace, args.out)
    print(
        f"records={len(trace)} duration={trace.duration:g}s agents={len(config.agents)} "
        f"exchanges={sim.exchanges} seed={config.seed}"
    )
    return EXIT_OK


def analyze_trace(trace, report_dir: Path, pairs: Sequence[tuple[str, str]], thresholds: an.Thresholds) -> dict:
    """Write the figure-ready CSVs and ``report.json``; returns the report dict."""
    report_dir.mkdir(parents=True, exist_ok=True)
    counts = an.packets_per_protocol(trace)
    count_rows = sorted(((str(p), n) for p, n in counts.items()), key=lambda r: (-r[1], r[0]))
    _write_csv(report_dir / "protocol_counts.csv", ("protocol", "count"), count_rows)

    stats = an.length_stats(trace)
    _write_csv(
        report_dir / "protocol_stats.csv",
        ("protocol", "count", "mean_length", "stddev_length", "min_length", "max_length"),
        [(str(s.protocol), s.count, _num(s.mean_length), _num(s.stddev_length), s.min_length, s.max_length) for s in stats],
    )

    nwdaf = Nwdaf(trace, thresholds=thresholds, source_name="trace")
    report = {
        "records": len(trace),
        "duration": trace.duration,
        "protocol_counts": dict(count_rows),
        "protocol_stats": [s.to_dict() for s in stats],
        "pairs": [],
    }
    for a, b in pairs:
        tp = an.pair_throughput(trace, a, b)
        _write_csv(report_dir / f"throughput_{a}_{b}.csv", ("bucket_start_s", "bytes"), ((_num(s), v) for s, v in tp.buckets))
        pair_report = {"pair": [a, b], "events": {}}
        for src, dst in ((a, b), (b, a)):
            try:
                events = an.detect_events(
                    an.one_way_series(trace, src, dst), an.one_way_series(trace, dst, src), (), thresholds
                )
            except an.InsufficientDataError:
                events = []
            _write_csv(
                report_dir / f"events_{src}_{dst}.csv",
                ("timestamp_s", "kind", "packet_length", "confidence"),
                ((_num(e.timestamp), e.kind.value, e.packet_length, _num(e.confidence)) for e in events),
            )
            pair_report["events"][f"{src}->{dst}"] = {k.value: sum(e.kind == k for e in events) for k in an.EventKind}
        pair_report["placement"] = nwdaf.placement(trace, a, b).to_dict()
        report["pairs"].append(pair_report)

    (report_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return report


def cmd_analyze(args) -> int:
    try:
        thresholds = thresholds_from_env()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        trace = ingest_csv(args.trace, strict=args.strict_ingest)
    except TraceFormatError as exc:
        print(f"error: malformed trace: {exc}", file=sys.stderr)
        return EXIT_TRACE
    except OSError as exc:
        print(f"error: cannot read trace: {exc}", file=sys.stderr)
        return EXIT_TRACE
    report = analyze_trace(trace, Path(args.report_dir), args.pair, thresholds)
    counts = report["protocol_counts"]
    print(f"records={report['records']} protocols={len(counts)} report_dir={args.report_dir}")
    if report["pairs"]:
        print(f"{'pair':<24} {'profile':<28} {'mean B/s':>10} {'peak B/s':>10}  decision")
        for p in report["pairs"]:
            pl = p["placement"]
            print(
                f"{pl['pair'][0] + '<->' + pl['pair'][1]:<24} {pl['exchange_profile']:<28} "
                f"{pl['mean_rate']:>10.2f} {pl['peak_rate']:>10.1f}  {pl['decision']}"
            )
    return EXIT_OK


def cmd_serve(args) -> int:
    from .http_api import ServeSession, make_server, pace

    try:
        config = _load(args.config, args.seed)
        thresholds = thresholds_from_env()
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    host, _, port = args.listen.rpartition(":")
    try:
        session = ServeSession(config, thresholds, out_path=args.out)
        server = make_server(session, host or "127.0.0.1", int(port))
    except (OSError, ValueError) as exc:
        print(f"error: cannot bind {args.listen}: {exc}", file=sys.stderr)
        return EXIT_BIND

    def _terminate(signum, frame):
        raise KeyboardInterrupt

    signal.signal(signal.SIGTERM, _terminate)
    stop = threading.Event()
    if args.pace:
        threading.Thread(target=pace, args=(session, args.pace, stop), daemon=True).start()
    bound = server.server_address
    print(f"listening on {bound[0]}:{bound[1]}", flush=True)
    try:
        server.serve_forever(poll_interval=0.1)
    except KeyboardInterrupt:
        pass
    finally:
        stop.set()
        server.server_close()
        session.flush()
    print(f"stopped at t={session.nwdaf.now:g}s records={len(session.sim.tap.records)}", flush=True)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nwdaf-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write a CSV trace")
    p.add_argument("--config", help="scenario JSON (default: packaged 138-minute scenario)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="-", help="trace path, '-' for stdout")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="compute reports from a CSV trace")
    p.add_argument("trace", help="trace path, '-' for stdin")
    p.add_argument("--report-dir", required=True)
    p.add_argument("--pair", type=_parse_pair, action="append", default=[], metavar="A:B")
    p.add_argument("--strict-ingest", action="store_true", help="reject out-of-order rows")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("serve", help="run a scenario behind the NWDAF HTTP endpoints")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--listen", default="127.0.0.1:8080", metavar="HOST:PORT")
    p.add_argument("--out", help="trace path written on shutdown")
    p.add_argument(
        "--pace",
        type=float,
        default=0.0,
        help="virtual seconds per wall-clock second; 0 advances only via POST /control/advance",
    )
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
