"""
Registration and heartbeats between a BSF and the NRF
=====================================================

Follow one NF's traffic to the registry: a large registration request,
then small periodic heartbeats, each acknowledged at the transport level.
"""

import numpy as np

from nwdaf_lab import EventKind, classify_sizes, default_config, event_report, one_way_series, pair_throughput
from nwdaf_lab.nf_agents import run_simulation, without_jitter

trace = run_simulation(without_jitter(default_config()))

# Bytes per second on the pair: one busy bucket at t=0, then a quiet
# rhythm every ten seconds.
series = pair_throughput(trace, "bsf-1", "nrf-1", bucket_width=1.0)
rates = series.rates()
print("first buckets (B/s):", rates[:22].astype(int).tolist())

# Packets from the BSF to the NRF fall into two sizes.
out = one_way_series(trace, "bsf-1", "nrf-1")
lengths = [length for _, length in out[1:]]
classes = classify_sizes(lengths)
print(f"size classes: {classes.small} | {classes.large}  (threshold {classes.threshold:g} B)")

# Event detection labels each packet.
report = event_report(out, one_way_series(trace, "nrf-1", "bsf-1"))
for kind in EventKind:
    print(f"{kind.value:<20} {len(report.of_kind(kind))}")
print(f"heartbeat period: {report.request_period.period:g} s")
print(f"spike threshold:  {report.spike_threshold:.1f} B (first packet {out[0][1]} B)")

# With jitter the period is still recovered closely.
jittered = one_way_series(run_simulation(default_config()), "bsf-1", "nrf-1")
beats = np.array([t for t, length in jittered[1:] if length > classes.threshold])
print(f"jittered median gap: {np.median(np.diff(beats)):.4f} s")
