"""
Per-protocol packet statistics
==============================

Count packets per protocol label and summarise their lengths.
"""

from nwdaf_lab import default_config, length_stats, packets_per_protocol, run_simulation

trace = run_simulation(default_config())

# Registry traffic is plain TCP; the stub peers add PFCP, NGAP and SSL.
counts = packets_per_protocol(trace)
total = sum(counts.values())
for protocol, n in sorted(counts.items(), key=lambda kv: -kv[1]):
    print(f"{str(protocol):<12} {n:>6}  {100 * n / total:5.1f}%")

# Length statistics use the population standard deviation.
print()
print(f"{'protocol':<12} {'mean':>8} {'stddev':>8} {'min':>5} {'max':>5}")
for s in length_stats(trace):
    print(f"{str(s.protocol):<12} {s.mean_length:8.1f} {s.stddev_length:8.1f} {s.min_length:5d} {s.max_length:5d}")
