"""
Should two NFs be co-located?
=============================

The NWDAF turns a pair's traffic pattern and rate into a placement verdict.
"""

from nwdaf_lab import Nwdaf, ThroughputSeries, default_config, recommend_placement, run_simulation
from nwdaf_lab.nwdaf_service import ExchangeProfile, placement_decision

trace = run_simulation(default_config())
nwdaf = Nwdaf(trace)

# Registry chatter is light: a registration burst and then tiny heartbeats.
for a, b in [("bsf-1", "nrf-1"), ("upf-1", "smf-1"), ("oam-1", "nwdaf-1")]:
    rec = nwdaf.placement(trace, a, b)
    print(f"{a}<->{b}: {rec.exchange_profile.value} -> {rec.decision.value}")
    print(f"    {rec.rationale}")

# A pair moving a megabyte every second is a different story.
heavy = ThroughputSeries("upf-1", "smf-1", 1.0, tuple((float(t), 1_000_000) for t in range(300)))
print("\nsynthetic heavy pair:", recommend_placement([], heavy).decision.value)

# The verdict only ever moves toward co-location as the rate grows.
for rate in (10, 1_000, 50_000, 100_000, 10_000_000):
    d = placement_decision(ExchangeProfile.SUSTAINED, rate, window=600, period=None)
    print(f"sustained at {rate:>10,} B/s -> {d.value}")
