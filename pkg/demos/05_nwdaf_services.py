"""
Talking to the NWDAF
====================

Request analytics once, subscribe to periodic reports, and stream raw
packet records, all against a running simulation.
"""

from nwdaf_lab import AnalyticsId, AnalyticsSubscriptionRecord, Nwdaf, RecordFilter, Simulation, default_config
from nwdaf_lab.nwdaf_service import run_with_nwdaf

inbox = []
sim = Simulation(default_config(duration=600))
nwdaf = Nwdaf(sim, registry=sim.registry, endpoints={"pcf-1": inbox.append})
sim.tap.add_listener(nwdaf.on_record)

# A report every 60 s of virtual time.
nwdaf.analytics_subscribe(AnalyticsSubscriptionRecord("s1", "pcf-1", AnalyticsId.protocol_counts(), 60, "pcf-1"))

# Live records from the BSF, batched every 100 s.
nwdaf.data_management_subscribe("pcf-1", RecordFilter(src="bsf-1"), "pcf-1", cadence=100)

run_with_nwdaf(sim, nwdaf, 300)
for item in inbox:
    if hasattr(item, "report"):
        print(f"t={item.at:>5g}  report #{item.seq}: {item.report.data['counts']}")
    else:
        print(f"batch #{item.seq}: {len(item.records)} records from bsf-1")

# One-off requests.
print("\nloads:", nwdaf.analytics_info("NF_LOAD").data["loads"])
events = nwdaf.analytics_info("NF_EVENTS(bsf-1,nrf-1)")
print("events:", events.status, events.data["counts"] if not events.insufficient else events.data)
print("ML model info:", nwdaf.ml_model_info())
