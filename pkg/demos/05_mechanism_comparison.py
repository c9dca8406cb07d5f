#!/usr/bin/env python3
"""Paired-seed comparison of the four clearing mechanisms.

Each mechanism sees the identical scenario draws (common random numbers),
with scripted net-position agents on a deficit-biased fleet, so the table
isolates the clearing rule itself. Watch the emergency column.
"""

import dataclasses

import numpy as np

from gridtrade.env import EnvConfig
from gridtrade.microgrid import DEFAULT_FLEET
from gridtrade.policies import ScriptedPolicy
from gridtrade.runner import run_episodes

EPISODES = 60
SEED = 0

# under-procured day-ahead (beta 0.6) leaves real intraday deficits
fleet = tuple(dataclasses.replace(p, beta=0.6) for p in DEFAULT_FLEET)
base = EnvConfig(fleet=fleet)
policy = ScriptedPolicy("net-position")

print(f"{EPISODES} paired episodes, scripted net-position agents, beta=0.6 fleet\n")
print("mechanism  reward($)  emergency(kWh)  feedin(kWh)  storage(kWh)")
results = {}
for mech in ("jpq", "greedy", "mrda", "vvda"):
    rows = run_episodes(dataclasses.replace(base, mechanism=mech), policy,
                        EPISODES, SEED)
    results[mech] = {
        k: float(np.mean([r[k] for r in rows]))
        for k in ("reward", "emergency_kwh", "feedin_kwh", "storage_kwh")
    }
    r = results[mech]
    print(
        f"{mech:10s} {r['reward']:+9.4f} {r['emergency_kwh']:15.4f} "
        f"{r['feedin_kwh']:12.4f} {r['storage_kwh']:13.4f}"
    )

jpq = results["jpq"]["emergency_kwh"]
print("\nemergency deltas vs jpq:")
for mech in ("greedy", "mrda", "vvda"):
    print(f"  {mech:7s} {results[mech]['emergency_kwh'] - jpq:+.4f} kWh")
