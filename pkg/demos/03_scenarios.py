#!/usr/bin/env python3
"""Scenario machinery: profiles, noisy realizations, PV disruptions, prices.

Prints the bundled 24-hour shapes as text sparklines and demonstrates the
three PV disruption processes plus the seeded determinism of every draw.
"""

import numpy as np

from gridtrade.microgrid import DEFAULT_FLEET
from gridtrade.scenario import (
    DisruptionConfig,
    apply_failure,
    apply_gradual_decline,
    apply_pv_disruption,
    apply_sudden_drop,
    bundled_price_schedule,
    bundled_profile,
    hourly_shape,
    rng_stream,
    sample_realization,
)

BARS = " .:-=+*#%@"


def spark(values, top=None):
    top = top or (max(values) or 1.0)
    return "".join(BARS[min(9, int(9 * v / top))] for v in values)


print("bundled daily profiles (normalized 0..1):")
for i in range(4):
    p = bundled_profile(i)
    print(f"  grid {i} load |{spark(p.load, 1.0)}|")
    print(f"  grid {i} pv   |{spark(p.pv, 1.0)}|")

sched = bundled_price_schedule()
lo, hi = sched.emergency.min(), sched.emergency.max()
print(f"\nemergency price ({lo:.1f}..{hi:.1f} $/kWh, feed-in fixed {sched.feed_in}):")
print(f"  |{spark(sched.emergency, 3.5)}|")

print("\nnoisy realization for grid 0 (process sigma 0.1), two draws of seed 7:")
profile = bundled_profile(0)
a = sample_realization(profile, DEFAULT_FLEET[0], 0.1, rng_stream(7, 0, 0))
b = sample_realization(profile, DEFAULT_FLEET[0], 0.1, rng_stream(7, 0, 0))
print(f"  load |{spark(a[0], 25)}|  (identical on redraw: {np.array_equal(a[0], b[0])})")

print("\nPV disruption processes on a flat 10 kWh series:")
flat = np.full(24, 10.0)
print(f"  sudden drop x0.6 at hour 8 |{spark(apply_sudden_drop(flat, 8, 0.6), 10)}|")
print(f"  gradual decline from hour 6|{spark(apply_gradual_decline(flat, 6, 3), 10)}|")
print(f"  failure hours 10-12        |{spark(apply_failure(flat, 10, 3), 10)}|")

cfg = DisruptionConfig()  # toned-down default rates
disrupted = apply_pv_disruption(flat, cfg, rng_stream(3, 0, 2))
print(f"  sampled composite          |{spark(disrupted, 10)}|")
assert (disrupted <= flat).all()

print("\ningesting raw annual data (hour-of-day mean, min-max scaled):")
rng = np.random.default_rng(1)
year = np.tile(bundled_profile(1).load, 365) * 3.0 + rng.normal(0, 0.2, 24 * 365)
print(f"  recovered shape |{spark(hourly_shape(year), 1.0)}|")
