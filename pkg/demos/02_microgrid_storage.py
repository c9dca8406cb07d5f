#!/usr/bin/env python3
"""Storage physics and the hourly settlement recourse.

Shows the state-of-charge update with efficiencies, then walks one
microgrid through the recourse ladder: over-storage shedding, surplus
charging, deficit discharge, and the emergency/feed-in residuals, checking
the power-balance identity as we go.
"""

from gridtrade.market import PriceEnvelope
from gridtrade.microgrid import (
    EssState,
    MicrogridParams,
    balance_residual,
    day_ahead_quantity,
    max_bid_quantity,
    settle_and_balance,
    soc_step,
)

params = MicrogridParams(
    l_max=25, g_max=5, e_max=8, t_charge_max=4, t_discharge_max=4,
    e0=2, eta_ch=0.95, eta_dis=0.95,
)
prices = PriceEnvelope(feed_in=0.2, day_ahead=0.5, emergency=2.5)

print("state-of-charge stepping (eta_ch = eta_dis = 0.95):")
for power in (+2.0, 0.0, -2.0, +9.0):
    result = soc_step(4.0, power, dt=1.0, params=params)
    note = " (clamped)" if result.clamped else ""
    print(f"  E=4.0 kWh, t_ess={power:+.1f} kW -> {result.energy:.3f} kWh{note}")

print("\nday-ahead procurement (beta=0.95):")
for load_f, gen_f in ((10, 4), (4, 10), (7, 7)):
    q = day_ahead_quantity(load_f, gen_f, 0.95)
    print(f"  forecast load {load_f}, pv {gen_f} -> q_da = {q:.2f} kWh")

print("\nrole-dependent bid caps at load=10, gen=3:")
for role in ("buyer", "seller"):
    print(f"  {role}: {max_bid_quantity(10, 3, role, params):.1f} kWh")

print("\nsettlement walkthrough:")
cases = [
    ("surplus absorbed into storage", dict(load=5, gen=8, q_da=0, q_b=0, q_s=0),
     EssState(3.0, 1.0)),
    ("deficit covered from storage, remainder emergency",
     dict(load=12, gen=2, q_da=0, q_b=0, q_s=0), EssState(3.0, 1.0)),
    ("reservation shrunk to 0.5: over-storage shed to feed-in",
     dict(load=5, gen=5, q_da=0, q_b=0, q_s=0), EssState(6.0, 0.5)),
    ("sold 3 kWh P2P with a thin store: shortfall hits emergency",
     dict(load=5, gen=5, q_da=0, q_b=0, q_s=3), EssState(1.0, 1.0)),
]
for label, flows, state in cases:
    record, nxt = settle_and_balance(
        **flows, state=state, prices=prices, dt=1.0, params=params
    )
    residual = balance_residual(record, flows["load"], flows["gen"])
    print(f"  {label}:")
    print(
        f"    t_ess={record.t_ess:+.3f} kW, q_fit={record.q_fit:.3f}, "
        f"q_e={record.q_e:.3f}, E'={nxt.energy:.3f}, "
        f"grid profit ${record.profit_grid:+.3f}, balance residual {residual:.1e}"
    )
