"""Directional-change events: the event-based view of a price series.

Runs the DC scan over one synthetic asset at three thresholds, prints the
confirmed events, and shows the signed-overshoot transform plus the
high-order (first-difference) signal the temporal branch consumes.
"""

import numpy as np

from masaat.data import synthesize
from masaat.dc import (dc_transform, detect_events, high_order_signal,
                       time_mask)

frame = synthesize([0.0, 0.0], [0.02, 0.0], days=120, seed=3)
asset = frame.assets[0]
closes = asset.channels["close"]

for threshold in (0.005, 0.01, 0.02):
    events = detect_events(closes, threshold)
    print(f"threshold {threshold:.1%}: {len(events)} events")
    for e in events[:4]:
        print(f"    {e.direction:>4} confirmed {asset.dates[e.confirm_index]} "
              f"(extreme was {asset.dates[e.extreme_index]})")
    if len(events) > 4:
        print(f"    ... and {len(events) - 4} more")
print()

# a coarser threshold can only merge trends, never create new events
counts = [len(detect_events(closes, t)) for t in (0.005, 0.01, 0.02, 0.05)]
print("event counts per threshold (non-increasing):", counts, "\n")

worked = [100.0, 105.0, 111.0, 100.0, 98.0]
print("worked 5-price example at 10%:")
print("  events:", [(e.direction, e.confirm_index, e.extreme_index)
                    for e in detect_events(worked, 0.10)])
overshoot = dc_transform(worked, 0.10)
print("  overshoot series:", np.round(overshoot, 5))
print("  high-order signal:",
      np.round(high_order_signal(overshoot.reshape(1, 1, 5))[0, 0], 5))
print()

print("time mask for a 10-day window (recent days weigh more):")
print(" ", np.round(time_mask(10), 4))
