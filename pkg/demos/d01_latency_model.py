"""
Latency of one task under every placement
=========================================

A two-stage task: each stage runs on the device, the edge server or the
cloud. Data enters and leaves at the device; the cloud is reached through
the edge, so device-cloud transfers pay both links.
"""

import itertools

from edgekd.model import Decision, Requirement, exec_latency, total_latency, trans_latency
from edgekd.solvers import solve_exhaustive, solve_greedy

# 200 and 400 Mcycles; 2 MB in, 4 MB between the stages, 1 MB back
req = Requirement.from_values(
    eps=[200e6, 400e6], data=[2e6, 4e6, 1e6],
    p1=100e6, p2=1000e6,  # device and edge clock rates (Hz); the cloud is free
    b1=1e6, b2=2e6,  # device-edge and edge-cloud bandwidth (B/s)
)

print(f"{'placement':<16}{'compute':>9}{'transfer':>10}{'total':>8}")
for locs in itertools.product(range(3), repeat=2):
    d = Decision(locs)
    name = "/".join(loc.name.lower() for loc in d)
    print(f"{name:<16}{exec_latency(req, d):9.2f}{trans_latency(req, d):10.2f}{total_latency(req, d):8.2f}")

# the oracle enumerates all 3**2 placements; greedy looks one stage ahead
best, lat = solve_exhaustive(req)
g = solve_greedy(req)
print("optimal:", [loc.name for loc in best], f"{lat:.2f} s")
print("greedy: ", [loc.name for loc in g], f"{total_latency(req, g):.2f} s")

# scaling every rate and bandwidth by c divides all latencies by c
fast = Requirement(req.task, req.env.scaled(10.0))
print("10x faster hardware:", f"{solve_exhaustive(fast)[1]:.3f} s")
