"""
Oracle labels and the fixed baselines
=====================================

Sample cloud-scale requirements, label them by exhaustive search, and see
how the simple policies compare. Latencies are reported relative to the
oracle's mean.
"""

import numpy as np

from edgekd.evaluation import baseline_policies, decision_latencies, evaluate
from edgekd.workload import generate_dataset, preset

spec = preset("cloud_scale")
test = generate_dataset(spec, 2000, seed=3)

# how often each location appears in the optimal labels
codes = test.label_codes()
print("label share device/edge/cloud:", np.bincount(codes.ravel(), minlength=3) / codes.size)

for r in evaluate(baseline_policies(seed=3), test):
    print(f"{r.name:<8} mean {r.mean_latency:8.2f} s   normalized {r.normalized_latency:6.3f}")

# Edge loses to Local on average: a few draws with tiny device-edge
# bandwidth dominate the mean
n = len(test)
local = decision_latencies(test, np.zeros((n, 6), dtype=int))
edge = decision_latencies(test, np.ones((n, 6), dtype=int))
b1 = test.arrays().b1
print("share of samples where Edge beats Local:", np.mean(edge < local))
keep = b1 >= 1e5
print(f"means without b1 < 1e5 draws: Edge {edge[keep].mean():.2f} s, Local {local[keep].mean():.2f} s")
