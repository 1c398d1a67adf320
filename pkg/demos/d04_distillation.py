"""
Distilling into a small student
===============================

An edge server has only a thousand requirements of its own. Instead of
labelling them by exhaustive search, ask the teacher, soften its answers
with a temperature, and fit a 2x32 network to the soft targets.
Run d03 first; it writes demo_teacher.model.
"""

import numpy as np

from edgekd import mlp
from edgekd.distill import distill_labels, soften, train_student
from edgekd.evaluation import STUDENT_CONFIG, evaluate
from edgekd.imitation import LearnedPolicy, default_arch, load_artifact, train_teacher
from edgekd.workload import generate_dataset, preset

# higher temperature flattens a confident distribution but keeps its argmax
p = np.array([0.999, 2e-4, 3e-6])
p = p / p.sum()
for T in (1, 2, 5, 10):
    print(f"T={T:<3}", np.round(soften(p, T), 4))

teacher, codec, _ = load_artifact("demo_teacher.model")
edge = generate_dataset(preset("edge_scale"), 1000, seed=4)
test = generate_dataset(preset("cloud_scale"), 1000, seed=2)

arch = default_arch(codec, (32, 32))
print("student parameters:", mlp.param_count(arch))
soft = distill_labels(teacher, codec, edge.requirements, T=5)
student = train_student(soft, arch, STUDENT_CONFIG)

# same network, same requirements, but trained on the oracle's hard labels
baseline, _ = train_teacher(edge, arch, STUDENT_CONFIG, codec)

policies = [
    LearnedPolicy(teacher, codec, "teacher"),
    LearnedPolicy(student, codec, "KD"),
    LearnedPolicy(baseline, codec, "hard-label"),
]
for r in evaluate(policies, test):
    print(f"{r.name:<11} normalized {r.normalized_latency:.3f}")
