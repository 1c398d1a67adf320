"""
Per-decision inference delay
============================

Time one decision at a time, single-threaded, and normalise to Greedy.
Uses the models written by d03 and retrains a small student here.
"""

from edgekd.distill import distill_labels, train_student
from edgekd.evaluation import STUDENT_CONFIG, bench_table
from edgekd.imitation import LearnedPolicy, default_arch, load_artifact
from edgekd.solvers import exhaustive_policy, greedy_policy
from edgekd.workload import generate_requirements, preset

teacher, codec, _ = load_artifact("demo_teacher.model")
student = train_student(
    distill_labels(teacher, codec, generate_requirements(preset("edge_scale"), 1000, 4)),
    default_arch(codec, (32, 32)),
    STUDENT_CONFIG,
)

reqs = generate_requirements(preset("cloud_scale"), 500, seed=9)
policies = [
    LearnedPolicy(student, codec, "student"),
    LearnedPolicy(teacher, codec, "teacher"),
    greedy_policy(),
    exhaustive_policy(),
]
table = bench_table(policies, reqs, decisions=5000)
for name, (delay, ratio) in table.items():
    print(f"{name:<8} {delay * 1e6:8.1f} us/decision   {ratio:6.2f} x Greedy")
