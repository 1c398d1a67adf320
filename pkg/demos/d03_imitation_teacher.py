"""
Imitating the oracle
====================

Train a network to map a requirement straight to a placement. The output
head has one 3-way softmax per stage; decoding takes each argmax.
A few thousand samples and a mid-sized network keep this quick.
"""

from edgekd import mlp
from edgekd.evaluation import evaluate
from edgekd.imitation import FeatureCodec, LearnedPolicy, default_arch, save_artifact, train_teacher
from edgekd.solvers import greedy_policy
from edgekd.workload import generate_dataset, preset

spec = preset("cloud_scale")
train = generate_dataset(spec, 5000, seed=1)
test = generate_dataset(spec, 1000, seed=2)

codec = FeatureCodec(spec)
print("features per requirement:", codec.input_dim)
arch = default_arch(codec, (128, 128, 128))
print("parameters:", mlp.param_count(arch))

cfg = mlp.TrainConfig(epochs=60, patience=10, seed=1)
model, codec = train_teacher(train, arch, cfg, codec)

for r in evaluate([LearnedPolicy(model, codec, "DIL"), greedy_policy()], test):
    acc = "" if r.per_label_accuracy is None else f"  per-label acc {r.per_label_accuracy:.3f}"
    print(f"{r.name:<8} normalized {r.normalized_latency:.3f}{acc}")

# model file = network weights + feature codec
save_artifact("demo_teacher.model", model, codec, {"role": "teacher"})
