"""Decision quality and inference delay of offloading policies.

Normalised latency is a ratio of means: a policy's mean end-to-end latency
over the test set divided by the mean latency of the oracle labels.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import mlp
from .distill import DEFAULT_TEMPERATURE, distill_labels, train_student
from .imitation import FeatureCodec, LearnedPolicy, default_arch, label_agreement, train_teacher
from .model import Location, Requirement, latency_table
from .solvers import Policy, fixed_policy, greedy_policy, random_policy
from .workload import Dataset, generate_dataset, preset

log = logging.getLogger(__name__)

__all__ = [
    "PolicyReport",
    "decision_latencies",
    "evaluate",
    "bench_inference",
    "bench_table",
    "reports_to_csv",
    "reports_from_csv",
    "TEACHER_HIDDEN",
    "STUDENT_HIDDEN",
    "LargeExperiment",
    "KdExperiment",
    "experiment_large",
    "experiment_kd",
]

TEACHER_HIDDEN = (256,) * 5
STUDENT_HIDDEN = (32,) * 2
TEACHER_CONFIG = mlp.TrainConfig(learning_rate=1e-3, batch_size=128, epochs=200, patience=20)
STUDENT_CONFIG = mlp.TrainConfig(learning_rate=1e-3, batch_size=32, epochs=1000, patience=50)

CSV_COLUMNS = [
    "name",
    "mean_latency_s",
    "normalized_latency",
    "per_label_accuracy",
    "exact_match",
    "mean_inference_delay_s",
    "delay_normalized_to_greedy",
]


@dataclass
class PolicyReport:
    name: str
    mean_latency: float
    normalized_latency: float
    per_label_accuracy: float | None = None
    exact_match: float | None = None
    mean_inference_delay: float | None = None
    delay_normalized_to_greedy: float | None = None

    def row(self) -> list:
        return [
            self.name,
            self.mean_latency,
            self.normalized_latency,
            self.per_label_accuracy,
            self.exact_match,
            self.mean_inference_delay,
            self.delay_normalized_to_greedy,
        ]


def decision_latencies(testset: Dataset, codes: np.ndarray) -> np.ndarray:
    """Per-sample total latency of the given (N, A) decisions."""
    arrays = testset.arrays()
    codes = np.asarray(codes)
    out = np.empty(len(testset))
    # group identical rows so latency_table sees each decision once
    uniq, inv = np.unique(codes, axis=0, return_inverse=True)
    inv = inv.ravel()
    for k in range(len(uniq)):
        idx = np.flatnonzero(inv == k)
        out[idx] = latency_table(arrays[idx], uniq[k : k + 1])[:, 0]
    return out


def evaluate(policies: Sequence[Policy], testset: Dataset) -> list[PolicyReport]:
    """One report per policy plus a leading "Optimal" row from the labels.

    Accuracy columns are filled for learned policies only.
    """
    if not len(testset):
        raise ValueError("empty test set")
    labels = testset.label_codes()
    opt = decision_latencies(testset, labels).mean()
    reports = [PolicyReport("Optimal", float(opt), 1.0)]
    reqs = testset.requirements
    for pol in policies:
        if pol.name == "Optimal":
            continue
        codes = pol.decide_many(reqs)
        mean = decision_latencies(testset, codes).mean()
        rep = PolicyReport(pol.name, float(mean), float(mean / opt) if opt > 0 else 1.0)
        if getattr(pol, "learned", False):
            rep.per_label_accuracy, rep.exact_match = label_agreement(codes, labels)
        reports.append(rep)
    return reports


def bench_inference(policy: Policy, reqs: Sequence[Requirement], repetitions: int = 1) -> float:
    """Wall-clock seconds per decision of the one-request-at-a-time path.

    Runs with BLAS pinned to a single thread.
    """
    reqs = list(reqs)
    if not reqs:
        raise ValueError("nothing to benchmark")
    with threadpool_limits(limits=1):
        policy(reqs[0])  # warm caches
        start = time.perf_counter()
        for _ in range(repetitions):
            for r in reqs:
                policy(r)
        elapsed = time.perf_counter() - start
    return elapsed / (len(reqs) * repetitions)


def bench_table(
    policies: Sequence[Policy],
    reqs: Sequence[Requirement],
    decisions: int = 100_000,
    reference: str = "Greedy",
    max_decisions: dict | None = None,
) -> dict[str, tuple[float, float | None]]:
    """Per-decision delay of each policy and its ratio to ``reference``.

    ``decisions`` is the total decision count per policy; ``reqs`` are cycled.
    ``max_decisions`` optionally caps the count for slow policies by name.
    """
    out = {}
    for pol in policies:
        n = min(decisions, (max_decisions or {}).get(pol.name, decisions))
        reps, rem = divmod(n, len(reqs))
        pool = list(reqs) * reps + list(reqs[:rem])
        out[pol.name] = bench_inference(pol, pool, 1)
        log.info("bench %s: %.3g s/decision over %d decisions", pol.name, out[pol.name], n)
    ref = out.get(reference)
    return {k: (v, v / ref if ref else None) for k, v in out.items()}


def reports_to_csv(reports: Sequence[PolicyReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in rep.row()])
    return buf.getvalue()


def reports_from_csv(text: str) -> list[PolicyReport]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_COLUMNS:
        raise ValueError("report CSV must start with the header row " + ",".join(CSV_COLUMNS))
    out = []
    for row in rows[1:]:
        vals = [row[0]] + [float(v) if v != "" else None for v in row[1:]]
        out.append(PolicyReport(*vals))
    return out


# -- end-to-end experiments --------------------------------------------------------


@dataclass
class LargeExperiment:
    reports: list[PolicyReport]
    teacher: mlp.MlpModel
    codec: FeatureCodec
    train: Dataset
    test: Dataset


@dataclass
class KdExperiment:
    reports: list[PolicyReport]
    student: mlp.MlpModel
    baseline: mlp.MlpModel
    codec: FeatureCodec


def baseline_policies(seed: int) -> list[Policy]:
    return [
        greedy_policy(),
        fixed_policy(Location.DEVICE),
        fixed_policy(Location.EDGE),
        fixed_policy(Location.CLOUD),
        random_policy(seed),
    ]


def experiment_large(
    seed: int,
    n_train: int = 100_000,
    n_test: int = 10_000,
    hidden: Sequence[int] = TEACHER_HIDDEN,
    cfg: mlp.TrainConfig | None = None,
) -> LargeExperiment:
    """Train the large imitation model on cloud-scale data and compare to baselines."""
    spec = preset("cloud_scale")
    train = generate_dataset(spec, n_train, seed)
    test = generate_dataset(spec, n_test, seed + 1_000_003)
    codec = FeatureCodec(spec)
    cfg = cfg or TEACHER_CONFIG
    teacher, codec = train_teacher(train, default_arch(codec, hidden), _with_seed(cfg, seed), codec)
    policies = [LearnedPolicy(teacher, codec, "Large DIL"), *baseline_policies(seed)]
    return LargeExperiment(evaluate(policies, test), teacher, codec, train, test)


def experiment_kd(
    seed: int,
    teacher: mlp.MlpModel,
    codec: FeatureCodec,
    testset: Dataset,
    n_train: int = 1_000,
    T: float = DEFAULT_TEMPERATURE,
    hidden: Sequence[int] = STUDENT_HIDDEN,
    cfg: mlp.TrainConfig | None = None,
) -> KdExperiment:
    """Distilled student vs an identical network trained on scarce hard labels.

    Both small networks use the teacher's codec and see the same edge-scale
    requirements; they are tested on ``testset`` (cloud-scale).
    """
    edge = generate_dataset(preset("edge_scale"), n_train, seed)
    cfg = _with_seed(cfg or STUDENT_CONFIG, seed)
    arch = default_arch(codec, hidden)
    student = train_student(distill_labels(teacher, codec, edge.requirements, T), arch, cfg)
    baseline, _ = train_teacher(edge, arch, cfg, codec)
    policies = [
        LearnedPolicy(student, codec, "KD-DIL"),
        LearnedPolicy(baseline, codec, "Baseline DIL"),
        greedy_policy(),
    ]
    return KdExperiment(evaluate(policies, testset), student, baseline, codec)


def _with_seed(cfg: mlp.TrainConfig, seed: int) -> mlp.TrainConfig:
    return replace(cfg, seed=seed)
