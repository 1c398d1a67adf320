"""Acceptance criteria, one test (or group of sub-checks) per criterion.

Every check prints a ``[PASS]`` / ``[FAIL]`` line; the lines are repeated in
a summary section at the end of the pytest run. Slow: a few minutes in total,
dominated by teacher training and the 100K-decision timing loops.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, W1_ARGS, ref_latency, ref_optimum
from edgekd import mlp
from edgekd.distill import distill_labels, soften, train_student
from edgekd.evaluation import (
    STUDENT_CONFIG,
    STUDENT_HIDDEN,
    TEACHER_CONFIG,
    TEACHER_HIDDEN,
    bench_table,
    experiment_kd,
    experiment_large,
)
from edgekd.imitation import (
    FeatureCodec,
    LearnedPolicy,
    artifact_to_dict,
    default_arch,
    load_artifact,
    save_artifact,
    train_teacher,
)
from edgekd.model import Decision, Location, Requirement, exec_latency, latency_table, stack_requirements, total_latency, trans_latency
from edgekd.solvers import all_decisions, exhaustive_policy, fixed_policy, greedy_policy, random_policy, solve_exhaustive
from edgekd.workload import dumps_dataset, generate_dataset, generate_requirements, load_dataset, preset, save_dataset

SEED = 1
KD_SEEDS = (1, 2, 3, 4, 5)
N_TRAIN, N_TEST = 20_000, 2_000
DECISIONS = 100_000


def check(criterion: int, label: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {label}" + (f" ({detail})" if detail else "")
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="session")
def large():
    return experiment_large(SEED, N_TRAIN, N_TEST)


@pytest.fixture(scope="session")
def kd_runs(large):
    return [experiment_kd(s, large.teacher, large.codec, large.test) for s in KD_SEEDS]


# 1 -------------------------------------------------------------------------------


def test_c1_oracle_dominance():
    start = time.perf_counter()
    reqs = generate_requirements(preset("cloud_scale"), 1000, SEED)
    cands = all_decisions(6)
    table = latency_table(stack_requirements(reqs), cands)
    baselines = [greedy_policy(), *(fixed_policy(loc) for loc in Location), random_policy(SEED)]
    violations = 0
    for i, req in enumerate(reqs):
        best, lat = solve_exhaustive(req)
        if lat != total_latency(req, best) or np.any(lat > table[i]):
            violations += 1
        for pol in baselines:
            if lat > total_latency(req, pol(req)):
                violations += 1
    elapsed = time.perf_counter() - start
    check(1, "exhaustive <= all 729 candidates and all baselines on 1,000 samples", violations == 0,
          f"{violations} violations")
    check(1, "runtime < 1 minute", elapsed < 60, f"{elapsed:.1f} s")


# 2 -------------------------------------------------------------------------------


def test_c2_w1_unit_truths():
    req = Requirement.from_values(**W1_ARGS)
    D, E, C = Location.DEVICE, Location.EDGE, Location.CLOUD
    hand = {(D, D): 6.0, (E, E): 3.6, (C, C): 4.5, (E, C): 5.7, (D, E): 7.4}
    worst = 0.0
    for locs in np.ndindex(3, 3):
        d = Decision(locs)
        ex, tr = ref_latency(**W1_ARGS, locs=locs)
        worst = max(worst, abs(exec_latency(req, d) - ex), abs(trans_latency(req, d) - tr),
                    abs(total_latency(req, d) - (ex + tr)))
    for locs, value in hand.items():
        worst = max(worst, abs(total_latency(req, Decision(locs)) - value))
    opt, argmins = ref_optimum(**W1_ARGS)
    best, lat = solve_exhaustive(req)
    worst = max(worst, abs(lat - opt))
    check(2, "W1 latencies match the brute-force calculator to 1e-12",
          worst <= 1e-12 and best.codes in argmins, f"max abs error {worst:.1e}")


# 3 -------------------------------------------------------------------------------


def test_c3_scale_invariance():
    reqs = generate_requirements(preset("cloud_scale"), 100, SEED)
    cands = all_decisions(6)
    base = latency_table(stack_requirements(reqs), cands)
    worst_rel, moved = 0.0, 0
    for c in (0.1, 3.0, 10.0):
        scaled = [Requirement(r.task, r.env.scaled(c)) for r in reqs]
        tab = latency_table(stack_requirements(scaled), cands)
        worst_rel = max(worst_rel, float(np.max(np.abs(tab * c - base) / base)))
        for i in range(len(reqs)):
            # argmin set up to rounding: candidates within 1e-12 relative of the minimum
            a = set(np.flatnonzero(base[i] <= base[i].min() * (1 + 1e-12)))
            b = set(np.flatnonzero(tab[i] <= tab[i].min() * (1 + 1e-12)))
            moved += a != b
    check(3, "latency scales by 1/c within 1e-9 relative", worst_rel <= 1e-9, f"max rel error {worst_rel:.1e}")
    check(3, "argmin set unchanged under scaling", moved == 0, f"{moved} changed sets")


# 4 -------------------------------------------------------------------------------


def _fig5(large):
    return {r.name: r for r in large.reports}


def test_c4_teacher_normalized(large):
    r = _fig5(large)["Large DIL"]
    check(4, "teacher normalized latency <= 1.2", r.normalized_latency <= 1.2,
          f"{r.normalized_latency:.4f}, per-label acc {r.per_label_accuracy:.3f}")


def test_c4_edge_below_local(large):
    r = _fig5(large)
    check(4, "Edge mean latency < Local", r["Edge"].mean_latency < r["Local"].mean_latency,
          f"Edge {r['Edge'].normalized_latency:.3f} vs Local {r['Local'].normalized_latency:.3f} normalized")


def test_c4_edge_below_cloud(large):
    r = _fig5(large)
    check(4, "Edge mean latency < Cloud", r["Edge"].mean_latency < r["Cloud"].mean_latency,
          f"Edge {r['Edge'].normalized_latency:.3f} vs Cloud {r['Cloud'].normalized_latency:.3f} normalized")


def test_c4_random_worst(large):
    r = _fig5(large)
    worst = max(r.values(), key=lambda x: x.mean_latency).name
    check(4, "Random is the worst policy", worst == "Random", f"worst is {worst}")


def test_c4_teacher_beats_greedy(large):
    r = _fig5(large)
    check(4, "teacher beats Greedy", r["Large DIL"].mean_latency < r["Greedy"].mean_latency,
          f"{r['Large DIL'].normalized_latency:.4f} vs {r['Greedy'].normalized_latency:.4f}")


# 5 -------------------------------------------------------------------------------


def test_c5_kd_beats_baseline(kd_runs):
    kd = [{r.name: r for r in run.reports}["KD-DIL"].normalized_latency for run in kd_runs]
    base = [{r.name: r for r in run.reports}["Baseline DIL"].normalized_latency for run in kd_runs]
    check(5, f"mean KD-DIL < mean Baseline DIL over {len(KD_SEEDS)} seeds", np.mean(kd) < np.mean(base),
          f"{np.mean(kd):.4f} vs {np.mean(base):.4f}")


# 6 -------------------------------------------------------------------------------


def test_c6_compression_ratio():
    codec = FeatureCodec(preset("cloud_scale"))
    s = mlp.param_count(default_arch(codec, STUDENT_HIDDEN))
    t = mlp.param_count(default_arch(codec, TEACHER_HIDDEN))
    check(6, "student/teacher parameter ratio <= 1%", s / t <= 0.01, f"{s}/{t} = {s / t:.4%}")


# 7 -------------------------------------------------------------------------------


@pytest.fixture(scope="session")
def delays(large, kd_runs):
    policies = [
        LearnedPolicy(kd_runs[0].student, large.codec, "KD-DIL"),
        LearnedPolicy(large.teacher, large.codec, "Large DIL"),
        greedy_policy(),
        exhaustive_policy(),
    ]
    reqs = generate_requirements(preset("cloud_scale"), 1000, SEED + 7)
    table = bench_table(policies, reqs, DECISIONS)
    print({k: f"{v[0] * 1e6:.1f} us ({v[1]:.2f}x Greedy)" for k, v in table.items()})
    return {k: v[0] for k, v in table.items()}


def test_c7_student_faster(delays):
    check(7, "student delay < teacher delay", delays["KD-DIL"] < delays["Large DIL"],
          f"{delays['KD-DIL'] * 1e6:.1f} vs {delays['Large DIL'] * 1e6:.1f} us")


def test_c7_student_ratio(delays):
    ratio = delays["KD-DIL"] / delays["Large DIL"]
    check(7, "student/teacher delay <= 0.6", ratio <= 0.6, f"{ratio:.3f}")


def test_c7_exhaustive_ratio(delays):
    ratio = delays["Optimal"] / delays["Large DIL"]
    check(7, "exhaustive delay >= 10x teacher", ratio >= 10, f"{ratio:.1f}x")


# 8 -------------------------------------------------------------------------------


def test_c8_kd_math():
    rng = np.random.default_rng(SEED)
    p = rng.dirichlet(np.full(3, 0.3), size=10_000)
    grid = (1, 2, 5, 10, 50)
    identity = float(np.abs(soften(p, 1) - np.maximum(p, 1e-12) / np.maximum(p, 1e-12).sum(-1, keepdims=True)).max())
    check(8, "T=1 is the identity within 1e-12", identity <= 1e-12, f"{identity:.1e}")
    same = all(np.array_equal(soften(p, T).argmax(-1), p.argmax(-1)) for T in grid)
    check(8, "argmax preserved on 10K triples", same)
    q = [soften(p, T) for T in grid]
    h = [-(x * np.log(x)).sum(-1) for x in q]
    check(8, "entropy non-decreasing in T", all(np.all(b >= a - 1e-12) for a, b in zip(h, h[1:])))
    raw = np.array([0.999, 2e-4, 3e-6])
    got = soften(raw / raw.sum(), 5)
    check(8, "worked example gives (0.7932, 0.1444, 0.0624) within 1e-3",
          bool(np.abs(got - [0.7932, 0.1444, 0.0624]).max() <= 1e-3), np.array2string(got, precision=4))
    gap = float(np.abs(got - [0.71, 0.20, 0.09]).max())
    check(8, "formula output differs from the printed (0.71, 0.20, 0.09) by > 0.05", gap > 0.05, f"{gap:.3f}")


# 9 -------------------------------------------------------------------------------


def test_c9_gradient():
    rng = np.random.default_rng(SEED)
    model = mlp.init_model(mlp.Architecture(4, (5,), 2), rng)
    for b in model.biases:
        b[:] = rng.normal(scale=0.5, size=b.shape)
    x = rng.normal(size=(8, 4))
    t = rng.dirichlet(np.ones(3), size=(8, 2))
    gw, gb = mlp.grad(model, x, t)
    slots = [(model.weights, gw, i, idx) for i, w in enumerate(model.weights) for idx in np.ndindex(w.shape)]
    slots += [(model.biases, gb, i, idx) for i, b in enumerate(model.biases) for idx in np.ndindex(b.shape)]
    worst, h = 0.0, 1e-5
    for k in rng.choice(len(slots), 20, replace=False):
        params, g, i, idx = slots[k]
        old = params[i][idx]
        params[i][idx] = old + h
        up = mlp.loss(model, x, t)
        params[i][idx] = old - h
        down = mlp.loss(model, x, t)
        params[i][idx] = old
        num = (up - down) / (2 * h)
        worst = max(worst, abs(g[i][idx] - num) / max(abs(g[i][idx]), abs(num), 1e-8))
    check(9, "analytic vs finite-difference relative error <= 1e-4", worst <= 1e-4, f"{worst:.1e}")


# 10 ------------------------------------------------------------------------------


def test_c10_determinism(large, kd_runs, tmp_path):
    import json

    cloud = preset("cloud_scale")
    ds_same = dumps_dataset(generate_dataset(cloud, N_TRAIN, SEED)) == dumps_dataset(large.train)
    check(10, "datasets byte-identical across runs", ds_same)

    teacher, codec = train_teacher(
        large.train, default_arch(large.codec, TEACHER_HIDDEN), replace(TEACHER_CONFIG, seed=SEED), large.codec
    )
    as_text = lambda m: json.dumps(artifact_to_dict(m, codec), sort_keys=True)  # noqa: E731
    check(10, "teacher byte-identical across runs", as_text(teacher) == as_text(large.teacher))

    edge = generate_dataset(preset("edge_scale"), 1000, KD_SEEDS[0])
    student = train_student(
        distill_labels(large.teacher, codec, edge.requirements, 5.0),
        default_arch(codec, STUDENT_HIDDEN),
        replace(STUDENT_CONFIG, seed=KD_SEEDS[0]),
    )
    check(10, "student byte-identical across runs", as_text(student) == as_text(kd_runs[0].student))

    save_dataset(large.test, tmp_path / "test.jsonl")
    back = load_dataset(tmp_path / "test.jsonl")
    save_dataset(back, tmp_path / "again.jsonl")
    ds_rt = back.samples == large.test.samples and (tmp_path / "test.jsonl").read_bytes() == (
        tmp_path / "again.jsonl"
    ).read_bytes()
    save_artifact(tmp_path / "t.model", large.teacher, codec)
    m, c, _ = load_artifact(tmp_path / "t.model")
    save_artifact(tmp_path / "t2.model", m, c)
    model_rt = m.equals(large.teacher) and (tmp_path / "t.model").read_bytes() == (tmp_path / "t2.model").read_bytes()
    check(10, "dataset and model files round-trip exactly", ds_rt and model_rt)
