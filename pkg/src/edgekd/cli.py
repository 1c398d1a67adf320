"""Command line: one pipeline stage per subcommand.

    edgekd gen      --spec cloud --n 10000 --seed 7 --out train.jsonl
    edgekd train    --data train.jsonl --arch 256x5 --seed 1 --out teacher.model
    edgekd distill  --teacher teacher.model --reqs edge.jsonl --temp 5 --arch 32x2 --seed 1 --out student.model
    edgekd eval     --test test.jsonl --policy optimal --policy greedy --policy teacher.model --out report.csv
    edgekd bench    --reqs test.jsonl --policy greedy --policy student.model --decisions 100000 --out delay.csv
    edgekd repro    fig5 --seed 1
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path

from . import mlp
from .distill import DEFAULT_TEMPERATURE, distill_labels, soft_dataset, train_student
from .evaluation import (
    STUDENT_CONFIG,
    STUDENT_HIDDEN,
    TEACHER_CONFIG,
    bench_table,
    evaluate,
    experiment_kd,
    experiment_large,
    reports_to_csv,
)
from .imitation import (
    FeatureCodec,
    LearnedPolicy,
    default_arch,
    load_artifact,
    save_artifact,
    train_teacher,
)
from .model import Location
from .solvers import Policy, exhaustive_policy, fixed_policy, greedy_policy, random_policy
from .workload import (
    DistributionSpec,
    atomic_write_text,
    generate_dataset,
    generate_requirements,
    load_dataset,
    preset,
    save_dataset,
)

log = logging.getLogger("edgekd")

BUILTIN_POLICIES = ("optimal", "greedy", "local", "edge", "cloud", "random")


class CliError(Exception):
    pass


def parse_arch(text: str) -> tuple[int, ...]:
    """``"256x5"`` -> five hidden layers of width 256."""
    try:
        width, depth = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"architecture must look like WIDTHxDEPTH, got {text!r}")
    if width < 1 or depth < 0:
        raise argparse.ArgumentTypeError(f"bad architecture {text!r}")
    return (width,) * depth


def load_spec(name_or_path: str) -> DistributionSpec:
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return DistributionSpec.from_dict(json.loads(path.read_text()))
    return preset(name_or_path)


def make_policy(token: str, seed: int | None) -> Policy:
    key = token.lower()
    if key == "optimal":
        return exhaustive_policy()
    if key == "greedy":
        return greedy_policy()
    if key in ("local", "device"):
        return fixed_policy(Location.DEVICE)
    if key == "edge":
        return fixed_policy(Location.EDGE)
    if key == "cloud":
        return fixed_policy(Location.CLOUD)
    if key == "random":
        if seed is None:
            raise CliError("the random policy needs --seed")
        return random_policy(seed)
    path = Path(token)
    if not path.exists():
        raise CliError(
            f"policy {token!r} is neither a built-in ({', '.join(BUILTIN_POLICIES)}) nor a model file"
        )
    model, codec, _ = load_artifact(path)
    return LearnedPolicy(model, codec, path.stem)


def _train_config(args, base: mlp.TrainConfig) -> mlp.TrainConfig:
    cfg = replace(base, seed=args.seed)
    for flag, attr in [
        ("lr", "learning_rate"),
        ("batch", "batch_size"),
        ("epochs", "epochs"),
        ("patience", "patience"),
        ("val_fraction", "val_fraction"),
    ]:
        value = getattr(args, flag)
        if value is not None:
            cfg = replace(cfg, **{attr: value})
    return cfg


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, required=True, help="seed for init, split and shuffling")
    p.add_argument("--lr", type=float, help="learning rate")
    p.add_argument("--batch", type=int, help="minibatch size")
    p.add_argument("--epochs", type=int, help="maximum epochs")
    p.add_argument("--patience", type=int, help="early-stopping patience in epochs (0 disables)")
    p.add_argument("--val-fraction", type=float, help="held-out fraction for early stopping")


# -- subcommands --------------------------------------------------------------------


def cmd_gen(args) -> int:
    spec = load_spec(args.spec)
    labeler = None if args.labeler == "optimal" else make_policy(args.labeler, args.seed)
    ds = generate_dataset(spec, args.n, args.seed, labeler)
    save_dataset(ds, args.out)
    counts = Counter(ds.label_codes().ravel().tolist())
    total = sum(counts.values())
    dist = ", ".join(f"{Location(k).name.lower()}={counts.get(k, 0) / total:.3f}" for k in range(3))
    print(f"wrote {len(ds)} samples to {args.out}; label distribution: {dist}")
    return 0


def cmd_train(args) -> int:
    ds = load_dataset(args.data)
    cfg = _train_config(args, TEACHER_CONFIG)
    codec = FeatureCodec(ds.spec)
    model, codec = train_teacher(ds, default_arch(codec, args.arch), cfg, codec)
    save_artifact(args.out, model, codec, {"role": "teacher", "seed": args.seed})
    print(f"wrote model with {mlp.param_count(model.arch)} parameters to {args.out}")
    return 0


def cmd_distill(args) -> int:
    teacher, codec, _ = load_artifact(args.teacher)
    reqs = load_dataset(args.reqs)
    soft = distill_labels(teacher, codec, reqs.requirements, args.temp)
    if args.soft_out:
        save_dataset(soft_dataset(soft, reqs.spec), args.soft_out)
    cfg = _train_config(args, STUDENT_CONFIG)
    student = train_student(soft, default_arch(codec, args.arch), cfg)
    save_artifact(
        args.out, student, codec, {"role": "student", "seed": args.seed, "temperature": args.temp}
    )
    print(f"wrote student with {mlp.param_count(student.arch)} parameters to {args.out}")
    return 0


def cmd_eval(args) -> int:
    test = load_dataset(args.test)
    policies = [make_policy(tok, args.seed) for tok in args.policy]
    reports = evaluate(policies, test)
    text = reports_to_csv(reports)
    if args.out:
        atomic_write_text(args.out, text)
    sys.stdout.write(text)
    return 0


def _delay_csv(table: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "mean_inference_delay_s", "delay_normalized_to_greedy"])
    for name, (delay, ratio) in table.items():
        w.writerow([name, repr(delay), "" if ratio is None else repr(ratio)])
    return buf.getvalue()


def cmd_bench(args) -> int:
    reqs = load_dataset(args.reqs).requirements
    policies = [make_policy(tok, args.seed) for tok in args.policy]
    if not any(p.name == "Greedy" for p in policies):
        policies.append(greedy_policy())
    text = _delay_csv(bench_table(policies, reqs, args.decisions))
    if args.out:
        atomic_write_text(args.out, text)
    sys.stdout.write(text)
    return 0


def _check(label: str, ok: bool) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {label}")
    return ok


def cmd_repro(args) -> int:
    cfg = TEACHER_CONFIG if args.epochs is None else replace(TEACHER_CONFIG, epochs=args.epochs)
    cloud = preset("cloud_scale")
    large = None
    if args.teacher:
        if args.which == "fig5":
            raise CliError("fig5 trains its own teacher; drop --teacher")
        teacher, codec, _ = load_artifact(args.teacher)
    else:
        large = experiment_large(args.seed, args.n_train, args.n_test, cfg=cfg)
        teacher, codec = large.teacher, large.codec
        if args.save_teacher:
            save_artifact(args.save_teacher, teacher, codec, {"role": "teacher", "seed": args.seed})

    if args.which == "fig5":
        reps = {r.name: r for r in large.reports}
        lat = {k: v.mean_latency for k, v in reps.items()}
        text = reports_to_csv(large.reports)
        checks = [
            _check("Edge < Local", lat["Edge"] < lat["Local"]),
            _check("Edge < Cloud", lat["Edge"] < lat["Cloud"]),
            _check("Random is worst", lat["Random"] == max(lat.values())),
            _check("Large DIL beats Greedy", lat["Large DIL"] < lat["Greedy"]),
            _check("Large DIL normalized <= 1.2", reps["Large DIL"].normalized_latency <= 1.2),
        ]
    elif args.which == "fig6":
        test = large.test if large else generate_dataset(cloud, args.n_test, args.seed + 1_000_003)
        kd = experiment_kd(args.seed, teacher, codec, test)
        reps = {r.name: r for r in kd.reports}
        text = reports_to_csv(kd.reports)
        checks = [
            _check(
                "KD-DIL beats Baseline DIL",
                reps["KD-DIL"].normalized_latency < reps["Baseline DIL"].normalized_latency,
            )
        ]
    else:
        edge = generate_dataset(preset("edge_scale"), 1000, args.seed)
        student = train_student(
            distill_labels(teacher, codec, edge.requirements, DEFAULT_TEMPERATURE),
            default_arch(codec, STUDENT_HIDDEN),
            replace(STUDENT_CONFIG, seed=args.seed),
        )
        policies = [
            LearnedPolicy(student, codec, "KD-DIL"),
            LearnedPolicy(teacher, codec, "Large DIL"),
            greedy_policy(),
            exhaustive_policy(),
        ]
        reqs = generate_requirements(cloud, 1000, args.seed + 7)
        table = bench_table(policies, reqs, args.decisions)
        d = {k: v[0] for k, v in table.items()}
        text = _delay_csv(table)
        checks = [
            _check("Greedy normalized to 1.00", table["Greedy"][1] == 1.0),
            _check("KD-DIL faster than Large DIL", d["KD-DIL"] < d["Large DIL"]),
            _check("KD-DIL / Large DIL <= 0.6", d["KD-DIL"] / d["Large DIL"] <= 0.6),
            _check("Optimal >= 10x Large DIL", d["Optimal"] >= 10 * d["Large DIL"]),
        ]
    if args.out:
        atomic_write_text(args.out, text)
    sys.stdout.write(text)
    return 0 if all(checks) else 3


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgekd",
        description="Edge offloading: oracle labels, imitation training, distillation, evaluation.",
        allow_abbrev=False,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, help=help_, description=help_, allow_abbrev=False)

    p = add("gen", "generate and label a dataset")
    p.add_argument("--spec", required=True, help="preset name (cloud, edge) or a JSON spec file")
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, required=True, help="generation seed")
    p.add_argument("--labeler", default="optimal", choices=BUILTIN_POLICIES, help="labelling policy")
    p.add_argument("--out", required=True, help="output dataset (JSON lines)")
    p.set_defaults(func=cmd_gen)

    p = add("train", "train an imitation model on hard labels")
    p.add_argument("--data", required=True, help="training dataset")
    p.add_argument("--arch", type=parse_arch, default=(256,) * 5, help="hidden layers, WIDTHxDEPTH")
    _add_train_flags(p)
    p.add_argument("--out", required=True, help="output model artifact")
    p.set_defaults(func=cmd_train)

    p = add("distill", "train a student on softened teacher outputs")
    p.add_argument("--teacher", required=True, help="teacher model artifact")
    p.add_argument("--reqs", required=True, help="dataset whose requirements are relabelled")
    p.add_argument("--temp", type=float, default=DEFAULT_TEMPERATURE, help="softening temperature (>= 1)")
    p.add_argument("--arch", type=parse_arch, default=(32,) * 2, help="hidden layers, WIDTHxDEPTH")
    _add_train_flags(p)
    p.add_argument("--soft-out", help="also write the soft-labelled dataset here")
    p.add_argument("--out", required=True, help="output model artifact")
    p.set_defaults(func=cmd_distill)

    p = add("eval", "latency report for policies on a labelled test set")
    p.add_argument("--test", required=True, help="oracle-labelled test dataset")
    p.add_argument(
        "--policy", action="append", required=True,
        help=f"built-in ({', '.join(BUILTIN_POLICIES)}) or model file; repeatable",
    )
    p.add_argument("--seed", type=int, help="seed for the random policy")
    p.add_argument("--out", help="CSV report path")
    p.set_defaults(func=cmd_eval)

    p = add("bench", "per-decision inference delay, normalised to Greedy")
    p.add_argument("--reqs", required=True, help="dataset supplying requirements")
    p.add_argument("--policy", action="append", required=True, help="policy (repeatable)")
    p.add_argument("--decisions", type=int, default=100_000, help="decisions timed per policy")
    p.add_argument("--seed", type=int, help="seed for the random policy")
    p.add_argument("--out", help="CSV path")
    p.set_defaults(func=cmd_bench)

    p = add("repro", "reproduce one figure or table end to end")
    p.add_argument("which", choices=("fig5", "fig6", "table1"), help="experiment to run")
    p.add_argument("--seed", type=int, required=True, help="experiment seed")
    p.add_argument("--n-train", type=int, default=100_000, help="cloud-scale training samples")
    p.add_argument("--n-test", type=int, default=10_000, help="cloud-scale test samples")
    p.add_argument("--epochs", type=int, help="teacher epoch cap")
    p.add_argument("--teacher", help="reuse a trained teacher artifact (fig6, table1)")
    p.add_argument("--save-teacher", help="write the trained teacher here")
    p.add_argument("--decisions", type=int, default=100_000, help="decisions per policy (table1)")
    p.add_argument("--out", help="CSV path")
    p.set_defaults(func=cmd_repro)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"edgekd {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
