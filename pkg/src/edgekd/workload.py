"""Synthetic offloading requirements, oracle labelling and dataset files.

Dataset files are JSON lines: a header record (schema name and version, label
kind, distribution, seed) followed by one record per sample. Floats are
written with ``repr`` precision so a save/load round trip is exact.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .model import Decision, Requirement, RequirementArrays, stack_requirements
from .solvers import Policy, solve_exhaustive_batch

__all__ = [
    "SCHEMA",
    "SCHEMA_VERSION",
    "DatasetFormatError",
    "DistributionSpec",
    "preset",
    "PRESETS",
    "sample_requirement",
    "sample_rng",
    "LabeledSample",
    "SoftSample",
    "Dataset",
    "generate_requirements",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "atomic_write_text",
]

SCHEMA = "edgekd.dataset"
SCHEMA_VERSION = 1

# Rates drawn below these floors are redrawn; zero bandwidth makes latency undefined.
RATE_FLOOR_HZ = 1e6
BANDWIDTH_FLOOR_BPS = 1e4
_MAX_REDRAWS = 10_000


class DatasetFormatError(ValueError):
    """A dataset file could not be parsed."""


@dataclass(frozen=True)
class DistributionSpec:
    """Uniform ranges for each requirement field."""

    num_subtasks: int
    eps_range: tuple[float, float]
    d_range: tuple[float, float]
    p1_range: tuple[float, float]
    p2_range: tuple[float, float]
    b1_range: tuple[float, float]
    b2_range: tuple[float, float]

    def __post_init__(self):
        if int(self.num_subtasks) < 1:
            raise ValueError("num_subtasks must be >= 1")
        object.__setattr__(self, "num_subtasks", int(self.num_subtasks))
        for name in ("eps_range", "d_range", "p1_range", "p2_range", "b1_range", "b2_range"):
            lo, hi = (float(x) for x in getattr(self, name))
            if not lo <= hi:
                raise ValueError(f"{name}: lo={lo} exceeds hi={hi}")
            if name in ("eps_range", "d_range") and lo < 0:
                raise ValueError(f"{name} must be nonnegative")
            if name not in ("eps_range", "d_range") and hi <= 0:
                raise ValueError(f"{name} needs hi > 0")
            object.__setattr__(self, name, (lo, hi))

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


PRESETS = {
    "cloud_scale": DistributionSpec(
        num_subtasks=6,
        eps_range=(0.0, 2000e6),
        d_range=(0.0, 10e6),
        p1_range=(100e6, 1000e6),
        p2_range=(500e6, 5000e6),
        b1_range=(0.0, 2e6),
        b2_range=(0.0, 3e6),
    ),
    "edge_scale": DistributionSpec(
        num_subtasks=6,
        eps_range=(500e6, 1500e6),
        d_range=(3e6, 8e6),
        p1_range=(100e6, 1000e6),
        p2_range=(500e6, 5000e6),
        b1_range=(0.0, 2e6),
        b2_range=(0.0, 3e6),
    ),
}
_ALIASES = {"cloud": "cloud_scale", "edge": "edge_scale"}


def preset(name: str) -> DistributionSpec:
    """``cloud_scale`` (wide ranges, teacher data) or ``edge_scale`` (narrow ranges)."""
    key = _ALIASES.get(name, name)
    try:
        return PRESETS[key]
    except KeyError:
        valid = ", ".join(sorted(PRESETS) + sorted(_ALIASES))
        raise ValueError(f"unknown preset {name!r}; valid presets: {valid}") from None


def _uniform_above(rng: np.random.Generator, lo: float, hi: float, floor: float) -> float:
    if hi < floor:
        raise ValueError(f"range [{lo}, {hi}] lies entirely below the floor {floor}")
    for _ in range(_MAX_REDRAWS):
        x = float(rng.uniform(lo, hi))
        if x >= floor:
            return x
    raise RuntimeError(f"could not draw from [{lo}, {hi}] above {floor}")


def sample_requirement(spec: DistributionSpec, rng: np.random.Generator) -> Requirement:
    """Draw one requirement; every field independently uniform on its range."""
    n = spec.num_subtasks
    eps = rng.uniform(*spec.eps_range, size=n)
    data = rng.uniform(*spec.d_range, size=n + 1)
    p1 = _uniform_above(rng, *spec.p1_range, RATE_FLOOR_HZ)
    p2 = _uniform_above(rng, *spec.p2_range, RATE_FLOOR_HZ)
    b1 = _uniform_above(rng, *spec.b1_range, BANDWIDTH_FLOOR_BPS)
    b2 = _uniform_above(rng, *spec.b2_range, BANDWIDTH_FLOOR_BPS)
    return Requirement.from_values(eps.tolist(), data.tolist(), p1, p2, b1, b2)


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for sample ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


@dataclass(frozen=True)
class LabeledSample:
    req: Requirement
    label: Decision


@dataclass(frozen=True)
class SoftSample:
    """A requirement with per-subtask probability triples as its target."""

    req: Requirement
    soft_label: np.ndarray  # (A, 3)

    def __eq__(self, other):
        if not isinstance(other, SoftSample):
            return NotImplemented
        return self.req == other.req and np.array_equal(self.soft_label, other.soft_label)


@dataclass
class Dataset:
    spec: DistributionSpec
    samples: list = field(default_factory=list)
    seed: int | None = None

    def __post_init__(self):
        for i, s in enumerate(self.samples):
            if s.req.num_subtasks != self.spec.num_subtasks:
                raise ValueError(f"sample {i} has {s.req.num_subtasks} subtasks")
            if isinstance(s, LabeledSample) and len(s.label) != self.spec.num_subtasks:
                raise ValueError(f"sample {i} label has length {len(s.label)}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def kind(self) -> str:
        if self.samples and isinstance(self.samples[0], SoftSample):
            return "soft"
        return "hard"

    @property
    def requirements(self) -> list[Requirement]:
        return [s.req for s in self.samples]

    def arrays(self) -> RequirementArrays:
        return stack_requirements(self.requirements)

    def label_codes(self) -> np.ndarray:
        """Hard labels as an (N, A) integer array."""
        return np.array([s.label.codes for s in self.samples], dtype=np.int64)


def generate_requirements(spec: DistributionSpec, n: int, seed: int) -> list[Requirement]:
    """``n`` requirements; sample ``i`` depends only on ``(seed, i)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return [sample_requirement(spec, sample_rng(seed, i)) for i in range(n)]


def generate_dataset(
    spec: DistributionSpec,
    n: int,
    seed: int,
    labeler: Policy | Callable[[Requirement], Decision] | None = None,
) -> Dataset:
    """Sample ``n`` requirements and label each one.

    The default labeler is the exhaustive oracle, run in vectorised batches.
    """
    reqs = generate_requirements(spec, n, seed)
    if labeler is None:
        codes, _ = solve_exhaustive_batch(stack_requirements(reqs))
        labels = [Decision(c) for c in codes]
    elif isinstance(labeler, Policy):
        labels = [Decision(c) for c in labeler.decide_many(reqs)]
    else:
        labels = [labeler(r) for r in reqs]
    return Dataset(spec, [LabeledSample(r, lab) for r, lab in zip(reqs, labels)], seed)


# -- persistence ----------------------------------------------------------------


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary sibling file and rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sample_record(s) -> dict:
    env = s.req.env
    rec = {
        "eps_cycles": list(s.req.task.eps),
        "data_bytes": list(s.req.task.data),
        "p1_hz": env.p1,
        "p2_hz": env.p2,
        "b1_bps": env.b1,
        "b2_bps": env.b2,
    }
    if isinstance(s, SoftSample):
        rec["soft_label"] = s.soft_label.tolist()
    else:
        rec["label"] = list(s.label.codes)
    return rec


def dumps_dataset(ds: Dataset) -> str:
    header = {
        "schema": SCHEMA,
        "version": SCHEMA_VERSION,
        "kind": ds.kind,
        "seed": ds.seed,
        "spec": ds.spec.to_dict(),
    }
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(_sample_record(s), sort_keys=True) for s in ds.samples]
    return "\n".join(lines) + "\n"


def save_dataset(ds: Dataset, path) -> None:
    atomic_write_text(path, dumps_dataset(ds))


def _parse_sample(rec: dict, kind: str, spec: DistributionSpec, lineno: int):
    def fail(msg):
        raise DatasetFormatError(f"line {lineno}: {msg}")

    if not isinstance(rec, dict):
        fail("sample record must be a JSON object")
    keys = ["eps_cycles", "data_bytes", "p1_hz", "p2_hz", "b1_bps", "b2_bps"]
    keys.append("soft_label" if kind == "soft" else "label")
    missing = [k for k in keys if k not in rec]
    if missing:
        fail(f"missing keys {missing}")
    a = spec.num_subtasks
    if len(rec["eps_cycles"]) != a:
        fail(f"eps_cycles has {len(rec['eps_cycles'])} entries, expected {a}")
    try:
        req = Requirement.from_values(
            rec["eps_cycles"], rec["data_bytes"],
            rec["p1_hz"], rec["p2_hz"], rec["b1_bps"], rec["b2_bps"],
        )
    except (TypeError, ValueError) as exc:
        fail(f"invalid requirement: {exc}")
    if kind == "soft":
        soft = np.asarray(rec["soft_label"], dtype=np.float64)
        if soft.shape != (a, 3):
            fail(f"soft_label has shape {soft.shape}, expected ({a}, 3)")
        return SoftSample(req, soft)
    label = rec["label"]
    if len(label) != a:
        fail(f"label has length {len(label)}, expected {a}")
    if any(not isinstance(x, int) or x not in (0, 1, 2) for x in label):
        fail(f"label entries must be 0, 1 or 2, got {label}")
    return LabeledSample(req, Decision(label))


def loads_dataset(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DatasetFormatError("empty dataset: missing header record on line 1")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"line 1: malformed header: {exc}") from None
    if not isinstance(header, dict) or header.get("schema") != SCHEMA:
        raise DatasetFormatError(f"line 1: not an {SCHEMA} header")
    if header.get("version") != SCHEMA_VERSION:
        raise DatasetFormatError(
            f"line 1: schema version {header.get('version')!r} is not supported "
            f"(expected {SCHEMA_VERSION})"
        )
    kind = header.get("kind", "hard")
    if kind not in ("hard", "soft"):
        raise DatasetFormatError(f"line 1: unknown label kind {kind!r}")
    try:
        spec = DistributionSpec.from_dict(header["spec"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"line 1: bad distribution spec: {exc}") from None
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"line {lineno}: malformed record: {exc}") from None
        samples.append(_parse_sample(rec, kind, spec, lineno))
    return Dataset(spec, samples, header.get("seed"))


def load_dataset(path) -> Dataset:
    return loads_dataset(Path(path).read_text(encoding="utf-8"))
