"""Imitation of oracle decisions: feature encoding, training and online prediction.

Features are ``[eps..., data..., p1, p2, b1, b2]`` min-max scaled by the
generating distribution's ranges, so teacher and student share one encoding
that does not depend on any particular sample draw. The codec is stored
alongside the network in model artifact files.
"""

from __future__ import annotations

import json
from typing import Sequence

import numpy as np

from . import mlp
from .model import NUM_LOCATIONS, Decision, Requirement, RequirementArrays, stack_requirements
from .solvers import Policy
from .workload import Dataset, DistributionSpec, atomic_write_text

__all__ = [
    "FeatureCodec",
    "one_hot",
    "decode",
    "decode_batch",
    "train_teacher",
    "predict",
    "predict_codes",
    "accuracy",
    "LearnedPolicy",
    "save_artifact",
    "load_artifact",
]

ARTIFACT_SCHEMA = "edgekd.artifact"
ARTIFACT_VERSION = 1


class FeatureCodec:
    """Affine map from a requirement to a feature vector in (nominally) [0, 1]."""

    def __init__(self, spec: DistributionSpec):
        self.spec = spec
        a = spec.num_subtasks
        lo = [spec.eps_range[0]] * a + [spec.d_range[0]] * (a + 1)
        hi = [spec.eps_range[1]] * a + [spec.d_range[1]] * (a + 1)
        for r in (spec.p1_range, spec.p2_range, spec.b1_range, spec.b2_range):
            lo.append(r[0])
            hi.append(r[1])
        self.lo = np.array(lo)
        width = np.array(hi) - self.lo
        # degenerate ranges only shift
        self.width = np.where(width > 0, width, 1.0)

    @property
    def num_subtasks(self) -> int:
        return self.spec.num_subtasks

    @property
    def input_dim(self) -> int:
        return 2 * self.num_subtasks + 5

    def __eq__(self, other):
        return isinstance(other, FeatureCodec) and self.spec == other.spec

    def raw(self, req: Requirement) -> np.ndarray:
        if req.num_subtasks != self.num_subtasks:
            raise ValueError(
                f"codec expects {self.num_subtasks} subtasks, requirement has {req.num_subtasks}"
            )
        e = req.env
        return np.array((*req.task.eps, *req.task.data, e.p1, e.p2, e.b1, e.b2))

    def encode(self, req: Requirement) -> np.ndarray:
        """Normalised features; out-of-range values extrapolate linearly."""
        return (self.raw(req) - self.lo) / self.width

    def encode_arrays(self, arrays: RequirementArrays) -> np.ndarray:
        if arrays.eps.shape[1] != self.num_subtasks:
            raise ValueError(f"codec expects {self.num_subtasks} subtasks")
        raw = np.column_stack(
            [arrays.eps, arrays.data, arrays.p1, arrays.p2, arrays.b1, arrays.b2]
        )
        return (raw - self.lo) / self.width

    def encode_many(self, reqs: Sequence[Requirement]) -> np.ndarray:
        return self.encode_arrays(stack_requirements(reqs))

    def decode_features(self, x: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`encode` back to raw SI values."""
        return np.asarray(x) * self.width + self.lo


def one_hot(codes: np.ndarray, num_classes: int = NUM_LOCATIONS) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.intp)
    return np.eye(num_classes)[codes]


def decode_batch(probs: np.ndarray) -> np.ndarray:
    """Per-group argmax; np.argmax keeps the first maximum, so ties go Device-ward."""
    return np.argmax(probs, axis=-1)


def decode(probs) -> Decision:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] != NUM_LOCATIONS:
        raise ValueError(f"expected (groups, {NUM_LOCATIONS}) probabilities, got {probs.shape}")
    return Decision(decode_batch(probs))


def default_arch(codec: FeatureCodec, hidden: Sequence[int]) -> mlp.Architecture:
    return mlp.Architecture(codec.input_dim, tuple(hidden), codec.num_subtasks, NUM_LOCATIONS)


def train_teacher(
    dataset: Dataset,
    arch: mlp.Architecture,
    cfg: mlp.TrainConfig = mlp.TrainConfig(),
    codec: FeatureCodec | None = None,
) -> tuple[mlp.MlpModel, FeatureCodec]:
    """Fit a network to a dataset's hard labels.

    The codec defaults to one built from the dataset's distribution.
    """
    if dataset.kind != "hard":
        raise ValueError("train_teacher needs hard-labelled samples")
    if not len(dataset):
        raise ValueError("empty dataset")
    codec = codec or FeatureCodec(dataset.spec)
    x = codec.encode_arrays(dataset.arrays())
    y = one_hot(dataset.label_codes())
    return mlp.train(arch, x, y, cfg), codec


def predict_codes(model: mlp.MlpModel, codec: FeatureCodec, reqs) -> np.ndarray:
    """Batched prediction; accepts a list of requirements or RequirementArrays."""
    arrays = reqs if isinstance(reqs, RequirementArrays) else stack_requirements(reqs)
    return decode_batch(mlp.forward(model, codec.encode_arrays(arrays)))


def predict(model: mlp.MlpModel, codec: FeatureCodec, req: Requirement) -> Decision:
    return decode(mlp.forward(model, codec.encode(req)))


def accuracy(model: mlp.MlpModel, codec: FeatureCodec, dataset: Dataset) -> tuple[float, float]:
    """(per-label accuracy, exact-match accuracy) against the dataset's labels."""
    if not len(dataset):
        raise ValueError("empty dataset")
    return label_agreement(predict_codes(model, codec, dataset.arrays()), dataset.label_codes())


def label_agreement(pred: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    hits = np.asarray(pred) == np.asarray(truth)
    return float(hits.mean()), float(hits.all(axis=1).mean())


class LearnedPolicy(Policy):
    """Online decisions from a trained network: encode, forward, argmax."""

    learned = True

    def __init__(self, model: mlp.MlpModel, codec: FeatureCodec, name: str = "DIL"):
        self.model = model
        self.codec = codec
        # hot path for one-at-a-time decisions
        self._layers = list(zip(model.weights, model.biases))
        self._lo, self._width = codec.lo, codec.width
        super().__init__(name, self._decide)

    def _decide(self, req: Requirement) -> Decision:
        e = req.env
        h = (np.array((*req.task.eps, *req.task.data, e.p1, e.p2, e.b1, e.b2)) - self._lo) / self._width
        for w, b in self._layers[:-1]:
            h = np.maximum(h @ w + b, 0.0)
        w, b = self._layers[-1]
        # argmax of softmax == argmax of logits; softmax kept for contract parity
        probs = mlp.grouped_softmax(h @ w + b, NUM_LOCATIONS)
        return Decision(np.argmax(probs, axis=-1))

    def decide_many(self, reqs):
        return predict_codes(self.model, self.codec, reqs)


# -- artifact files -------------------------------------------------------------


def artifact_to_dict(model: mlp.MlpModel, codec: FeatureCodec, meta: dict | None = None) -> dict:
    return {
        "schema": ARTIFACT_SCHEMA,
        "version": ARTIFACT_VERSION,
        "codec_spec": codec.spec.to_dict(),
        "model": mlp.model_to_dict(model),
        "meta": meta or {},
    }


def save_artifact(path, model: mlp.MlpModel, codec: FeatureCodec, meta: dict | None = None) -> None:
    """Network plus codec in one JSON document."""
    atomic_write_text(path, json.dumps(artifact_to_dict(model, codec, meta), sort_keys=True))


def load_artifact(path) -> tuple[mlp.MlpModel, FeatureCodec, dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise mlp.ModelFormatError(f"{path}: malformed model artifact: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema") != ARTIFACT_SCHEMA:
        raise mlp.ModelFormatError(f"{path}: not an {ARTIFACT_SCHEMA} document")
    if doc.get("version") != ARTIFACT_VERSION:
        raise mlp.ModelFormatError(
            f"{path}: artifact schema version {doc.get('version')!r} is not supported"
        )
    model = mlp.model_from_dict(doc.get("model"))
    try:
        codec = FeatureCodec(DistributionSpec.from_dict(doc["codec_spec"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise mlp.ModelFormatError(f"{path}: bad codec spec: {exc}") from None
    if codec.input_dim != model.arch.input_dim or codec.num_subtasks != model.arch.num_groups:
        raise mlp.ModelFormatError(f"{path}: codec and network shapes disagree")
    return model, codec, doc.get("meta", {})
