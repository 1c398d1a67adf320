"""Temperature softening of teacher outputs and student training on soft targets.

Softening raises each probability to the power ``1/T`` (through logs) and
renormalises::

    q_i = exp(ln(p_i) / T) / sum_j exp(ln(p_j) / T)

``T = 1`` leaves ``p`` unchanged and larger ``T`` flattens it towards uniform
without ever changing the argmax.

For instance ``(0.999, 2e-4, 3e-6)`` (renormalised) becomes
``(0.7932, 0.1444, 0.0624)`` at ``T = 5`` and ``(0.586, 0.250, 0.164)`` at
``T = 10``. The rounder ``(0.71, 0.20, 0.09)`` sometimes quoted for this
input does not follow from the formula; the formula is what is implemented.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import mlp
from .imitation import FeatureCodec
from .model import Requirement, stack_requirements
from .workload import Dataset, SoftSample

__all__ = [
    "DEFAULT_TEMPERATURE",
    "soften",
    "distill_labels",
    "SoftTargets",
    "train_student",
    "soft_dataset",
]

DEFAULT_TEMPERATURE = 5.0
_CLAMP = 1e-12
_SUM_TOL = 1e-6


def soften(p, T: float = DEFAULT_TEMPERATURE) -> np.ndarray:
    """Soften probability vectors along the last axis.

    Entries below 1e-12 are clamped up before taking logs. Inputs must be
    nonnegative and sum to 1 within 1e-6.
    """
    if not T >= 1:
        raise ValueError(f"temperature must be >= 1, got {T}")
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > _SUM_TOL):
        raise ValueError("soften expects normalised, nonnegative probability vectors")
    z = np.log(np.maximum(p, _CLAMP)) / T
    z -= z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class SoftTargets:
    """Features plus softened per-group targets ready for :func:`mlp.train`."""

    def __init__(self, reqs: list[Requirement], features: np.ndarray, targets: np.ndarray):
        self.reqs = reqs
        self.features = features
        self.targets = targets

    def __len__(self) -> int:
        return self.features.shape[0]


def distill_labels(
    teacher: mlp.MlpModel,
    codec: FeatureCodec,
    reqs: Sequence[Requirement],
    T: float = DEFAULT_TEMPERATURE,
) -> SoftTargets:
    """Label requirements with the teacher's softened output distributions.

    Any hard labels the requirements may have are not consulted.
    """
    reqs = list(reqs)
    x = codec.encode_arrays(stack_requirements(reqs))
    return SoftTargets(reqs, x, soften(mlp.forward(teacher, x), T))


def soft_dataset(soft: SoftTargets, spec) -> Dataset:
    """Wrap soft targets as a persistable dataset (``soft_label`` records)."""
    return Dataset(spec, [SoftSample(r, t) for r, t in zip(soft.reqs, soft.targets)])


def train_student(
    soft: SoftTargets, arch: mlp.Architecture, cfg: mlp.TrainConfig = mlp.TrainConfig()
) -> mlp.MlpModel:
    if not len(soft):
        raise ValueError("empty soft dataset")
    return mlp.train(arch, soft.features, soft.targets, cfg)
