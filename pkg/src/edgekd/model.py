"""Task/environment data model and end-to-end latency of placement decisions.

A task is a chain of subtasks ``0..n-1``. Subtask ``t`` consumes ``data[t]``
bytes and produces ``data[t + 1]`` bytes; the raw input starts on the device
and the final output must return to the device. The edge server relays all
device<->cloud traffic, so such transfers pay for both links.

All quantities are SI base units: cycles, bytes, Hz, bytes/second, seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "NUM_LOCATIONS",
    "Location",
    "TaskProfile",
    "Environment",
    "Requirement",
    "Decision",
    "link_seconds",
    "exec_latency",
    "trans_latency",
    "total_latency",
    "RequirementArrays",
    "stack_requirements",
    "latency_table",
]


class Location(IntEnum):
    """Where a subtask runs. Integer codes are also the class indices."""

    DEVICE = 0
    EDGE = 1
    CLOUD = 2


NUM_LOCATIONS = len(Location)


def _check_nonneg(name: str, values: Sequence[float]) -> None:
    for v in values:
        if not (math.isfinite(v) and v >= 0):
            raise ValueError(f"{name} entries must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class TaskProfile:
    """Per-subtask cycle counts and the data sizes flowing between them.

    ``data`` has one more entry than ``eps``: ``data[0]`` is the task input and
    ``data[-1]`` the task output.
    """

    eps: tuple[float, ...]
    data: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "eps", tuple(float(x) for x in self.eps))
        object.__setattr__(self, "data", tuple(float(x) for x in self.data))
        if not self.eps:
            raise ValueError("a task needs at least one subtask")
        if len(self.data) != len(self.eps) + 1:
            raise ValueError(
                f"expected {len(self.eps) + 1} data sizes for {len(self.eps)} subtasks, "
                f"got {len(self.data)}"
            )
        _check_nonneg("eps", self.eps)
        _check_nonneg("data", self.data)

    @property
    def num_subtasks(self) -> int:
        return len(self.eps)


@dataclass(frozen=True)
class Environment:
    """Compute rates (Hz) of device and edge, and the two link bandwidths (B/s)."""

    p1: float
    p2: float
    b1: float
    b2: float

    def __post_init__(self):
        for name in ("p1", "p2", "b1", "b2"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
            object.__setattr__(self, name, v)

    def scaled(self, c: float) -> "Environment":
        """Every rate multiplied by ``c``."""
        return Environment(self.p1 * c, self.p2 * c, self.b1 * c, self.b2 * c)


@dataclass(frozen=True)
class Requirement:
    task: TaskProfile
    env: Environment

    @property
    def num_subtasks(self) -> int:
        return self.task.num_subtasks

    @classmethod
    def from_values(cls, eps, data, p1, p2, b1, b2) -> "Requirement":
        return cls(TaskProfile(tuple(eps), tuple(data)), Environment(p1, p2, b1, b2))


@dataclass(frozen=True)
class Decision:
    """One location per subtask."""

    locs: tuple[Location, ...]

    def __post_init__(self):
        object.__setattr__(self, "locs", tuple(Location(int(x)) for x in self.locs))

    def __len__(self) -> int:
        return len(self.locs)

    def __iter__(self):
        return iter(self.locs)

    @property
    def codes(self) -> tuple[int, ...]:
        return tuple(int(x) for x in self.locs)

    @classmethod
    def uniform(cls, loc: Location, n: int) -> "Decision":
        return cls((loc,) * n)


def link_seconds(src: Location, dst: Location, nbytes: float, env: Environment) -> float:
    """Time to move ``nbytes`` from ``src`` to ``dst``; symmetric in the endpoints."""
    if src == dst:
        return 0.0
    pair = {int(src), int(dst)}
    if pair == {Location.DEVICE, Location.EDGE}:
        return nbytes / env.b1
    if pair == {Location.EDGE, Location.CLOUD}:
        return nbytes / env.b2
    return nbytes / env.b1 + nbytes / env.b2


def _check_lengths(req: Requirement, dec: Decision) -> None:
    if len(dec.locs) != req.num_subtasks:
        raise ValueError(
            f"decision has {len(dec.locs)} locations but the task has "
            f"{req.num_subtasks} subtasks"
        )


def _exec_one(eps: float, loc: Location, env: Environment) -> float:
    if loc == Location.DEVICE:
        return eps / env.p1
    if loc == Location.EDGE:
        return eps / env.p2
    return 0.0


def exec_latency(req: Requirement, dec: Decision) -> float:
    """Summed computation time; cloud compute is free."""
    _check_lengths(req, dec)
    total = 0.0
    for eps, loc in zip(req.task.eps, dec.locs):
        total += _exec_one(eps, loc, req.env)
    return total


def trans_latency(req: Requirement, dec: Decision) -> float:
    """Summed transfer time, including device ingress and egress."""
    _check_lengths(req, dec)
    path = (Location.DEVICE, *dec.locs, Location.DEVICE)
    total = 0.0
    for t, nbytes in enumerate(req.task.data):
        total += link_seconds(path[t], path[t + 1], nbytes, req.env)
    return total


def total_latency(req: Requirement, dec: Decision) -> float:
    return exec_latency(req, dec) + trans_latency(req, dec)


# -- batched evaluation -------------------------------------------------------


@dataclass(frozen=True)
class RequirementArrays:
    """Column view of many requirements with a common subtask count."""

    eps: np.ndarray  # (N, A)
    data: np.ndarray  # (N, A + 1)
    p1: np.ndarray  # (N,)
    p2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray

    def __len__(self) -> int:
        return self.eps.shape[0]

    def __getitem__(self, idx) -> "RequirementArrays":
        return RequirementArrays(
            self.eps[idx], self.data[idx], self.p1[idx], self.p2[idx], self.b1[idx], self.b2[idx]
        )


def stack_requirements(reqs: Iterable[Requirement]) -> RequirementArrays:
    reqs = list(reqs)
    if not reqs:
        raise ValueError("no requirements to stack")
    n = reqs[0].num_subtasks
    if any(r.num_subtasks != n for r in reqs):
        raise ValueError("requirements must share a subtask count")
    return RequirementArrays(
        eps=np.array([r.task.eps for r in reqs], dtype=np.float64),
        data=np.array([r.task.data for r in reqs], dtype=np.float64),
        p1=np.array([r.env.p1 for r in reqs]),
        p2=np.array([r.env.p2 for r in reqs]),
        b1=np.array([r.env.b1 for r in reqs]),
        b2=np.array([r.env.b2 for r in reqs]),
    )


def _link_costs(nbytes: np.ndarray, b1: np.ndarray, b2: np.ndarray) -> np.ndarray:
    """(N, 3, 3) transfer times indexed [src, dst]."""
    h1 = nbytes / b1
    h2 = nbytes / b2
    both = h1 + h2
    zero = np.zeros_like(h1)
    return np.stack(
        [
            np.stack([zero, h1, both], axis=-1),
            np.stack([h1, zero, h2], axis=-1),
            np.stack([both, h2, zero], axis=-1),
        ],
        axis=-2,
    )


def latency_table(
    arrays: RequirementArrays, decisions: np.ndarray, *, split: bool = False
):
    """Total latency of every decision for every requirement.

    ``decisions`` is a (K, A) integer array of location codes. Returns an (N, K)
    array. Accumulation order matches :func:`total_latency`, so entries are
    bitwise equal to the scalar path. With ``split=True`` returns the
    ``(exec, trans)`` pair instead of their sum.
    """
    decisions = np.asarray(decisions, dtype=np.intp)
    if decisions.ndim != 2 or decisions.shape[1] != arrays.eps.shape[1]:
        raise ValueError(
            f"decisions must have shape (K, {arrays.eps.shape[1]}), got {decisions.shape}"
        )
    n, a = arrays.eps.shape
    k = decisions.shape[0]
    rows = np.arange(n)[:, None]

    exec_total = np.zeros((n, k))
    zero = np.zeros(n)
    for t in range(a):
        # per-location compute time of subtask t
        costs = np.stack([arrays.eps[:, t] / arrays.p1, arrays.eps[:, t] / arrays.p2, zero], axis=1)
        exec_total += costs[rows, decisions[None, :, t]]

    device = np.full(k, int(Location.DEVICE), dtype=np.intp)
    path = np.column_stack([device, decisions, device])
    trans_total = np.zeros((n, k))
    for t in range(a + 1):
        links = _link_costs(arrays.data[:, t], arrays.b1, arrays.b2)
        trans_total += links[rows, path[None, :, t], path[None, :, t + 1]]

    if split:
        return exec_total, trans_total
    return exec_total + trans_total
