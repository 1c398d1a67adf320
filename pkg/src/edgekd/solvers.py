"""Offloading policies that need no training: the exhaustive oracle and baselines."""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .model import (
    NUM_LOCATIONS,
    Decision,
    Location,
    Requirement,
    RequirementArrays,
    _exec_one,
    latency_table,
    link_seconds,
    stack_requirements,
)

__all__ = [
    "MAX_EXHAUSTIVE_SUBTASKS",
    "InstanceTooLarge",
    "Policy",
    "all_decisions",
    "solve_exhaustive",
    "solve_exhaustive_batch",
    "solve_greedy",
    "exhaustive_policy",
    "greedy_policy",
    "fixed_policy",
    "random_policy",
]

MAX_EXHAUSTIVE_SUBTASKS = 12


class InstanceTooLarge(ValueError):
    """Raised when the decision space is too big to enumerate."""


class Policy:
    """A named decision procedure ``Requirement -> Decision``.

    ``decide_many`` may be overridden with a vectorised version; the default
    just loops.
    """

    def __init__(self, name: str, fn: Callable[[Requirement], Decision]):
        self.name = name
        self._fn = fn

    def __call__(self, req: Requirement) -> Decision:
        return self._fn(req)

    def decide_many(self, reqs: Sequence[Requirement]) -> np.ndarray:
        """Location codes, shape (N, A)."""
        return np.array([self(r).codes for r in reqs], dtype=np.int64)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


@lru_cache(maxsize=None)
def all_decisions(num_subtasks: int) -> np.ndarray:
    """Every placement vector in lexicographic order (Device < Edge < Cloud).

    Row 0 is all-Device, the last row all-Cloud. Read-only, shape (3**A, A).
    """
    if num_subtasks > MAX_EXHAUSTIVE_SUBTASKS:
        raise InstanceTooLarge(
            f"instance too large: {num_subtasks} subtasks exceeds the exhaustive "
            f"limit of {MAX_EXHAUSTIVE_SUBTASKS} ({NUM_LOCATIONS}**{num_subtasks} decisions)"
        )
    out = np.array(
        list(itertools.product(range(NUM_LOCATIONS), repeat=num_subtasks)), dtype=np.intp
    )
    out.setflags(write=False)
    return out


def solve_exhaustive_batch(
    arrays: RequirementArrays, chunk: int = 2048
) -> tuple[np.ndarray, np.ndarray]:
    """Optimal codes (N, A) and optimal latencies (N,) for many requirements."""
    cands = all_decisions(arrays.eps.shape[1])
    n = len(arrays)
    best = np.empty((n, cands.shape[1]), dtype=np.int64)
    best_lat = np.empty(n)
    for start in range(0, n, chunk):
        part = arrays[start : start + chunk]
        table = latency_table(part, cands)
        # argmin returns the first minimum, i.e. the lexicographically smallest
        idx = np.argmin(table, axis=1)
        best[start : start + chunk] = cands[idx]
        best_lat[start : start + chunk] = table[np.arange(len(part)), idx]
    return best, best_lat


def solve_exhaustive(req: Requirement) -> tuple[Decision, float]:
    """Globally optimal decision and its latency; ties go to the smallest decision.

    Plain enumeration of all 3**A placements. Per-subtask compute and link
    times are tabulated once and summed in the same order as
    :func:`total_latency`, so the returned latency is bitwise equal to it.
    """
    a = req.num_subtasks
    all_decisions(a)  # size guard
    env = req.env
    exec_cost = [[_exec_one(e, loc, env) for loc in Location] for e in req.task.eps]
    link_cost = [
        [[link_seconds(src, dst, nbytes, env) for dst in Location] for src in Location]
        for nbytes in req.task.data
    ]
    device = int(Location.DEVICE)
    best, best_lat = None, None
    for cand in itertools.product(range(NUM_LOCATIONS), repeat=a):
        ex = 0.0
        for t in range(a):
            ex += exec_cost[t][cand[t]]
        tr = 0.0
        prev = device
        for t in range(a):
            tr += link_cost[t][prev][cand[t]]
            prev = cand[t]
        tr += link_cost[a][prev][device]
        lat = ex + tr
        if best_lat is None or lat < best_lat:
            best, best_lat = cand, lat
    return Decision(best), best_lat


def solve_greedy(req: Requirement) -> Decision:
    """Place subtasks one at a time, each minimising its own transfer-in plus compute.

    The last subtask also pays for returning the output to the device, since
    that cost is fully known once its location is chosen.
    """
    env = req.env
    eps, data = req.task.eps, req.task.data
    last = len(eps) - 1
    prev = Location.DEVICE
    locs = []
    for t in range(len(eps)):
        best_loc, best_cost = None, None
        for loc in Location:
            cost = link_seconds(prev, loc, data[t], env) + _exec_one(eps[t], loc, env)
            if t == last:
                cost += link_seconds(loc, Location.DEVICE, data[t + 1], env)
            if best_cost is None or cost < best_cost:
                best_loc, best_cost = loc, cost
        locs.append(best_loc)
        prev = best_loc
    return Decision(tuple(locs))


class _ExhaustivePolicy(Policy):
    def __init__(self):
        super().__init__("Optimal", lambda req: solve_exhaustive(req)[0])

    def decide_many(self, reqs):
        return solve_exhaustive_batch(stack_requirements(reqs))[0]


class _FixedPolicy(Policy):
    def __init__(self, loc: Location):
        self.loc = Location(loc)
        name = {Location.DEVICE: "Local", Location.EDGE: "Edge", Location.CLOUD: "Cloud"}[self.loc]
        super().__init__(name, lambda req: Decision.uniform(self.loc, req.num_subtasks))

    def decide_many(self, reqs):
        return np.full((len(reqs), reqs[0].num_subtasks), int(self.loc), dtype=np.int64)


class _RandomPolicy(Policy):
    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)
        super().__init__("Random", self._draw)

    def _draw(self, req: Requirement) -> Decision:
        return Decision(self.rng.integers(0, NUM_LOCATIONS, size=req.num_subtasks))


def exhaustive_policy() -> Policy:
    return _ExhaustivePolicy()


def greedy_policy() -> Policy:
    return Policy("Greedy", solve_greedy)


def fixed_policy(loc: Location) -> Policy:
    """Constant policy placing every subtask at ``loc``."""
    return _FixedPolicy(loc)


def random_policy(seed) -> Policy:
    """Uniform i.i.d. placement per subtask from a seeded generator it owns."""
    return _RandomPolicy(seed)
