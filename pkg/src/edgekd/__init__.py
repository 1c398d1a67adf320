"""Computation offloading across device, edge and cloud.

Exhaustive-search oracle labels, imitation-trained policy networks, and
temperature-softened distillation into a small student network.
"""

from .model import Decision, Environment, Location, Requirement, TaskProfile, total_latency
from .solvers import solve_exhaustive, solve_greedy
from .workload import DistributionSpec, generate_dataset, load_dataset, preset, save_dataset

__version__ = "0.1.0"

__all__ = [
    "Decision",
    "Environment",
    "Location",
    "Requirement",
    "TaskProfile",
    "total_latency",
    "solve_exhaustive",
    "solve_greedy",
    "DistributionSpec",
    "generate_dataset",
    "load_dataset",
    "save_dataset",
    "preset",
]
