import itertools

import numpy as np
import pytest

from edgekd.model import Requirement


def ref_latency(eps, data, p1, p2, b1, b2, locs):
    """Brute-force latency, written independently of edgekd.model.

    Tiers sit on a line Device(0) - Edge(1) - Cloud(2); a transfer walks every
    hop between its endpoints, hop 0-1 at b1 and hop 1-2 at b2.
    """
    rate = {0: p1, 1: p2}
    compute = sum(e / rate[l] for e, l in zip(eps, locs) if l != 2)
    route = [0, *locs, 0]
    comm = 0.0
    for t, d in enumerate(data):
        a, b = sorted((route[t], route[t + 1]))
        for hop in range(a, b):
            comm += d / (b1 if hop == 0 else b2)
    return compute, comm


def ref_optimum(eps, data, p1, p2, b1, b2):
    """(min latency, set of argmin decisions) by enumeration."""
    costs = {}
    for locs in itertools.product(range(3), repeat=len(eps)):
        c, m = ref_latency(eps, data, p1, p2, b1, b2, locs)
        costs[locs] = c + m
    best = min(costs.values())
    return best, {k for k, v in costs.items() if v == best}


W1_ARGS = dict(eps=[200e6, 400e6], data=[2e6, 4e6, 1e6], p1=100e6, p2=1000e6, b1=1e6, b2=2e6)


@pytest.fixture
def w1():
    return Requirement.from_values(**W1_ARGS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# pass/fail lines from the acceptance suite, echoed once at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
