"""Shared fixtures and a deliberately naive reference implementation.

The reference code below walks every sequence with plain Python loops and
dictionaries and derives everything from joint entropies.  It shares nothing
with the vectorized package code except the kernel arrays themselves.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np
import pytest

from diflow import ForwardChannel, InputPolicy, InstanceSpec, bsc


def hb(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def naive_joint(policy: InputPolicy, channel: ForwardChannel) -> dict:
    """``{(x_0, y_0, ..., x_n, y_n): prob}`` built one sequence at a time."""
    spec = policy.spec
    ranges = []
    for i in range(spec.horizon + 1):
        ranges += [range(spec.x_sizes[i]), range(spec.y_sizes[i])]
    out = {}
    for seq in itertools.product(*ranges):
        prob = 1.0
        for i in range(spec.horizon + 1):
            prob *= float(policy.kernels[i][seq[: 2 * i + 1]])
            prob *= float(channel.kernels[i][seq[: 2 * i + 2]])
        out[seq] = prob
    return out


def entropy_of(joint: dict, positions) -> float:
    marg = defaultdict(float)
    for seq, pr in joint.items():
        marg[tuple(seq[k] for k in positions)] += pr
    return -sum(p * math.log2(p) for p in marg.values() if p > 0)


def _xs(i):
    return [2 * k for k in range(i + 1)]


def _ys(i):
    return [2 * k + 1 for k in range(i + 1)]


def naive_di_steps(joint: dict, n: int) -> list[float]:
    """``I(X^i; Y_i | Y^{i-1})`` for each ``i`` from joint entropies."""
    steps = []
    for i in range(n + 1):
        y_prev, x_i = _ys(i - 1), _xs(i)
        h = entropy_of
        val = (h(joint, y_prev + x_i) + h(joint, _ys(i)) - h(joint, y_prev) - h(joint, sorted(x_i + _ys(i))))
        steps.append(val)
    return steps


def naive_reverse_steps(joint: dict, n: int) -> list[float]:
    """``I(Y^{i-1}; X_i | X^{i-1})`` for each ``i``."""
    steps = []
    for i in range(n + 1):
        x_prev, y_prev = _xs(i - 1), _ys(i - 1)
        h = entropy_of
        val = (h(joint, sorted(x_prev + y_prev)) + h(joint, _xs(i)) - h(joint, x_prev)
               - h(joint, sorted(_xs(i) + y_prev)))
        steps.append(val)
    return steps


def naive_mi(joint: dict, n: int) -> float:
    h = entropy_of
    return h(joint, _xs(n)) + h(joint, _ys(n)) - h(joint, list(range(2 * n + 2)))


@pytest.fixture
def spec0():
    return InstanceSpec(0, (2,), (2,))


@pytest.fixture
def bsc01(spec0):
    return InputPolicy.uniform(spec0), ForwardChannel.memoryless(spec0, bsc(0.1))


def memory_channel() -> ForwardChannel:
    """Binary n=1 channel whose second use depends on whether the first was received correctly."""
    spec = InstanceSpec(1, (2, 2), (2, 2))
    q1 = np.zeros((2, 2, 2, 2))
    for x0 in range(2):
        for y0 in range(2):
            e = 0.05 + 0.3 * (y0 != x0)
            q1[x0, y0] = [[1 - e, e], [0.25 + e, 0.75 - e]]
    return ForwardChannel(spec, [np.array([[0.9, 0.1], [0.3, 0.7]]), q1])


# ---------------------------------------------------------------- acceptance summary

def pytest_configure(config):
    config.diflow_acceptance = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "diflow_acceptance", {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
