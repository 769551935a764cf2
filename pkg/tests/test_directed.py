import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diflow import (
    ForwardChannel,
    InputPolicy,
    InstanceSpec,
    JointMeasure,
    bsc,
    compose_joint,
    di_abs,
    di_cmi_sum,
    di_divergence,
    di_logratio,
    di_partition_sup,
    di_reverse,
    directed_information,
    mutual_information,
)
from diflow.directed import ABS_SLACK
from diflow.sampling import random_channel, random_policy, random_spec, trial_rng

from conftest import hb, naive_di_steps, naive_joint, naive_mi, naive_reverse_steps

ROUTES = (di_cmi_sum, di_divergence, di_logratio)
SPEC0 = InstanceSpec(0, (2,), (2,))


def _uniform_bsc(eps, spec=SPEC0):
    return InputPolicy.uniform(spec), ForwardChannel.memoryless(spec, bsc(eps))


@pytest.mark.parametrize("route", ROUTES)
@pytest.mark.parametrize(
    "eps, expected",
    [(0.0, 1.0), (0.5, 0.0), (0.1, 1 - hb(0.1))],
)
def test_routes_on_bsc(route, eps, expected):
    rep = route(*_uniform_bsc(eps))
    assert rep.total_bits == pytest.approx(expected, abs=1e-10)
    assert rep.per_step_bits[0] == pytest.approx(expected, abs=1e-10)


def test_bsc_value_is_the_frozen_number():
    # 1 - H_b(0.1), evaluated independently
    assert di_cmi_sum(*_uniform_bsc(0.1)).total_bits == pytest.approx(0.5310044064107188, abs=1e-12)


@pytest.mark.parametrize("route", ROUTES)
def test_input_blind_channel_carries_nothing(route):
    rng = np.random.default_rng(3)
    spec = InstanceSpec(2, (2, 3, 2), (3, 2, 2))
    kernels = []
    for i in range(3):
        # rows depend on past outputs only: insert singleton axes at every x position
        core = rng.dirichlet(np.ones(spec.y_sizes[i]), size=spec.y_sizes[:i])
        kernels.append(np.broadcast_to(np.expand_dims(core, tuple(range(0, 2 * i + 1, 2))), spec.channel_kernel_shape(i)))
    q = ForwardChannel(spec, kernels)
    rep = route(random_policy(rng, spec), q)
    assert rep.total_bits == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_routes_match_entropy_reference(seed):
    rng = trial_rng(seed, 3)
    spec = random_spec(rng)
    p, q = random_policy(rng, spec), random_channel(rng, spec)
    ref = naive_di_steps(naive_joint(p, q), spec.horizon)
    for route in ROUTES:
        rep = route(p, q)
        np.testing.assert_allclose(rep.per_step_bits, ref, atol=1e-10)
        assert rep.total_bits == pytest.approx(math.fsum(rep.per_step_bits), abs=1e-10)
        assert rep.total_bits >= -1e-12
    assert directed_information(p, q) == pytest.approx(sum(ref), abs=1e-10)


def test_report_json_shape():
    d = di_logratio(*_uniform_bsc(0.1)).to_dict()
    assert set(d) == {"total_bits", "per_step_bits", "route"}
    assert d["route"] == "logratio"


def test_spec_mismatch_rejected():
    p = InputPolicy.uniform(SPEC0)
    q = ForwardChannel.uniform(InstanceSpec(0, (2,), (3,)))
    with pytest.raises(ValueError):
        di_cmi_sum(p, q)


# ---------------------------------------------------------------- reverse and mutual information

def test_reverse_zero_without_feedback():
    rng = np.random.default_rng(8)
    spec = InstanceSpec(2, (2, 2, 2), (2, 2, 2))
    p = InputPolicy.iid(spec, [0.3, 0.7])
    assert di_reverse(p, random_channel(rng, spec)).total_bits == pytest.approx(0.0, abs=1e-12)


def test_reverse_zero_at_n0():
    rng = np.random.default_rng(9)
    spec = InstanceSpec(0, (3,), (2,))
    assert di_reverse(random_policy(rng, spec), random_channel(rng, spec)).total_bits == 0.0


def _copy_feedback(eps):
    """p_0 uniform, x_1 := y_0, memoryless BSC(eps)."""
    spec = InstanceSpec(1, (2, 2), (2, 2))
    p1 = np.zeros((2, 2, 2))
    p1[:, 0, 0] = p1[:, 1, 1] = 1.0
    return InputPolicy(spec, [[0.5, 0.5], p1]), ForwardChannel.memoryless(spec, bsc(eps))


@pytest.mark.parametrize("eps, expected", [(0.0, 0.0), (0.5, 1.0)])
def test_reverse_copy_feedback(eps, expected):
    # noiseless: y_0 = x_0 so the copy adds nothing beyond x_0; pure noise: x_1 is a fresh fair bit
    p, q = _copy_feedback(eps)
    rep = di_reverse(p, q)
    ref = naive_reverse_steps(naive_joint(p, q), 1)
    assert sum(ref) == pytest.approx(expected, abs=1e-12)
    assert rep.total_bits == pytest.approx(expected, abs=1e-12)
    np.testing.assert_allclose(rep.per_step_bits, ref, atol=1e-12)


def test_mutual_information_examples():
    prod = JointMeasure(SPEC0, np.outer([0.3, 0.7], [0.6, 0.4]))
    assert mutual_information(prod) == pytest.approx(0.0, abs=1e-15)
    copy = JointMeasure(SPEC0, [[0.5, 0.0], [0.0, 0.5]])
    assert mutual_information(copy) == pytest.approx(1.0, abs=1e-15)
    rng = np.random.default_rng(10)
    t = rng.dirichlet(np.ones(4)).reshape(2, 2)
    double_sum = sum(
        t[a, b] * math.log2(t[a, b] / (t[a].sum() * t[:, b].sum())) for a in range(2) for b in range(2)
    )
    assert mutual_information(JointMeasure(SPEC0, t)) == pytest.approx(double_sum, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_conservation_against_entropy_reference(seed):
    rng = trial_rng(seed, 4)
    spec = random_spec(rng)
    p, q = random_policy(rng, spec), random_channel(rng, spec)
    joint = naive_joint(p, q)
    mi = mutual_information(compose_joint(p, q))
    assert mi == pytest.approx(naive_mi(joint, spec.horizon), abs=1e-10)
    np.testing.assert_allclose(di_reverse(p, q).per_step_bits, naive_reverse_steps(joint, spec.horizon), atol=1e-10)
    assert mi == pytest.approx(di_cmi_sum(p, q).total_bits + di_reverse(p, q).total_bits, abs=1e-10)


# ---------------------------------------------------------------- absolute version

def test_abs_examples():
    p, q = _uniform_bsc(0.1)
    hand = 0.9 * math.log2(1.8) + 0.1 * abs(math.log2(0.2))
    assert di_abs(p, q) == pytest.approx(hand, abs=1e-12)
    assert di_abs(p, q) == pytest.approx(0.99539, abs=1e-5)
    assert di_abs(*_uniform_bsc(0.5)) == 0.0


def test_abs_slack_constant():
    assert ABS_SLACK == 2 / (math.e * math.log(2))
    assert ABS_SLACK == pytest.approx(1.0615, abs=1e-4)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_sandwich(seed):
    rng = trial_rng(seed, 5)
    spec = random_spec(rng)
    p, q = random_policy(rng, spec), random_channel(rng, spec)
    d, a = directed_information(p, q), di_abs(p, q)
    assert d - 1e-12 <= a <= d + ABS_SLACK + 1e-10


# ---------------------------------------------------------------- partitions

def test_partition_examples():
    rng = np.random.default_rng(11)
    spec = InstanceSpec(1, (2, 2), (2, 2))
    p, q = random_policy(rng, spec), random_channel(rng, spec)
    cells = spec.cells
    assert di_partition_sup(p, q, [list(range(cells))]) == pytest.approx(0.0, abs=1e-15)
    finest = di_partition_sup(p, q, [[c] for c in range(cells)])
    assert finest == pytest.approx(di_divergence(p, q).total_bits, abs=1e-10)


def test_partition_refinement_monotone_exhaustive():
    # every two-block split of an n=0 instance, and each block split once more
    rng = np.random.default_rng(12)
    spec = InstanceSpec(0, (2,), (3,))
    p, q = random_policy(rng, spec, vertex_prob=0.0), random_channel(rng, spec, vertex_prob=0.0)
    cells = list(range(spec.cells))
    top = di_divergence(p, q).total_bits
    for r in range(1, len(cells)):
        for a in itertools.combinations(cells, r):
            b = [c for c in cells if c not in a]
            coarse = di_partition_sup(p, q, [list(a), b])
            assert coarse <= top + 1e-12
            finer = di_partition_sup(p, q, [[c] for c in a] + [b])
            assert coarse <= finer + 1e-12


def test_partition_validation():
    p, q = _uniform_bsc(0.1)
    with pytest.raises(ValueError, match="overlap"):
        di_partition_sup(p, q, [[0, 1], [1, 2, 3]])
    with pytest.raises(ValueError, match="cover"):
        di_partition_sup(p, q, [[0, 1], [2]])
    with pytest.raises(ValueError, match="range"):
        di_partition_sup(p, q, [[0, 1, 2, 3, 4]])
