import math

import numpy as np
import pytest

from diflow import (
    DistortionSpec,
    ForwardChannel,
    InfeasibleConstraint,
    InputPolicy,
    InstanceSpec,
    InvalidInstance,
    PowerSpec,
    SolverConfig,
    bsc,
    compose_joint,
    directed_information,
    feedback_capacity,
    multistart_capacity,
    nrdf,
)
from diflow.extremum import minimum_distortion

from conftest import hb, memory_channel

SPEC0 = InstanceSpec(0, (2,), (2,))


def z_channel_capacity(p: float) -> float:
    # input 1 flips to 0 with probability p; closed form of the maximized mutual information
    return math.log2(1 + (1 - p) * p ** (p / (1 - p)))


# ---------------------------------------------------------------- capacity

def test_bsc_capacity_closed_form():
    res = feedback_capacity(ForwardChannel.memoryless(SPEC0, bsc(0.1)))
    assert res.value_bits == pytest.approx(1 - hb(0.1), abs=1e-6)
    assert res.converged


@pytest.mark.parametrize("p", [0.1, 0.3, 0.5])
def test_z_channel_capacity(p):
    ch = ForwardChannel.memoryless(SPEC0, [[1.0, 0.0], [p, 1 - p]])
    res = feedback_capacity(ch, SolverConfig(rel_tol=1e-12))
    assert res.value_bits == pytest.approx(z_channel_capacity(p), abs=1e-6)
    assert res.upper_bound_bits >= res.value_bits - 1e-12
    assert res.upper_bound_bits - res.value_bits < 1e-5


def test_memoryless_block_capacity_is_per_letter():
    # feedback does not raise the capacity of a memoryless channel
    spec = InstanceSpec(1, (2, 2), (2, 2))
    ch = ForwardChannel.memoryless(spec, [[1.0, 0.0], [0.3, 0.7]])
    res = feedback_capacity(ch, SolverConfig(rel_tol=1e-12))
    assert res.value_bits == pytest.approx(z_channel_capacity(0.3), abs=1e-6)


def test_capacity_trace_is_monotone():
    res = feedback_capacity(memory_channel(), SolverConfig(max_iters=300))
    assert all(b >= a - 1e-12 for a, b in zip(res.trace, res.trace[1:]))
    assert res.value_bits == pytest.approx(res.trace[-1] / 2, abs=1e-15)
    assert directed_information(res.argument, memory_channel()) / 2 == pytest.approx(res.value_bits, abs=1e-12)


def test_capacity_nonconvergence_is_reported():
    res = feedback_capacity(memory_channel(), SolverConfig(max_iters=2))
    assert not res.converged and res.iterations == 2
    value, argument, trace = res
    assert len(trace) == 3 and isinstance(argument, InputPolicy)


def test_power_constrained_bsc():
    power = PowerSpec(([0.0, 1.0],), 0.2)
    res = feedback_capacity(ForwardChannel.memoryless(SPEC0, bsc(0.1)), power=power)
    # best input puts mass 0.2 on the costly symbol: P(Y=1) = 0.2*0.9 + 0.8*0.1
    assert res.value_bits == pytest.approx(hb(0.26) - hb(0.1), abs=1e-6)
    assert res.constraint_value == pytest.approx(0.2, abs=1e-8)


def test_power_budget_slack_when_not_binding():
    power = PowerSpec(([0.0, 1.0],), 0.9)
    res = feedback_capacity(ForwardChannel.memoryless(SPEC0, bsc(0.1)), power=power)
    assert res.value_bits == pytest.approx(1 - hb(0.1), abs=1e-6)


def test_power_infeasible():
    with pytest.raises(InfeasibleConstraint):
        feedback_capacity(ForwardChannel.memoryless(SPEC0, bsc(0.1)), power=PowerSpec(([1.0, 2.0],), 0.5))


def test_multistart_is_seeded():
    ch = ForwardChannel.memoryless(SPEC0, [[0.9, 0.1], [0.3, 0.7]])
    a = multistart_capacity(ch, SolverConfig(seed=3), starts=4)
    b = multistart_capacity(ch, SolverConfig(seed=3), starts=4)
    assert [r.value_bits for r in a] == [r.value_bits for r in b]
    values = [r.value_bits for r in a]
    assert max(values) - min(values) < 1e-6


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)
    with pytest.raises(ValueError):
        SolverConfig(rel_tol=0.0)


# ---------------------------------------------------------------- rate distortion

@pytest.mark.parametrize("d", [0.0, 0.1, 0.25, 0.5])
def test_binary_nrdf_closed_form(d):
    src = InputPolicy.uniform(SPEC0)
    res = nrdf(src, DistortionSpec.hamming(SPEC0, d))
    assert res.value_bits == pytest.approx(max(0.0, 1 - hb(d)), abs=1e-6)
    assert res.constraint_value <= d + 1e-8


def test_biased_source_rdf():
    src = InputPolicy(SPEC0, [[0.3, 0.7]])
    res = nrdf(src, DistortionSpec.hamming(SPEC0, 0.1), SolverConfig(rel_tol=1e-12))
    assert res.value_bits == pytest.approx(hb(0.3) - hb(0.1), abs=1e-6)


def test_iid_source_over_two_steps():
    spec = InstanceSpec(1, (2, 2), (2, 2))
    res = nrdf(InputPolicy.uniform(spec), DistortionSpec.hamming(spec, 0.1))
    assert res.value_bits == pytest.approx(1 - hb(0.1), abs=1e-6)
    j = compose_joint(InputPolicy.uniform(spec), res.argument).table
    assert res.constraint_value == pytest.approx((j[0, 1].sum() + j[1, 0].sum() + j[:, :, 0, 1].sum() + j[:, :, 1, 0].sum()) / 2, abs=1e-12)


def test_nrdf_trace_is_monotone():
    rng = np.random.default_rng(0)
    spec = InstanceSpec(0, (3,), (3,))
    src = InputPolicy(spec, [rng.dirichlet(np.ones(3))])
    res = nrdf(src, DistortionSpec.hamming(spec, 0.2))
    assert all(b <= a + 1e-12 for a, b in zip(res.trace, res.trace[1:]))


def test_nrdf_infeasible_budget():
    dist = DistortionSpec(([[0.5, 1.0], [1.0, 0.5]],), 0.1)
    assert minimum_distortion(InputPolicy.uniform(SPEC0), dist) == pytest.approx(0.5)
    with pytest.raises(InfeasibleConstraint):
        nrdf(InputPolicy.uniform(SPEC0), dist)


def test_nrdf_rejects_feedback_source():
    spec = InstanceSpec(1, (2, 2), (2, 2))
    p1 = np.zeros((2, 2, 2))
    p1[:, 0, 0] = p1[:, 1, 1] = 1.0
    with pytest.raises(InvalidInstance):
        nrdf(InputPolicy(spec, [[0.5, 0.5], p1]), DistortionSpec.hamming(spec, 0.1))


def test_distortion_spec_validation():
    with pytest.raises(InvalidInstance):
        DistortionSpec(([[0.0, -1.0], [1.0, 0.0]],), 0.1)
    with pytest.raises(InvalidInstance):
        DistortionSpec.hamming(SPEC0, -0.1)
