import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diflow import (
    ForwardChannel,
    InputPolicy,
    InstanceSpec,
    bsc,
    compose_joint,
    di_abs,
    directed_information,
    expand_forward,
)
from diflow.properties import (
    SUITES,
    _supported_rows_differ,
    _Tally,
    channel_path,
    check_composition_continuity,
    check_sandwich_bound,
    entropy_continuity_bound,
    logsum_equality,
    mix_channels,
    mix_kernelwise,
    mix_policies,
    path_deviations,
    run_all,
)
from diflow.sampling import random_channel, random_policy, random_source, trial_rng

from conftest import hb

SPEC0 = InstanceSpec(0, (2,), (2,))
B1 = InstanceSpec(1, (2, 2), (2, 2))


def _bsc(eps, spec=SPEC0):
    return ForwardChannel.memoryless(spec, bsc(eps))


# ---------------------------------------------------------------- convexity family

def test_convexity_bsc_pair():
    p = InputPolicy.uniform(SPEC0)
    mixed = directed_information(p, mix_channels(_bsc(0.05), _bsc(0.45), 0.5))
    avg = 0.5 * (1 - hb(0.05)) + 0.5 * (1 - hb(0.45))
    assert mixed == pytest.approx(1 - hb(0.25), abs=1e-12)
    assert mixed == pytest.approx(0.18872, abs=1e-5)
    assert avg == pytest.approx(0.36041, abs=1e-5)
    # strict gap for this pair
    assert avg - mixed == pytest.approx(0.17169, abs=1e-5)


def test_mixing_identical_channels_is_neutral():
    rng = np.random.default_rng(0)
    p, q = random_policy(rng, B1), random_channel(rng, B1)
    assert directed_information(p, mix_channels(q, q, 0.37)) == pytest.approx(directed_information(p, q), abs=1e-12)
    assert not _supported_rows_differ(p, expand_forward(q), expand_forward(q), 0.37)


def test_concavity_example():
    q = _bsc(0.1)
    p1, p2 = InputPolicy(SPEC0, [[0.5, 0.5]]), InputPolicy(SPEC0, [[0.9, 0.1]])
    mixed = mix_policies(p1, p2, 0.5)
    np.testing.assert_allclose(mixed.kernels[0], [0.7, 0.3], atol=1e-15)

    def mi(a):
        y1 = a * 0.1 + (1 - a) * 0.9
        return hb(y1) - hb(0.1)

    assert directed_information(mixed, q) == pytest.approx(mi(0.7), abs=1e-12)
    assert mi(0.7) >= 0.5 * (mi(0.5) + mi(0.9))
    assert directed_information(mix_policies(p1, p1, 0.3), q) == pytest.approx(directed_information(p1, q), abs=1e-12)


def test_kernelwise_mixing_differs_from_table_mixing():
    rng = np.random.default_rng(1)
    q1, q2 = random_channel(rng, B1, 0.0), random_channel(rng, B1, 0.0)
    table = expand_forward(mix_channels(q1, q2, 0.5)).values
    kernel = expand_forward(mix_kernelwise(q1, q2, 0.5)).values
    assert np.max(np.abs(table - kernel)) > 1e-3
    # at n=0 the two coincide
    a, b = random_channel(rng, SPEC0), random_channel(rng, SPEC0)
    np.testing.assert_allclose(
        expand_forward(mix_channels(a, b, 0.3)).values, expand_forward(mix_kernelwise(a, b, 0.3)).values, atol=1e-15
    )


def test_strict_convexity_fails_for_deterministic_input():
    # all channels give zero directed information when the input is a point mass
    p = InputPolicy(SPEC0, [[1.0, 0.0]])
    q1, q2 = _bsc(0.1), _bsc(0.4)
    assert _supported_rows_differ(p, expand_forward(q1), expand_forward(q2), 0.5)
    gap = 0.5 * directed_information(p, q1) + 0.5 * directed_information(p, q2) - directed_information(
        p, mix_channels(q1, q2, 0.5)
    )
    assert gap == 0.0
    assert logsum_equality(p, q1, q2)


def test_logsum_equality_is_false_for_bsc_pair():
    assert not logsum_equality(InputPolicy.uniform(SPEC0), _bsc(0.05), _bsc(0.45))


def test_strict_suite_records_classification():
    rep = SUITES["strict_convexity_in_Q"][0](None, 60, 0)
    ex = rep.extras
    assert ex["sampled"] == 60 and ex["eligible"] == rep.trials
    assert ex["failures_with_logsum_equality"] <= ex["strict_failures"] <= ex["eligible"]


# ---------------------------------------------------------------- limits along paths

def test_constant_path_has_zero_modulus():
    rng = np.random.default_rng(2)
    p = random_policy(rng, B1)
    u = ForwardChannel.uniform(B1)
    for a in (2, 16, 1024):
        assert path_deviations(p, u, a) == (0.0, 0.0, 0.0)
        assert directed_information(p, channel_path(u, a)) == pytest.approx(0.0, abs=1e-15)


def test_noiseless_path_approaches_one_bit():
    p = InputPolicy.uniform(SPEC0)
    values = []
    for a in (2, 4, 8, 64, 1024):
        v = directed_information(p, channel_path(_bsc(0.0), a))
        # mixing with the uniform channel at weight 1/a is a BSC with crossover 1/(2a)
        assert v == pytest.approx(1 - hb(1 / (2 * a)), abs=1e-12)
        values.append(v)
    assert all(b > a for a, b in zip(values, values[1:]))
    assert 1 - values[-1] < 0.01


def test_path_deviation_is_linear():
    rng = np.random.default_rng(3)
    p, q0 = random_policy(rng, B1), random_channel(rng, B1)
    full = np.max(np.abs(compose_joint(p, ForwardChannel.uniform(B1)).table - compose_joint(p, q0).table))
    for a in (2, 8, 512):
        assert path_deviations(p, q0, a)[0] == pytest.approx(full / a, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 6), st.floats(0.0, 1.0))
def test_entropy_continuity_bound(seed, k, t):
    rng = np.random.default_rng(seed)
    a = rng.dirichlet(np.ones(k))
    b = (1 - t) * a + t * rng.dirichlet(np.ones(k))

    def h(v):
        v = v[v > 0]
        return float(-(v * np.log2(v)).sum())

    tv = 0.5 * float(np.abs(a - b).sum())
    assert abs(h(a) - h(b)) <= entropy_continuity_bound(tv, k) + 1e-12


# ---------------------------------------------------------------- bounds and reports

def test_sandwich_examples():
    p = InputPolicy.uniform(SPEC0)
    assert di_abs(p, _bsc(0.5)) == 0.0
    d, a = directed_information(p, _bsc(0.1)), di_abs(p, _bsc(0.1))
    assert d == pytest.approx(0.53100, abs=1e-5) and a == pytest.approx(0.99539, abs=1e-5)
    assert d + 2 / (math.e * math.log(2)) == pytest.approx(1.5925, abs=1e-4)


def test_violation_threshold():
    t = _Tally("x", 0)
    t.add(-5e-10)
    t.add(-2e-9)
    t.add(0.3)
    rep = t.report()
    assert rep.trials == 3 and rep.violations == 1 and rep.worst_margin == -2e-9


def test_reports_reproduce_bit_exactly():
    a = [r.to_dict() for r in run_all(trials=15, seed=42)]
    b = [r.to_dict() for r in run_all(trials=15, seed=42)]
    assert a == b
    assert [r["property_name"] for r in a] == list(SUITES)


def test_fixed_spec_suites_are_clean():
    for rep in run_all(spec=B1, trials=20, seed=9):
        assert rep.violations == 0, rep
        assert rep.trials > 0 or rep.property_name == "strict_convexity_in_Q"


def test_composition_suite_constant():
    rep = check_composition_continuity(None, 30, 1)
    assert rep.violations == 0 and rep.worst_margin >= 0
    assert 0 < rep.extras["max_constant"] <= 2


def test_sandwich_suite_uses_slack():
    rep = check_sandwich_bound(None, 50, 2)
    assert rep.violations == 0 and rep.worst_margin >= 0


def test_unknown_suite_rejected():
    with pytest.raises(KeyError):
        run_all(trials=1, names=["nope"])


def test_random_source_ignores_outputs():
    rng = trial_rng(5, 0)
    spec = InstanceSpec(2, (2, 3, 2), (3, 2, 2))
    assert random_source(rng, spec).ignores_outputs(tol=0.0)
    assert math.isclose(float(random_source(rng, spec).kernels[2].sum()), np.prod(spec.input_kernel_shape(2)[:-1]))
