import math

import numpy as np
import pytest

from diflow import DistortionSpec, ForwardChannel, InputPolicy, InstanceSpec, PowerSpec, bsc
from diflow.oracles import _full_capacity, brute_force_capacity, brute_force_nrdf, simplex_grid

from conftest import hb

SPEC0 = InstanceSpec(0, (2,), (2,))


@pytest.mark.parametrize("k, m", [(1, 5), (2, 4), (3, 6), (4, 3)])
def test_simplex_grid(k, m):
    g = simplex_grid(k, m)
    assert len(g) == math.comb(m + k - 1, k - 1)
    np.testing.assert_allclose(g.sum(axis=1), 1.0, atol=1e-15)
    assert len({tuple(r) for r in g}) == len(g)
    assert np.all(g >= 0)


def test_bsc_capacity_on_grid():
    # uniform input lies on the grid, so the grid maximum is the true capacity
    assert brute_force_capacity(ForwardChannel.memoryless(SPEC0, bsc(0.1)), 64) == pytest.approx(0.5310, abs=2e-4)


@pytest.mark.parametrize("k, m", [(2, 2), (2, 64), (3, 6)])
def test_noiseless_channel(k, m):
    spec = InstanceSpec(0, (k,), (k,))
    assert brute_force_capacity(ForwardChannel.memoryless(spec, np.eye(k)), m) == pytest.approx(math.log2(k), abs=1e-12)


def test_blockwise_enumeration_matches_full_enumeration():
    rng = np.random.default_rng(4)
    spec = InstanceSpec(1, (2, 2), (2, 2))
    ch = ForwardChannel(spec, [rng.dirichlet([1, 1], size=2), rng.dirichlet([1, 1], size=(2, 2, 2))])
    loose = PowerSpec((np.zeros(2), np.zeros(2)), 1.0)
    assert brute_force_capacity(ch, 4) == pytest.approx(_full_capacity(ch, 4, loose), abs=1e-13)


def test_power_filtered_grid():
    # budget 0.2 allows P(x=1) <= 12.8/64, so 12/64 is the best grid point
    power = PowerSpec(([0.0, 1.0],), 0.2)
    p1 = 12 / 64
    expected = hb(p1 * 0.9 + (1 - p1) * 0.1) - hb(0.1)
    assert brute_force_capacity(ForwardChannel.memoryless(SPEC0, bsc(0.1)), 64, power) == pytest.approx(expected, abs=1e-12)


def test_nrdf_grid_value_at_m64():
    # rows (1-a, a), (b, 1-b) with a + b <= 12.8/64; the symmetric point a = b = 6/64 is the grid minimum
    src = InputPolicy.uniform(SPEC0)
    value = brute_force_nrdf(src, DistortionSpec.hamming(SPEC0, 0.1), m=64)
    assert value == pytest.approx(1 - hb(6 / 64), abs=1e-12)


def test_nrdf_grid_value_when_budget_is_on_grid():
    src = InputPolicy.uniform(SPEC0)
    assert brute_force_nrdf(src, DistortionSpec.hamming(SPEC0, 0.1), m=640) == pytest.approx(0.5310, abs=2e-4)


def test_oracle_size_cap():
    spec = InstanceSpec(1, (3, 3), (3, 3))
    with pytest.raises(ValueError, match="candidates"):
        brute_force_capacity(ForwardChannel.uniform(spec), 64)


def test_infeasible_grid_budget():
    with pytest.raises(ValueError):
        brute_force_nrdf(InputPolicy.uniform(SPEC0), DistortionSpec(([[0.5, 1.0], [1.0, 0.5]],), 0.1), m=8)
