"""Seeded random instances for the property suites.

Each trial gets its own generator derived from ``(seed, trial)`` so suites can be
split or reordered without changing any individual draw.
"""
from __future__ import annotations

import numpy as np

from .measures import ForwardChannel, InputPolicy, InstanceSpec
from .variational import ReverseDecomposition, _r_shape, _s_shape

VERTEX_PROB = 0.2
MAX_HORIZON = 2
MAX_ALPHABET = 3


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


def random_rows(rng: np.random.Generator, shape: tuple[int, ...], vertex_prob: float = VERTEX_PROB) -> np.ndarray:
    """Dirichlet(1) rows along the last axis; each row is a simplex vertex w.p. ``vertex_prob``."""
    k = shape[-1]
    n_rows = int(np.prod(shape[:-1], dtype=int))
    rows = rng.dirichlet(np.ones(k), size=n_rows)
    hit = rng.random(n_rows) < vertex_prob
    if hit.any():
        rows[hit] = np.eye(k)[rng.integers(0, k, size=int(hit.sum()))]
    return rows.reshape(shape)


def random_spec(rng: np.random.Generator, max_horizon: int = MAX_HORIZON, max_alphabet: int = MAX_ALPHABET) -> InstanceSpec:
    n = int(rng.integers(0, max_horizon + 1))
    xs = tuple(int(v) for v in rng.integers(1, max_alphabet + 1, size=n + 1))
    ys = tuple(int(v) for v in rng.integers(1, max_alphabet + 1, size=n + 1))
    return InstanceSpec(n, xs, ys)


def random_policy(rng: np.random.Generator, spec: InstanceSpec, vertex_prob: float = VERTEX_PROB) -> InputPolicy:
    return InputPolicy(spec, [random_rows(rng, spec.input_kernel_shape(i), vertex_prob) for i in range(spec.horizon + 1)])


def random_channel(rng: np.random.Generator, spec: InstanceSpec, vertex_prob: float = VERTEX_PROB) -> ForwardChannel:
    return ForwardChannel(spec, [random_rows(rng, spec.channel_kernel_shape(i), vertex_prob) for i in range(spec.horizon + 1)])


def random_source(rng: np.random.Generator, spec: InstanceSpec, vertex_prob: float = VERTEX_PROB) -> InputPolicy:
    """Policy whose kernels ignore past outputs, as a source for rate distortion."""
    kernels = []
    for i in range(spec.horizon + 1):
        shape = spec.input_kernel_shape(i)
        core = random_rows(rng, tuple(shape[0:-1:2]) + (shape[-1],), vertex_prob)
        kernels.append(np.broadcast_to(np.expand_dims(core, tuple(range(1, 2 * i, 2))), shape).copy())
    return InputPolicy(spec, kernels)


def random_nu(rng: np.random.Generator, spec: InstanceSpec, vertex_prob: float = 0.0) -> np.ndarray:
    """Random output pmf over ``Y^n`` (full support unless ``vertex_prob`` > 0)."""
    return random_rows(rng, (int(np.prod(spec.y_sizes)),), vertex_prob).reshape(spec.y_sizes)


def random_reverse_decomposition(
    rng: np.random.Generator, spec: InstanceSpec, vertex_prob: float = 0.0
) -> ReverseDecomposition:
    s = [random_rows(rng, _s_shape(spec, i), vertex_prob) for i in range(spec.horizon + 1)]
    r = [random_rows(rng, _r_shape(spec, i), vertex_prob) for i in range(spec.horizon + 1)]
    return ReverseDecomposition(spec, s, r)


def random_instance(seed: int, trial: int, spec: InstanceSpec | None = None):
    """``(rng, spec, policy, channel)`` for one trial; ``spec`` is drawn when not given."""
    rng = trial_rng(seed, trial)
    spec = random_spec(rng) if spec is None else spec
    return rng, spec, random_policy(rng, spec), random_channel(rng, spec)
