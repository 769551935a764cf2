"""Alternating solvers for feedback capacity and nonanticipative rate distortion.

Both solvers alternate a closed-form inner step with an exact coordinate step
over the whole causally conditioned kernel family.  The coordinate step is a
single backward pass over the interleaved sequence: at positions the optimizer
controls, the value is a base-2 log-sum-exp (the kernel is the matching
softmax); at positions it does not control, the value is averaged under the
fixed kernel.

Capacity: given the current policy, the posterior ``W(x^n | y^n)`` of the
optimal reverse decomposition is formed, then the policy maximizing
``E log2 W(x^n|y^n) / P(x^n||y^{n-1})`` is found.  Each outer iteration cannot
decrease directed information.

Rate distortion: given the current channel, the output conditionals
``nu_{i|i-1}`` are formed, then the channel minimizing
``E sum_i log2 q_i / nu_{i|i-1} + s * distortion`` is found, with ``s`` bisected so
the distortion budget is met.  Each outer iteration cannot increase directed
information.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .directed import directed_information
from .measures import (
    ForwardChannel,
    InputPolicy,
    InstanceSpec,
    InvalidInstance,
    compose_joint,
    conditional_marginals,
    expand_causal,
    expand_forward,
    factorize,
    mix_conditional,
)
from .variational import optimal_reverse_decomposition

log = logging.getLogger(__name__)

S_MAX = 64.0
BISECTION_STEPS = 80


class InfeasibleConstraint(ValueError):
    """The budget lies below the smallest achievable cost or distortion."""


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 5000
    rel_tol: float = 1e-9
    grid_resolution: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.grid_resolution < 2:
            raise ValueError("grid_resolution must be >= 2")


@dataclass(frozen=True, eq=False)
class DistortionSpec:
    """Per-letter distortion tables ``d_i[x_i, y_i]`` and a budget on
    ``E[sum_i d_i] / (n + 1)``."""

    tables: tuple[np.ndarray, ...]
    budget: float

    def __post_init__(self):
        tables = tuple(np.asarray(t, dtype=float) for t in self.tables)
        for i, t in enumerate(tables):
            if t.ndim != 2 or not np.all(np.isfinite(t)) or np.any(t < 0):
                raise InvalidInstance(f"distortion[{i}] must be a finite nonnegative matrix")
        if not (math.isfinite(self.budget) and self.budget >= 0):
            raise InvalidInstance("distortion budget must be finite and >= 0")
        object.__setattr__(self, "tables", tables)

    @classmethod
    def hamming(cls, spec: InstanceSpec, budget: float) -> "DistortionSpec":
        tables = [1.0 - np.eye(a, b) for a, b in zip(spec.x_sizes, spec.y_sizes)]
        return cls(tuple(tables), budget)


@dataclass(frozen=True, eq=False)
class PowerSpec:
    """Per-letter input costs ``c_i[x_i]`` and a budget on ``E[sum_i c_i] / (n + 1)``."""

    costs: tuple[np.ndarray, ...]
    budget: float

    def __post_init__(self):
        costs = tuple(np.asarray(c, dtype=float) for c in self.costs)
        for i, c in enumerate(costs):
            if c.ndim != 1 or not np.all(np.isfinite(c)) or np.any(c < 0):
                raise InvalidInstance(f"power cost[{i}] must be a finite nonnegative vector")
        if not (math.isfinite(self.budget) and self.budget >= 0):
            raise InvalidInstance("power budget must be finite and >= 0")
        object.__setattr__(self, "costs", costs)


@dataclass
class SolverResult:
    value_bits: float
    argument: InputPolicy | ForwardChannel
    iterations: int
    converged: bool
    trace: list[float] = field(default_factory=list)
    multiplier: float = 0.0
    constraint_value: float | None = None
    upper_bound_bits: float | None = None
    damped_steps: int = 0

    def __iter__(self):
        # unpacks as (value, argument, trace)
        return iter((self.value_bits, self.argument, self.trace))


# ------------------------------------------------------------------ helpers

def _lse2(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Base-2 log-sum-exp that tolerates ``-inf`` entries."""
    m = np.max(a, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log2(np.sum(np.exp2(a - safe), axis=axis, keepdims=True)) + safe
    return np.squeeze(out, axis=axis)


def _softmax2(a: np.ndarray) -> np.ndarray:
    m = np.max(a, axis=-1, keepdims=True)
    dead = ~np.isfinite(m)
    w = np.exp2(a - np.where(dead, 0.0, m))
    w = np.where(dead, 1.0, w)
    return w / w.sum(axis=-1, keepdims=True)


def _expect(kernel: np.ndarray, values: np.ndarray) -> np.ndarray:
    """``sum_last kernel * values`` with ``0 * -inf = 0``."""
    kernel, values = np.broadcast_arrays(kernel, values)
    with np.errstate(invalid="ignore"):
        terms = np.where(kernel > 0, kernel * values, 0.0)
    return terms.sum(axis=-1)


def _average_cost(policy: InputPolicy, channel: ForwardChannel, costs: Sequence[np.ndarray]) -> float:
    joint = compose_joint(policy, channel).table
    total = 0.0
    for i, c in enumerate(costs):
        x_marg = joint.sum(axis=tuple(a for a in range(joint.ndim) if a != 2 * i))
        total += float(x_marg @ c)
    return total / len(costs)


def _average_distortion(policy: InputPolicy, channel: ForwardChannel, tables: Sequence[np.ndarray]) -> float:
    joint = compose_joint(policy, channel).table
    total = 0.0
    for i, d in enumerate(tables):
        xy = joint.sum(axis=tuple(a for a in range(joint.ndim) if a not in (2 * i, 2 * i + 1)))
        total += float(np.sum(xy * d))
    return total / len(tables)


def _converged(prev: float, cur: float, rel_tol: float) -> bool:
    return abs(cur - prev) <= rel_tol * max(abs(cur), abs(prev), 1e-300) or cur == prev


def random_policy(spec: InstanceSpec, rng: np.random.Generator) -> InputPolicy:
    """Policy with Dirichlet(1) rows; a typical multistart seed."""
    return InputPolicy(
        spec, [rng.dirichlet(np.ones(spec.x_sizes[i]), size=spec.input_kernel_shape(i)[:-1])
               for i in range(spec.horizon + 1)]
    )


def random_channel(spec: InstanceSpec, rng: np.random.Generator) -> ForwardChannel:
    return ForwardChannel(
        spec, [rng.dirichlet(np.ones(spec.y_sizes[i]), size=spec.channel_kernel_shape(i)[:-1])
               for i in range(spec.horizon + 1)]
    )


# ------------------------------------------------------------------ capacity

def _log_posterior(policy: InputPolicy, channel: ForwardChannel) -> np.ndarray:
    """``log2 W(x^n | y^n)`` where ``W`` is the posterior of ``S (x) R``."""
    sr = optimal_reverse_decomposition(policy, channel)
    joint = sr.joint().table
    spec = policy.spec
    nu = joint.sum(axis=spec.x_axes, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        post = np.where(nu > 0, joint / np.where(nu > 0, nu, 1.0), 0.0)
        return np.log2(post)


def _best_policy(
    channel: ForwardChannel, terminal: np.ndarray, s: float, costs: Sequence[np.ndarray] | None
) -> InputPolicy:
    spec = channel.spec
    v = terminal
    kernels: list[np.ndarray] = [None] * (spec.horizon + 1)
    for i in range(spec.horizon, -1, -1):
        v = _expect(channel.kernels[i], v)  # average out y_i
        a = v
        if costs is not None:
            c = costs[i]
            if math.isinf(s):
                a = np.where(c <= c.min(), v, -np.inf)
            elif s > 0:
                a = v - s * c
        kernels[i] = _softmax2(a)
        v = _lse2(a)
    return InputPolicy(spec, kernels)


def _constrained_policy(channel, terminal, power: PowerSpec | None, base: InputPolicy):
    if power is None:
        return _best_policy(channel, terminal, 0.0, None), 0.0
    costs = power.costs

    def cost_at(s):
        pol = _best_policy(channel, terminal, s, costs)
        return pol, _average_cost(pol, channel, costs)

    pol, cost = cost_at(0.0)
    if cost <= power.budget:
        return pol, 0.0
    pol_hi, cost_hi = cost_at(S_MAX)
    if cost_hi > power.budget:
        return _best_policy(channel, terminal, math.inf, costs), math.inf
    lo, hi = 0.0, S_MAX
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        pol_mid, cost_mid = cost_at(mid)
        if cost_mid <= power.budget:
            hi, pol_hi = mid, pol_mid
        else:
            lo = mid
    return pol_hi, hi


def _capacity_upper_bound(policy: InputPolicy, channel: ForwardChannel) -> float:
    """``max_P E log2 Q / nu_cur``; no policy's directed information exceeds it."""
    spec = policy.spec
    nu_kernels, _ = conditional_marginals(compose_joint(policy, channel))
    v = np.zeros(spec.shape)
    for i in range(spec.horizon, -1, -1):
        q = channel.kernels[i]
        nu = np.expand_dims(nu_kernels[i], tuple(range(0, 2 * i + 2, 2)))
        with np.errstate(divide="ignore", invalid="ignore"):
            reward = np.log2(q) - np.log2(nu)
        v = np.max(_expect(q, reward + v), axis=-1)
    return float(v)


def feedback_capacity(
    channel: ForwardChannel,
    cfg: SolverConfig = SolverConfig(),
    power: PowerSpec | None = None,
    initial: InputPolicy | None = None,
) -> SolverResult:
    """Maximize directed information over feedback input policies.

    Returns the per-symbol capacity ``max I(X^n -> Y^n) / (n + 1)``; the trace
    holds un-normalized directed information after every iteration.
    """
    spec = channel.spec
    n1 = spec.horizon + 1
    if power is not None:
        if len(power.costs) != n1 or any(c.shape != (a,) for c, a in zip(power.costs, spec.x_sizes)):
            raise InvalidInstance("power costs do not match the input alphabets")
        min_cost = sum(float(c.min()) for c in power.costs) / n1
        if power.budget < min_cost - 1e-12:
            raise InfeasibleConstraint(f"power budget {power.budget} below minimum cost {min_cost}")
    policy = initial if initial is not None else InputPolicy.uniform(spec)
    if power is not None and _average_cost(policy, channel, power.costs) > power.budget:
        policy, _ = _constrained_policy(channel, np.zeros(spec.shape), power, policy)
    value = directed_information(policy, channel)
    trace = [value]
    converged = False
    damped = 0
    s = 0.0
    it = 0
    for it in range(1, cfg.max_iters + 1):
        terminal = _log_posterior(policy, channel)
        candidate, s = _constrained_policy(channel, terminal, power, policy)
        new_value = directed_information(candidate, channel)
        if new_value < value - 1e-12 * max(1.0, abs(value)):
            # oscillation guard: fall back to the midpoint of successive iterates
            damped += 1
            mixed = mix_conditional(expand_causal(policy), expand_causal(candidate), 0.5)
            candidate = factorize(mixed)
            new_value = directed_information(candidate, channel)
            if new_value < value:
                candidate, new_value = policy, value
        policy, prev, value = candidate, value, new_value
        trace.append(value)
        if _converged(prev, value, cfg.rel_tol):
            converged = True
            break
    if not converged:
        log.warning("feedback_capacity stopped after %d iterations without converging", it)
    result = SolverResult(
        value_bits=value / n1,
        argument=policy,
        iterations=it,
        converged=converged,
        trace=trace,
        multiplier=s,
        damped_steps=damped,
    )
    if power is None:
        result.upper_bound_bits = _capacity_upper_bound(policy, channel) / n1
    else:
        result.constraint_value = _average_cost(policy, channel, power.costs)
    return result


def multistart_capacity(
    channel: ForwardChannel, cfg: SolverConfig = SolverConfig(), starts: int = 16,
    power: PowerSpec | None = None,
) -> list[SolverResult]:
    """Run :func:`feedback_capacity` from ``starts`` random policies seeded by ``cfg.seed``."""
    seeds = np.random.SeedSequence(cfg.seed).spawn(starts)
    return [
        feedback_capacity(channel, cfg, power, random_policy(channel.spec, np.random.default_rng(sq)))
        for sq in seeds
    ]


# ------------------------------------------------------------------ rate distortion

def _best_channel(
    source: InputPolicy, nu_kernels: Sequence[np.ndarray], tables: Sequence[np.ndarray], s: float
) -> ForwardChannel:
    spec = source.spec
    v = np.zeros(spec.shape)
    kernels: list[np.ndarray] = [None] * (spec.horizon + 1)
    for i in range(spec.horizon, -1, -1):
        x_axes = tuple(range(0, 2 * i + 2, 2))
        with np.errstate(divide="ignore"):
            log_nu = np.log2(np.expand_dims(nu_kernels[i], x_axes))
        d = tables[i]  # (X_i, Y_i), broadcasts against (..., X_i, Y_i)
        if math.isinf(s):
            logits = np.where(d <= d.min(axis=1, keepdims=True), log_nu - v, -np.inf)
            # keep every minimal-distortion letter reachable when nu vanishes there
            dead = ~np.isfinite(np.max(logits, axis=-1, keepdims=True))
            logits = np.where(dead & (d <= d.min(axis=1, keepdims=True)), 0.0, logits)
        else:
            logits = log_nu - s * d - v
        logits = np.broadcast_to(logits, spec.channel_kernel_shape(i))
        kernels[i] = _softmax2(logits)
        v = -_lse2(logits)  # value at (h, x_i)
        v = _expect(source.kernels[i], v)  # average out x_i
    return ForwardChannel(spec, kernels)


def minimum_distortion(source: InputPolicy, dist: DistortionSpec) -> float:
    """Smallest achievable average distortion (pick the best letter everywhere)."""
    spec = source.spec
    joint_x = compose_joint(source, ForwardChannel.uniform(spec)).table
    total = 0.0
    for i, d in enumerate(dist.tables):
        xm = joint_x.sum(axis=tuple(a for a in range(joint_x.ndim) if a != 2 * i))
        total += float(xm @ d.min(axis=1))
    return total / (spec.horizon + 1)


def _constrained_channel(source, nu_kernels, dist: DistortionSpec):
    tables = dist.tables

    def at(s):
        ch = _best_channel(source, nu_kernels, tables, s)
        return ch, _average_distortion(source, ch, tables)

    ch, d0 = at(0.0)
    if d0 <= dist.budget:
        return ch, 0.0
    ch_hi, d_hi = at(S_MAX)
    if d_hi > dist.budget:
        return _best_channel(source, nu_kernels, tables, math.inf), math.inf
    lo, hi = 0.0, S_MAX
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        ch_mid, d_mid = at(mid)
        if d_mid <= dist.budget:
            hi, ch_hi = mid, ch_mid
        else:
            lo = mid
    return ch_hi, hi


def nrdf(
    source: InputPolicy,
    dist: DistortionSpec,
    cfg: SolverConfig = SolverConfig(),
    initial: ForwardChannel | None = None,
) -> SolverResult:
    """Minimize directed information from source to reproduction under a distortion budget.

    ``source`` must not depend on past reproductions.  Returns the per-symbol
    rate ``min I(X^n -> Y^n) / (n + 1)``.
    """
    spec = source.spec
    n1 = spec.horizon + 1
    if not source.ignores_outputs(tol=1e-12):
        raise InvalidInstance("source kernels depend on past reproductions")
    if len(dist.tables) != n1 or any(
        t.shape != (a, b) for t, a, b in zip(dist.tables, spec.x_sizes, spec.y_sizes)
    ):
        raise InvalidInstance("distortion tables do not match the alphabets")
    d_min = minimum_distortion(source, dist)
    if dist.budget < d_min - 1e-12:
        raise InfeasibleConstraint(f"distortion budget {dist.budget} below minimum {d_min}")
    channel = initial if initial is not None else ForwardChannel.uniform(spec)
    if _average_distortion(source, channel, dist.tables) > dist.budget:
        nu0, _ = conditional_marginals(compose_joint(source, channel))
        channel, _ = _constrained_channel(source, nu0, dist)
    value = directed_information(source, channel)
    trace = [value]
    converged = False
    damped = 0
    s = 0.0
    it = 0
    for it in range(1, cfg.max_iters + 1):
        nu_kernels, _ = conditional_marginals(compose_joint(source, channel))
        candidate, s = _constrained_channel(source, nu_kernels, dist)
        new_value = directed_information(source, candidate)
        if new_value > value + 1e-12 * max(1.0, abs(value)):
            damped += 1
            mixed = mix_conditional(expand_forward(channel), expand_forward(candidate), 0.5)
            candidate = factorize(mixed)
            new_value = directed_information(source, candidate)
            if new_value > value:
                candidate, new_value = channel, value
        channel, prev, value = candidate, value, new_value
        trace.append(value)
        if _converged(prev, value, cfg.rel_tol) or value == 0.0:
            converged = True
            break
    if not converged:
        log.warning("nrdf stopped after %d iterations without converging", it)
    return SolverResult(
        value_bits=value / n1,
        argument=channel,
        iterations=it,
        converged=converged,
        trace=trace,
        multiplier=s,
        constraint_value=_average_distortion(source, channel, dist.tables),
        damped_steps=damped,
    )
