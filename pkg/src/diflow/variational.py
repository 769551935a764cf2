"""Variational forms of directed information and their closed-form achievers.

Two families of objectives are evaluated here:

* the *output-reference* form, an expectation of ``log Q(y^n||x^n) / nubar(y^n)``
  that overshoots directed information by exactly ``D(nu || nubar)``;
* the *reverse-decomposition* form, an expectation of
  ``log (S (x) R) / (P (x) nu)`` that undershoots it by ``D(P (x) Q || S (x) R)``.

A reverse decomposition factors a joint in the order ``y_0, x_0, y_1, x_1, ...``:
``s_i(y_i | x^{i-1}, y^{i-1})`` never sees ``x_i`` while ``r_i(x_i | x^{i-1}, y^i)``
does see ``y_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .directed import _expected_log_ratio, _row_divergence, _weighted_sum, directed_information
from .measures import (
    ForwardChannel,
    InputPolicy,
    InstanceSpec,
    InvalidInstance,
    JointMeasure,
    _check_kernels,
    as_pmf,
    compose_joint,
    conditional_marginals,
    expand_causal,
    expand_forward,
    kl_divergence,
    marginal_y,
    normalize_last,
    pi_forward,
)


def _s_shape(spec: InstanceSpec, i: int) -> tuple[int, ...]:
    return spec.shape[: 2 * i] + (spec.y_sizes[i],)


def _r_shape(spec: InstanceSpec, i: int) -> tuple[int, ...]:
    return spec.shape[: 2 * i] + (spec.y_sizes[i], spec.x_sizes[i])


@dataclass(frozen=True, eq=False)
class ReverseDecomposition:
    """Kernels ``s_i`` of shape ``(X_0, Y_0, ..., X_{i-1}, Y_{i-1}, Y_i)`` and
    ``r_i`` of shape ``(X_0, Y_0, ..., X_{i-1}, Y_{i-1}, Y_i, X_i)``."""

    spec: InstanceSpec
    s_kernels: tuple[np.ndarray, ...]
    r_kernels: tuple[np.ndarray, ...]

    def __post_init__(self):
        spec = self.spec
        object.__setattr__(
            self, "s_kernels", _check_kernels(spec, self.s_kernels, lambda i: _s_shape(spec, i), "s_kernels")
        )
        object.__setattr__(
            self, "r_kernels", _check_kernels(spec, self.r_kernels, lambda i: _r_shape(spec, i), "r_kernels")
        )

    def joint(self) -> JointMeasure:
        """The measure ``S (x) R`` in interleaved ``x_0, y_0, ...`` axis order."""
        t = np.ones(())
        for s, r in zip(self.s_kernels, self.r_kernels):
            t = t[..., None] * s
            t = t[..., None] * r
            t = np.swapaxes(t, -1, -2)
        return JointMeasure(self.spec, t)


def _as_nu(spec: InstanceSpec, nu_bar) -> np.ndarray:
    arr = np.asarray(nu_bar, dtype=float)
    if arr.size != math.prod(spec.y_sizes):
        raise InvalidInstance(f"output reference has {arr.size} cells, expected {math.prod(spec.y_sizes)}")
    return as_pmf(arr.reshape(-1)).reshape(spec.y_sizes)


def objective_A(policy: InputPolicy, channel: ForwardChannel, nu_bar) -> float:
    """``E log2 Q(y^n||x^n) / nubar(y^n)``; ``inf`` when nubar misses output mass."""
    spec = policy.spec
    nu_bar = _as_nu(spec, nu_bar)
    joint = compose_joint(policy, channel).table
    return _expected_log_ratio(joint, expand_forward(channel).values, spec.spread_y(nu_bar))


def optimal_nu(policy: InputPolicy, channel: ForwardChannel) -> np.ndarray:
    """The output marginal, which minimizes :func:`objective_A`."""
    return marginal_y(compose_joint(policy, channel))


def gap_A(policy: InputPolicy, channel: ForwardChannel, nu_bar) -> float:
    """``D(nu || nubar)``, the amount by which ``objective_A`` exceeds directed information."""
    nu_bar = _as_nu(policy.spec, nu_bar)
    return kl_divergence(optimal_nu(policy, channel), nu_bar)


def objective_A_steps(policy: InputPolicy, channel: ForwardChannel, nu_bar_kernels) -> list[float]:
    """Per-step averaged divergences ``E D(q_i || nubar_{i|i-1})``.

    ``nu_bar_kernels[i]`` has shape ``(Y_0, ..., Y_i)`` and holds the step-``i``
    reference conditional.
    """
    spec = policy.spec
    if len(nu_bar_kernels) != spec.horizon + 1:
        raise InvalidInstance("need one reference kernel per step")
    w = np.ones(())
    steps = []
    for i, (p, q) in enumerate(zip(policy.kernels, channel.kernels)):
        ref = as_pmf(np.asarray(nu_bar_kernels[i], dtype=float).reshape(spec.y_sizes[: i + 1]))
        w = w[..., None] * p
        x_axes = tuple(range(0, w.ndim, 2))
        steps.append(_weighted_sum(w, _row_divergence(q, np.expand_dims(ref, x_axes))))
        w = w[..., None] * q
    return steps


def objective_A_stepwise(policy: InputPolicy, channel: ForwardChannel, nu_bar_kernels) -> float:
    steps = objective_A_steps(policy, channel, nu_bar_kernels)
    return math.inf if any(math.isinf(s) for s in steps) else math.fsum(steps)


def objective_B(policy: InputPolicy, channel: ForwardChannel, sr: ReverseDecomposition) -> float:
    """``E log2 (S (x) R) / (P (x) nu)``; ``-inf`` if ``S (x) R`` misses joint mass."""
    joint = compose_joint(policy, channel)
    ref = pi_forward(expand_causal(policy), marginal_y(joint))
    return _expected_log_ratio(joint.table, sr.joint().table, ref.table)


def optimal_reverse_decomposition(policy: InputPolicy, channel: ForwardChannel) -> ReverseDecomposition:
    """Split ``p_i q_i`` into ``s_i`` (sum over ``x_i``) and the posterior ``r_i``."""
    s_kernels, r_kernels = [], []
    for p, q in zip(policy.kernels, channel.kernels):
        pq = p[..., None] * q  # (h, X_i, Y_i)
        s_kernels.append(pq.sum(axis=-2))
        r_kernels.append(normalize_last(np.swapaxes(pq, -1, -2)))
    return ReverseDecomposition(policy.spec, s_kernels, r_kernels)


def _step_masses(policy: InputPolicy, channel: ForwardChannel):
    w = np.ones(())
    for p, q in zip(policy.kernels, channel.kernels):
        w_next = w[..., None] * p
        w_next = w_next[..., None] * q
        yield w_next
        w = w_next


def lambda_deviation(policy: InputPolicy, channel: ForwardChannel, sr: ReverseDecomposition) -> float:
    """Largest ``|p_i q_i / (s_i r_i) - 1|`` over cells with positive joint mass."""
    worst = 0.0
    for i, mass in enumerate(_step_masses(policy, channel)):
        p, q = policy.kernels[i], channel.kernels[i]
        s, r = sr.s_kernels[i], sr.r_kernels[i]
        num = p[..., None] * q
        den = s[..., None, :] * np.swapaxes(r, -1, -2)
        mask = mass > 0
        if np.any(den[mask] <= 0):
            return math.inf
        worst = max(worst, float(np.max(np.abs(num[mask] / den[mask] - 1), initial=0.0)))
    return worst


def likelihood_ratio_deviation(policy: InputPolicy, channel: ForwardChannel, sr: ReverseDecomposition) -> float:
    """Largest ``|P (x) Q / S (x) R - 1|`` over cells with positive joint mass."""
    joint = compose_joint(policy, channel).table
    other = sr.joint().table
    mask = joint > 0
    if np.any(other[mask] <= 0):
        return math.inf
    return float(np.max(np.abs(joint[mask] / other[mask] - 1), initial=0.0))


@dataclass(frozen=True)
class ReciprocityReport:
    holds: bool
    max_deviation: float
    cells_checked: int


def reciprocity_check(
    policy: InputPolicy, channel: ForwardChannel, sr: ReverseDecomposition, tol: float = 1e-10
) -> ReciprocityReport:
    """Check ``q_i / s_i == r_i / p_i`` on every cell with positive mass."""
    worst, count = 0.0, 0
    for i, mass in enumerate(_step_masses(policy, channel)):
        p, q = policy.kernels[i], channel.kernels[i]
        s = sr.s_kernels[i][..., None, :]
        r = np.swapaxes(sr.r_kernels[i], -1, -2)
        p = p[..., None]
        mass, p, q, s, r = np.broadcast_arrays(mass, p, q, s, r)
        mask = mass > 0
        count += int(mask.sum())
        if np.any(s[mask] <= 0) or np.any(p[mask] <= 0):
            return ReciprocityReport(False, math.inf, count)
        dev = np.abs(q[mask] / s[mask] - r[mask] / p[mask])
        worst = max(worst, float(np.max(dev, initial=0.0)))
    return ReciprocityReport(worst <= tol, worst, count)


def objective_B_steps(policy: InputPolicy, channel: ForwardChannel, sr: ReverseDecomposition) -> list[float]:
    """Per-step terms ``E log2 s_i r_i / (p_i nu_{i|i-1})`` under the step-``i`` prefix."""
    joint = compose_joint(policy, channel)
    nu_kernels, _ = conditional_marginals(joint)
    steps = []
    for i, mass in enumerate(_step_masses(policy, channel)):
        num = sr.s_kernels[i][..., None, :] * np.swapaxes(sr.r_kernels[i], -1, -2)
        x_axes = tuple(range(0, 2 * i + 2, 2))
        den = policy.kernels[i][..., None] * np.expand_dims(nu_kernels[i], x_axes)
        steps.append(_expected_log_ratio(mass, num, den))
    return steps


def objective_B_stepwise(policy: InputPolicy, channel: ForwardChannel, sr: ReverseDecomposition) -> float:
    steps = objective_B_steps(policy, channel, sr)
    if any(s == -math.inf for s in steps):
        return -math.inf
    return math.fsum(steps)


def gap_B(policy: InputPolicy, channel: ForwardChannel, sr: ReverseDecomposition) -> float:
    """``D(P (x) Q || S (x) R)``, the shortfall of ``objective_B``."""
    return kl_divergence(compose_joint(policy, channel).table, sr.joint().table)


__all__ = [
    "ReverseDecomposition",
    "ReciprocityReport",
    "objective_A",
    "objective_A_steps",
    "objective_A_stepwise",
    "optimal_nu",
    "gap_A",
    "objective_B",
    "objective_B_steps",
    "objective_B_stepwise",
    "optimal_reverse_decomposition",
    "lambda_deviation",
    "likelihood_ratio_deviation",
    "reciprocity_check",
    "gap_B",
    "directed_information",
]
