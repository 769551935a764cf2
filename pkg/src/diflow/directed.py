"""Directed information and its relatives, computed along several routes.

The three routes for ``I(X^n -> Y^n)`` share no intermediate quantities beyond
the kernels themselves:

* ``cmi_sum``: per-step averaged divergences ``D(q_i || nu_{i|i-1})`` with the
  output conditional rebuilt by Bayes' rule at each step;
* ``divergence``: ``D(P (x) Q || P (x) nu)`` on the full joint, split into steps by
  telescoping the divergence of prefix marginals;
* ``logratio``: expectation of ``log Q(y^n || x^n) / nu(y^n)``, telescoped the
  same way over truncated instances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import (
    InputPolicy,
    ForwardChannel,
    InvalidInstance,
    compose_joint,
    expand_causal,
    expand_forward,
    kl_divergence,
    marginal_x,
    marginal_y,
    normalize_last,
    pi_forward,
    JointMeasure,
)

ROUTES = ("cmi_sum", "divergence", "logratio")

# bound on E|log2 L| - E[log2 L] for a likelihood ratio L, from x log2 x >= -1/(e ln 2)
ABS_SLACK = 2.0 / (math.e * math.log(2.0))


@dataclass(frozen=True)
class DirectedInfoReport:
    total_bits: float
    per_step_bits: tuple[float, ...]
    route: str

    def to_dict(self) -> dict:
        return {
            "total_bits": self.total_bits,
            "per_step_bits": list(self.per_step_bits),
            "route": self.route,
        }


def _row_divergence(p: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """``sum_last p log2(p / ref)`` per row; inf where p > 0 meets ref == 0."""
    p, ref = np.broadcast_arrays(p, ref)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(p / ref), 0.0)
    return terms.sum(axis=-1)


def _weighted_sum(weight: np.ndarray, values: np.ndarray) -> float:
    """``sum weight * values`` skipping zero-weight cells (so 0 * inf = 0)."""
    weight, values = np.broadcast_arrays(weight, values)
    mask = weight > 0
    return float(np.sum(weight[mask] * values[mask]))


def _prefix(arr: np.ndarray, n_axes: int) -> np.ndarray:
    return arr.sum(axis=tuple(range(n_axes, arr.ndim))) if n_axes < arr.ndim else arr


def _expected_log_ratio(weight: np.ndarray, num: np.ndarray, den: np.ndarray) -> float:
    weight, num, den = np.broadcast_arrays(weight, num, den)
    mask = weight > 0
    if np.any(num[mask] <= 0):
        return -math.inf
    if np.any(den[mask] <= 0):
        return math.inf
    return float(np.sum(weight[mask] * np.log2(num[mask] / den[mask])))


def _report(steps: list[float], route: str) -> DirectedInfoReport:
    total = math.inf if any(math.isinf(s) for s in steps) else math.fsum(steps)
    return DirectedInfoReport(total, tuple(steps), route)


def _same_spec(policy: InputPolicy, channel: ForwardChannel) -> None:
    if policy.spec != channel.spec:
        raise InvalidInstance("policy and channel are built on different instance specs")


def di_cmi_sum(policy: InputPolicy, channel: ForwardChannel) -> DirectedInfoReport:
    _same_spec(policy, channel)
    w = np.ones(())
    steps = []
    for p, q in zip(policy.kernels, channel.kernels):
        w = w[..., None] * p  # mass of (x^i, y^{i-1})
        x_axes = tuple(range(0, w.ndim, 2))
        out_joint = (w[..., None] * q).sum(axis=x_axes)  # (y^{i-1}, y_i)
        nu = np.expand_dims(normalize_last(out_joint), x_axes)
        steps.append(_weighted_sum(w, _row_divergence(q, nu)))
        w = w[..., None] * q
    return _report(steps, "cmi_sum")


def _telescope(cumulative: list[float]) -> list[float]:
    out, prev = [], 0.0
    for c in cumulative:
        out.append(c - prev if not math.isinf(c) else math.inf)
        prev = c
    return out


def di_divergence(policy: InputPolicy, channel: ForwardChannel) -> DirectedInfoReport:
    _same_spec(policy, channel)
    joint = compose_joint(policy, channel)
    ref = pi_forward(expand_causal(policy), marginal_y(joint))
    cumulative = [
        kl_divergence(_prefix(joint.table, 2 * i + 2), _prefix(ref.table, 2 * i + 2))
        for i in range(policy.spec.horizon + 1)
    ]
    return _report(_telescope(cumulative), "divergence")


def di_logratio(policy: InputPolicy, channel: ForwardChannel) -> DirectedInfoReport:
    _same_spec(policy, channel)
    joint = compose_joint(policy, channel).table
    cumulative = []
    for i in range(policy.spec.horizon + 1):
        spec_i = policy.spec.truncate(i)
        qtab = expand_forward(channel.truncate(i)).values
        j_i = _prefix(joint, 2 * i + 2)
        nu_i = spec_i.spread_y(j_i.sum(axis=spec_i.x_axes))
        cumulative.append(_expected_log_ratio(j_i, qtab, nu_i))
    return _report(_telescope(cumulative), "logratio")


def directed_information(policy: InputPolicy, channel: ForwardChannel) -> float:
    """Total ``I(X^n -> Y^n)`` in bits, as one expectation over the joint."""
    _same_spec(policy, channel)
    joint = compose_joint(policy, channel)
    spec = policy.spec
    nu = spec.spread_y(marginal_y(joint))
    return _expected_log_ratio(joint.table, expand_forward(channel).values, nu)


def di_reverse(policy: InputPolicy, channel: ForwardChannel) -> DirectedInfoReport:
    """Feedback information ``sum_i I(Y^{i-1}; X_i | X^{i-1})``, per step."""
    _same_spec(policy, channel)
    joint = compose_joint(policy, channel).table
    cumulative = []
    for i in range(policy.spec.horizon + 1):
        spec_i = policy.spec.truncate(i)
        ptab = expand_causal(policy.truncate(i)).values  # (x0, y0, ..., y_{i-1}, x_i)
        w = _prefix(joint, 2 * i + 1)
        mu = spec_i.spread_x(w.sum(axis=tuple(range(1, w.ndim, 2))))
        mu = mu.reshape(mu.shape[:-1])  # drop the trailing y_i singleton
        cumulative.append(_expected_log_ratio(w, ptab, mu))
    return _report(_telescope(cumulative), "reverse")


def mutual_information(joint: JointMeasure) -> float:
    """``I(X^n; Y^n) = D(P || mu x nu)`` in bits."""
    spec = joint.spec
    product = spec.spread_x(marginal_x(joint)) * spec.spread_y(marginal_y(joint))
    return kl_divergence(joint.table, product)


def di_abs(policy: InputPolicy, channel: ForwardChannel) -> float:
    """Expected absolute log-likelihood ratio ``E |log2 Q(y^n||x^n) / nu(y^n)|``."""
    _same_spec(policy, channel)
    joint = compose_joint(policy, channel)
    spec = policy.spec
    qtab = expand_forward(channel).values
    nu = spec.spread_y(marginal_y(joint))
    w, qtab, nu = np.broadcast_arrays(joint.table, qtab, nu)
    mask = w > 0
    return float(np.sum(w[mask] * np.abs(np.log2(qtab[mask] / nu[mask]))))


def di_partition_sup(policy: InputPolicy, channel: ForwardChannel, partition) -> float:
    """Divergence of the joint from its reference, restricted to a partition.

    ``partition`` is a collection of disjoint cell-index lists covering every
    flat cell of the joint (x-block-major flattening).
    """
    _same_spec(policy, channel)
    joint = compose_joint(policy, channel)
    ref = pi_forward(expand_causal(policy), marginal_y(joint))
    jf, rf = joint.flat(), ref.flat()
    n_cells = jf.size
    seen = np.zeros(n_cells, dtype=bool)
    total = []
    for cell in partition:
        idx = np.asarray(list(cell), dtype=int)
        if idx.size == 0:
            continue
        if idx.min() < 0 or idx.max() >= n_cells:
            raise ValueError("partition cell index out of range")
        if np.any(seen[idx]) or np.unique(idx).size != idx.size:
            raise ValueError("partition cells overlap")
        seen[idx] = True
        a, b = jf[idx].sum(), rf[idx].sum()
        if a > 0:
            if b <= 0:
                return math.inf
            total.append(a * math.log2(a / b))
    if not seen.all():
        raise ValueError("partition does not cover every cell")
    return math.fsum(total)
