"""Finite-alphabet causally conditioned measures.

All tables live on the interleaved axis order ``x_0, y_0, x_1, y_1, ..., x_n, y_n``.
With that layout the input kernel ``p_i`` conditions on the first ``2i`` axes and
the channel kernel ``q_i`` on the first ``2i + 1`` axes, so every construction
below is a chain of broadcasts over a shared prefix.  Flattening a history to a
row number is C-order on the prefix shape (earliest symbol most significant).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_CELLS = 10**7
SUM_TOL = 1e-9

CAUSAL = "causal_input"
FORWARD = "forward"


class InvalidInstance(ValueError):
    """Raised when sizes, kernels or tables violate their invariants."""


def as_pmf(values, axis: int = -1, tol: float = SUM_TOL) -> np.ndarray:
    """Validate probability rows along ``axis`` and renormalize them.

    Rows whose sum is within ``tol`` of one are rescaled to unit sum; anything
    further off, negative or non-finite raises :class:`InvalidInstance`.
    """
    arr = np.array(values, dtype=float)
    if arr.ndim == 0:
        raise InvalidInstance("a probability vector needs at least one axis")
    if not np.all(np.isfinite(arr)):
        raise InvalidInstance("probabilities must be finite")
    if np.any(arr < 0):
        raise InvalidInstance(f"negative probability {arr.min()!r}")
    sums = arr.sum(axis=axis, keepdims=True)
    bad = np.abs(sums - 1.0) > tol
    if np.any(bad):
        worst = sums[bad].flat[0]
        raise InvalidInstance(f"row sums to {worst!r}, not 1")
    return arr / sums


def normalize_last(arr: np.ndarray) -> np.ndarray:
    """Condition on every axis but the last; zero-mass rows become uniform."""
    arr = np.asarray(arr, dtype=float)
    total = arr.sum(axis=-1, keepdims=True)
    k = arr.shape[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(total > 0, arr / np.where(total > 0, total, 1.0), 1.0 / k)
    return out


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class InstanceSpec:
    """Horizon ``n`` and per-step alphabet sizes for the input and output."""

    horizon: int
    x_sizes: tuple[int, ...]
    y_sizes: tuple[int, ...]
    max_cells: int = field(default=MAX_CELLS, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "x_sizes", tuple(int(s) for s in self.x_sizes))
        object.__setattr__(self, "y_sizes", tuple(int(s) for s in self.y_sizes))
        n = self.horizon
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise InvalidInstance(f"horizon must be a nonnegative integer, got {n!r}")
        if len(self.x_sizes) != n + 1 or len(self.y_sizes) != n + 1:
            raise InvalidInstance(
                f"need {n + 1} alphabet sizes per side, got "
                f"{len(self.x_sizes)} and {len(self.y_sizes)}"
            )
        if min(self.x_sizes + self.y_sizes) < 1:
            raise InvalidInstance("alphabet sizes must be >= 1")
        if self.cells > self.max_cells:
            raise InvalidInstance(
                f"joint space has {self.cells} cells, above the cap of {self.max_cells}"
            )

    @classmethod
    def uniform(cls, horizon: int, x_size: int, y_size: int | None = None) -> "InstanceSpec":
        y_size = x_size if y_size is None else y_size
        return cls(horizon, (x_size,) * (horizon + 1), (y_size,) * (horizon + 1))

    @property
    def shape(self) -> tuple[int, ...]:
        out = []
        for a, b in zip(self.x_sizes, self.y_sizes):
            out += [a, b]
        return tuple(out)

    @property
    def cells(self) -> int:
        return math.prod(self.x_sizes) * math.prod(self.y_sizes)

    @property
    def x_axes(self) -> tuple[int, ...]:
        return tuple(range(0, 2 * self.horizon + 2, 2))

    @property
    def y_axes(self) -> tuple[int, ...]:
        return tuple(range(1, 2 * self.horizon + 2, 2))

    def truncate(self, horizon: int) -> "InstanceSpec":
        if not 0 <= horizon <= self.horizon:
            raise ValueError(f"cannot truncate horizon {self.horizon} to {horizon}")
        k = horizon + 1
        return InstanceSpec(horizon, self.x_sizes[:k], self.y_sizes[:k])

    def input_kernel_shape(self, i: int) -> tuple[int, ...]:
        return self.shape[: 2 * i] + (self.x_sizes[i],)

    def channel_kernel_shape(self, i: int) -> tuple[int, ...]:
        return self.shape[: 2 * i + 1] + (self.y_sizes[i],)

    def spread_x(self, arr: np.ndarray) -> np.ndarray:
        """Reshape an array over ``x^n`` to broadcast against interleaved tables."""
        return np.asarray(arr).reshape(
            tuple(s for a in self.x_sizes for s in (a, 1))
        )

    def spread_y(self, arr: np.ndarray) -> np.ndarray:
        return np.asarray(arr).reshape(
            tuple(s for b in self.y_sizes for s in (1, b))
        )

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "x_sizes": list(self.x_sizes), "y_sizes": list(self.y_sizes)}


def _check_kernels(spec: InstanceSpec, kernels, shape_of, label: str) -> tuple[np.ndarray, ...]:
    kernels = list(kernels)
    if len(kernels) != spec.horizon + 1:
        raise InvalidInstance(f"{label}: expected {spec.horizon + 1} kernels, got {len(kernels)}")
    out = []
    for i, k in enumerate(kernels):
        want = shape_of(i)
        arr = np.asarray(k, dtype=float)
        if arr.shape != want:
            # accept the flattened (rows, outcomes) layout too
            if arr.ndim == 2 and arr.size == math.prod(want) and arr.shape[1] == want[-1]:
                arr = arr.reshape(want)
            else:
                raise InvalidInstance(f"{label}[{i}]: shape {arr.shape}, expected {want}")
        try:
            arr = as_pmf(arr)
        except InvalidInstance as exc:
            raise InvalidInstance(f"{label}[{i}]: {exc}") from None
        out.append(_frozen(arr))
    return tuple(out)


def _uniform_kernels(spec: InstanceSpec, shape_of) -> list[np.ndarray]:
    return [np.full(shape_of(i), 1.0 / shape_of(i)[-1]) for i in range(spec.horizon + 1)]


@dataclass(frozen=True, eq=False)
class InputPolicy:
    """Feedback input kernels ``p_i(x_i | x^{i-1}, y^{i-1})``.

    ``kernels[i]`` has shape ``(X_0, Y_0, ..., X_{i-1}, Y_{i-1}, X_i)``.
    """

    spec: InstanceSpec
    kernels: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "kernels",
            _check_kernels(self.spec, self.kernels, self.spec.input_kernel_shape, "input_kernels"),
        )

    @classmethod
    def uniform(cls, spec: InstanceSpec) -> "InputPolicy":
        return cls(spec, _uniform_kernels(spec, spec.input_kernel_shape))

    @classmethod
    def iid(cls, spec: InstanceSpec, pmf) -> "InputPolicy":
        """Same marginal at every step, ignoring all history."""
        pmf = np.asarray(pmf, dtype=float)
        return cls(spec, [np.broadcast_to(pmf, spec.input_kernel_shape(i)) for i in range(spec.horizon + 1)])

    def rows(self, i: int) -> np.ndarray:
        return self.kernels[i].reshape(-1, self.spec.x_sizes[i])

    def truncate(self, horizon: int) -> "InputPolicy":
        return InputPolicy(self.spec.truncate(horizon), self.kernels[: horizon + 1])

    def ignores_outputs(self, tol: float = 0.0) -> bool:
        """True when no kernel row depends on past outputs (a source, not a policy)."""
        for k in self.kernels:
            for ax in range(1, k.ndim - 1, 2):
                if np.max(np.abs(k - k.take([0], axis=ax))) > tol:
                    return False
        return True


@dataclass(frozen=True, eq=False)
class ForwardChannel:
    """Channel kernels ``q_i(y_i | y^{i-1}, x^i)``.

    ``kernels[i]`` has shape ``(X_0, Y_0, ..., X_{i-1}, Y_{i-1}, X_i, Y_i)``.
    """

    spec: InstanceSpec
    kernels: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "kernels",
            _check_kernels(self.spec, self.kernels, self.spec.channel_kernel_shape, "channel_kernels"),
        )

    @classmethod
    def uniform(cls, spec: InstanceSpec) -> "ForwardChannel":
        return cls(spec, _uniform_kernels(spec, spec.channel_kernel_shape))

    @classmethod
    def memoryless(cls, spec: InstanceSpec, matrix) -> "ForwardChannel":
        """Apply the same ``|X| x |Y|`` transition matrix at every step."""
        m = np.asarray(matrix, dtype=float)
        kernels = []
        for i in range(spec.horizon + 1):
            shape = spec.channel_kernel_shape(i)
            kernels.append(np.broadcast_to(m, shape))
        return cls(spec, kernels)

    def rows(self, i: int) -> np.ndarray:
        return self.kernels[i].reshape(-1, self.spec.y_sizes[i])

    def truncate(self, horizon: int) -> "ForwardChannel":
        return ForwardChannel(self.spec.truncate(horizon), self.kernels[: horizon + 1])


def bsc(eps: float) -> np.ndarray:
    """Transition matrix of a binary symmetric channel."""
    return np.array([[1 - eps, eps], [eps, 1 - eps]])


@dataclass(frozen=True, eq=False)
class JointMeasure:
    """Probability table over ``X_{0,n} x Y_{0,n}`` in interleaved axis order."""

    spec: InstanceSpec
    table: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.table, dtype=float)
        if arr.shape != self.spec.shape:
            if arr.size == self.spec.cells and arr.ndim == 1:
                arr = _unflatten_xy(arr, self.spec)
            else:
                raise InvalidInstance(f"joint table shape {arr.shape}, expected {self.spec.shape}")
        arr = as_pmf(arr.reshape(-1)).reshape(self.spec.shape)
        object.__setattr__(self, "table", _frozen(arr))

    def flat(self) -> np.ndarray:
        """Cells indexed by ``(x^n, y^n)`` row-major with the x block major."""
        return _flatten_xy(self.table, self.spec)


def _flatten_xy(arr: np.ndarray, spec: InstanceSpec) -> np.ndarray:
    return np.transpose(arr, spec.x_axes + spec.y_axes).reshape(-1)


def _unflatten_xy(flat: np.ndarray, spec: InstanceSpec) -> np.ndarray:
    arr = np.asarray(flat).reshape(spec.x_sizes + spec.y_sizes)
    return np.transpose(arr, np.argsort(spec.x_axes + spec.y_axes))


@dataclass(frozen=True, eq=False)
class ConditionalTable:
    """A full causally conditioned product.

    ``causal_input`` tables hold ``P(x^n || y^{n-1})`` on axes
    ``(X_0, Y_0, ..., Y_{n-1}, X_n)``; ``forward`` tables hold
    ``Q(y^n || x^n)`` on the full interleaved shape.
    """

    spec: InstanceSpec
    direction: str
    values: np.ndarray

    def __post_init__(self):
        spec = self.spec
        if self.direction == CAUSAL:
            shape, out_axes = spec.shape[:-1], spec.x_axes
        elif self.direction == FORWARD:
            shape, out_axes = spec.shape, spec.y_axes
        else:
            raise InvalidInstance(f"unknown direction {self.direction!r}")
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != shape:
            raise InvalidInstance(f"{self.direction} table shape {arr.shape}, expected {shape}")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise InvalidInstance("conditional table entries must be finite and nonnegative")
        sums = arr.sum(axis=out_axes, keepdims=True)
        if np.any(np.abs(sums - 1) > SUM_TOL):
            raise InvalidInstance(f"{self.direction} table has a row summing to {sums.flat[np.argmax(np.abs(sums - 1))]!r}")
        arr = arr / sums
        _check_nonanticipative(arr, self.direction)
        object.__setattr__(self, "values", _frozen(arr))

    @property
    def out_axes(self) -> tuple[int, ...]:
        nd = self.values.ndim
        return tuple(range(0, nd, 2)) if self.direction == CAUSAL else tuple(range(1, nd, 2))

    @property
    def cond_axes(self) -> tuple[int, ...]:
        nd = self.values.ndim
        return tuple(range(1, nd, 2)) if self.direction == CAUSAL else tuple(range(0, nd, 2))

    def rows(self) -> np.ndarray:
        """Matrix with one row per conditioning sequence (mixed-radix order)."""
        v = np.transpose(self.values, self.cond_axes + self.out_axes)
        n_cond = math.prod(self.values.shape[a] for a in self.cond_axes)
        return v.reshape(n_cond, -1)


def _check_nonanticipative(arr: np.ndarray, direction: str) -> None:
    # prefix masses must not depend on conditioning symbols that come later
    nd = arr.ndim
    first_out = 0 if direction == CAUSAL else 1
    for cut in range(first_out + 1, nd, 2):
        tail_out = tuple(a for a in range(cut, nd) if (a - first_out) % 2 == 0)
        m = arr.sum(axis=tail_out, keepdims=True)
        tail_cond = tuple(a for a in range(cut, nd) if (a - first_out) % 2 == 1)
        dev = np.max(np.abs(m - m.mean(axis=tail_cond, keepdims=True)))
        if dev > SUM_TOL:
            raise InvalidInstance(
                f"{direction} table is anticipative: prefix mass up to axis {cut} "
                f"varies by {dev:.3g} with later conditioning symbols"
            )


# ---------------------------------------------------------------- constructions

def expand_causal(policy: InputPolicy) -> ConditionalTable:
    """Multiply the input kernels into ``P(x^n || y^{n-1})``."""
    spec = policy.spec
    t = np.ones(())
    for i, p in enumerate(policy.kernels):
        t = t[..., None] * p
        if i < spec.horizon:
            t = np.repeat(t[..., None], spec.y_sizes[i], axis=-1)
    return ConditionalTable(spec, CAUSAL, t)


def expand_forward(channel: ForwardChannel) -> ConditionalTable:
    """Multiply the channel kernels into ``Q(y^n || x^n)``."""
    spec = channel.spec
    t = np.ones(())
    for i, q in enumerate(channel.kernels):
        t = np.repeat(t[..., None], spec.x_sizes[i], axis=-1)
        t = t[..., None] * q
    return ConditionalTable(spec, FORWARD, t)


def factorize(table: ConditionalTable) -> InputPolicy | ForwardChannel:
    """Recover per-step kernels from a causally conditioned product.

    Each kernel is the last-axis conditional of a prefix marginal.  Prefixes with
    zero mass get uniform rows.
    """
    spec, v = table.spec, table.values
    nd = v.ndim
    first_out = 0 if table.direction == CAUSAL else 1
    kernels = []
    for i in range(spec.horizon + 1):
        keep = 2 * i + 1 + first_out  # axes kept: history plus the step-i outcome
        m = v
        for ax in range(nd - 1, keep - 1, -1):
            if (ax - first_out) % 2 == 0:
                m = m.sum(axis=ax)
            else:
                m = m.mean(axis=ax)
        kernels.append(normalize_last(m))
    if table.direction == CAUSAL:
        return InputPolicy(spec, kernels)
    return ForwardChannel(spec, kernels)


def compose_joint(policy: InputPolicy, channel: ForwardChannel) -> JointMeasure:
    """Interleave input and channel kernels into the joint ``P(x^n, y^n)``."""
    if policy.spec != channel.spec:
        raise InvalidInstance("policy and channel are built on different instance specs")
    j = np.ones(())
    for p, q in zip(policy.kernels, channel.kernels):
        j = j[..., None] * p
        j = j[..., None] * q
    return JointMeasure(policy.spec, j)


def marginal_x(joint: JointMeasure) -> np.ndarray:
    """``mu(x^n)`` with shape ``x_sizes``."""
    return joint.table.sum(axis=joint.spec.y_axes)


def marginal_y(joint: JointMeasure) -> np.ndarray:
    """``nu(y^n)`` with shape ``y_sizes``."""
    return joint.table.sum(axis=joint.spec.x_axes)


def _step_conditionals(marg: np.ndarray) -> list[np.ndarray]:
    nd = marg.ndim
    out = []
    for i in range(nd):
        m = marg.sum(axis=tuple(range(i + 1, nd))) if i + 1 < nd else marg
        out.append(normalize_last(m))
    return out


def conditional_marginals(joint: JointMeasure) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-step output and input conditionals of a joint measure.

    Returns ``(nu_kernels, mu_kernels)`` where ``nu_kernels[i]`` has shape
    ``(Y_0, ..., Y_i)`` and holds ``nu(y_i | y^{i-1})``, and ``mu_kernels[i]``
    likewise for ``mu(x_i | x^{i-1})``.
    """
    return _step_conditionals(marginal_y(joint)), _step_conditionals(marginal_x(joint))


def product_of_conditionals(kernels: Sequence[np.ndarray]) -> np.ndarray:
    """Inverse of the per-step split: multiply ``k_i(z_i | z^{i-1})`` back together."""
    t = np.ones(())
    for k in kernels:
        t = t[..., None] * k
    return t


def pi_forward(policy_table: ConditionalTable, nu) -> JointMeasure:
    """Reference measure ``P(x^n || y^{n-1}) nu(y^n)``."""
    if policy_table.direction != CAUSAL:
        raise InvalidInstance("pi_forward needs a causal_input table")
    spec = policy_table.spec
    nu = _as_marginal(nu, spec.y_sizes)
    return JointMeasure(spec, policy_table.values[..., None] * spec.spread_y(nu))


def pi_backward(mu, channel_table: ConditionalTable) -> JointMeasure:
    """Reference measure ``mu(x^n) Q(y^n || x^n)``."""
    if channel_table.direction != FORWARD:
        raise InvalidInstance("pi_backward needs a forward table")
    spec = channel_table.spec
    mu = _as_marginal(mu, spec.x_sizes)
    return JointMeasure(spec, spec.spread_x(mu) * channel_table.values)


def _as_marginal(values, sizes: tuple[int, ...]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size != math.prod(sizes):
        raise InvalidInstance(f"marginal has {arr.size} cells, expected {math.prod(sizes)}")
    return as_pmf(arr.reshape(-1)).reshape(sizes)


def kl_divergence(p, q) -> float:
    """Relative entropy ``D(p || q)`` in bits.

    ``0 log(0/q) = 0``; a cell with ``p > 0`` and ``q = 0`` makes the result
    ``math.inf``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        if p.size != q.size:
            raise ValueError(f"support mismatch: {p.shape} vs {q.shape}")
        q = q.reshape(p.shape)
    mask = p > 0
    if np.any(q[mask] <= 0):
        return math.inf
    pm = p[mask]
    return float(np.sum(pm * np.log2(pm / q[mask])))


def mix_conditional(a: ConditionalTable, b: ConditionalTable, lam: float) -> ConditionalTable:
    """Row-wise mixture ``lam * a + (1 - lam) * b`` of two conditional tables."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mixture weight {lam!r} outside [0, 1]")
    if a.spec != b.spec or a.direction != b.direction:
        raise InvalidInstance("cannot mix tables with different specs or directions")
    return ConditionalTable(a.spec, a.direction, lam * a.values + (1 - lam) * b.values)
