"""Exhaustive grid oracles for feedback capacity and nonanticipative rate distortion.

Every kernel row is restricted to the simplex grid with step ``1/m`` and all
combinations are enumerated.  Directed information is evaluated by a batched
conditional-mutual-information sum that shares no code with the solvers.

For the unconstrained capacity oracle the last input kernel is optimized
separately for each output history ``y^{n-1}``: the last summand
``I(X^n; Y_n | Y^{n-1})`` splits over ``y^{n-1}`` and no earlier summand depends on
``p_n``, so this is still an exact grid maximum, just enumerated blockwise.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .extremum import DistortionSpec, PowerSpec
from .measures import ForwardChannel, InputPolicy, InstanceSpec, InvalidInstance

MAX_CANDIDATES = 10**7
CHUNK = 4096


def simplex_grid(k: int, m: int) -> np.ndarray:
    """All points of the ``k``-simplex with coordinates in ``{0, 1/m, ..., 1}``."""
    pts = []
    for bars in itertools.combinations(range(m + k - 1), k - 1):
        edges = (-1,) + bars + (m + k - 1,)
        pts.append([edges[j + 1] - edges[j] - 1 for j in range(k)])
    return np.array(pts, dtype=float) / m


def _batched_di(p_list, q_list) -> np.ndarray:
    """``sum_i I(X^i; Y_i | Y^{i-1})`` for kernels carrying a leading batch axis."""
    w = None
    total = 0.0
    for p, q in zip(p_list, q_list):
        w = p if w is None else w[..., None] * p
        wq = w[..., None] * q
        x_axes = tuple(range(1, wq.ndim, 2))
        y_joint = wq.sum(axis=x_axes, keepdims=True)
        y_prev = y_joint.sum(axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = q * y_prev / y_joint
            terms = np.where(wq > 0, wq * np.log2(ratio), 0.0)
        total = total + terms.reshape(terms.shape[0], -1).sum(axis=1)
        w = wq
    return total


def _kernel_rows(spec: InstanceSpec, i: int, side: str) -> tuple[int, int]:
    if side == "x":
        shape = spec.input_kernel_shape(i)
    else:
        shape = spec.channel_kernel_shape(i)
    return math.prod(shape[:-1]), shape[-1]


def _enumerate_kernels(spec: InstanceSpec, side: str, m: int):
    """Yield batches of kernel lists covering every grid combination.

    ``side`` is ``"x"`` for input kernels and ``"y"`` for channel kernels.
    """
    n1 = spec.horizon + 1
    grids, rows, shapes = [], [], []
    for i in range(n1):
        r, k = _kernel_rows(spec, i, side)
        grids.append(simplex_grid(k, m))
        rows.append(r)
        shapes.append(spec.input_kernel_shape(i) if side == "x" else spec.channel_kernel_shape(i))
    radices = [len(grids[i]) for i in range(n1) for _ in range(rows[i])]
    total = math.prod(radices)
    if total > MAX_CANDIDATES:
        raise ValueError(f"grid enumeration needs {total} candidates, above {MAX_CANDIDATES}")
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(total, start + CHUNK))
        digits = []
        for r in reversed(radices):
            digits.append(idx % r)
            idx = idx // r
        digits.reverse()
        out, pos = [], 0
        for i in range(n1):
            d = np.stack(digits[pos: pos + rows[i]], axis=1)  # (B, rows)
            pos += rows[i]
            out.append(grids[i][d].reshape((-1,) + shapes[i]))
        yield out


def _batched_mean_cost(p_list, q_list, per_letter) -> np.ndarray:
    """Average per-letter cost; ``per_letter[i]`` indexes ``x_i`` or ``(x_i, y_i)``."""
    w = None
    total = 0.0
    for i, (p, q) in enumerate(zip(p_list, q_list)):
        w = p if w is None else w[..., None] * p
        wq = w[..., None] * q
        c = per_letter[i]
        if c.ndim == 1:
            c = c[:, None]
        total = total + (wq * c).reshape(wq.shape[0], -1).sum(axis=1)
        w = wq
    return total / len(p_list)


def brute_force_capacity(channel: ForwardChannel, m: int, power: PowerSpec | None = None) -> float:
    """Largest per-symbol directed information over grid policies."""
    spec = channel.spec
    if power is not None:
        return _full_capacity(channel, m, power)
    n = spec.horizon
    q_batch = [q[None] for q in channel.kernels]
    # enumerate p_0..p_{n-1} jointly
    prefix_grids = []
    for i in range(n):
        r, k = _kernel_rows(spec, i, "x")
        prefix_grids.append((r, simplex_grid(k, m)))
    n_prefix = math.prod(len(g) ** r for r, g in prefix_grids)
    last_grid = simplex_grid(spec.x_sizes[n], m)
    k_hist = math.prod(spec.x_sizes[:n])
    n_ycond = math.prod(spec.y_sizes[:n])
    n_block = len(last_grid) ** k_hist
    if n_prefix * n_ycond * n_block > MAX_CANDIDATES:
        raise ValueError(
            f"grid enumeration needs {n_prefix * n_ycond * n_block} candidates, above {MAX_CANDIDATES}"
        )
    blocks = last_grid[np.array(list(itertools.product(range(len(last_grid)), repeat=k_hist)))]
    # blocks: (B2, K, X_n)
    q_last = channel.kernels[n]
    x_ax = tuple(range(0, 2 * n, 2))
    y_ax = tuple(range(1, 2 * n, 2))
    q_last = np.transpose(q_last, y_ax + x_ax + (2 * n, 2 * n + 1)).reshape(
        n_ycond, k_hist, spec.x_sizes[n], spec.y_sizes[n]
    )
    best = -math.inf
    prefix_iter = _prefix_batches(spec, prefix_grids) if n > 0 else [[]]
    for p_prefix in prefix_iter:
        if n > 0:
            b1 = p_prefix[0].shape[0]
            head = _batched_di(p_prefix, q_batch[:n])
            w = None
            for p, q in zip(p_prefix, q_batch[:n]):
                w = p if w is None else w[..., None] * p
                w = w[..., None] * q
            w = np.transpose(w, (0,) + tuple(a + 1 for a in y_ax + x_ax)).reshape(b1, n_ycond, k_hist)
        else:
            b1 = 1
            head = np.zeros(1)
            w = np.ones((1, 1, 1))
        tail = np.zeros(b1)
        for yc in range(n_ycond):
            weight = w[:, yc, :].sum(axis=1)  # (B1,)
            post = np.where(weight[:, None] > 0, w[:, yc, :] / np.where(weight > 0, weight, 1)[:, None], 0)
            tail += weight * _best_block_mi(post, blocks, q_last[yc])
        best = max(best, float(np.max(head + tail)))
    return best / (n + 1)


def _prefix_batches(spec, prefix_grids):
    radices = [len(g) for r, g in prefix_grids for _ in range(r)]
    total = math.prod(radices)
    chunk = max(1, CHUNK // 64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        digits = []
        for r in reversed(radices):
            digits.append(idx % r)
            idx = idx // r
        digits.reverse()
        out, pos = [], 0
        for i, (rows, g) in enumerate(prefix_grids):
            d = np.stack(digits[pos: pos + rows], axis=1)
            pos += rows
            out.append(g[d].reshape((-1,) + spec.input_kernel_shape(i)))
        yield out


def _best_block_mi(post: np.ndarray, blocks: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``max_block I((X^{n-1}, X_n); Y_n)`` for each row of ``post``.

    ``post`` is ``(B1, K)``, ``blocks`` ``(B2, K, X)``, ``q`` ``(K, X, Y)``.
    """
    out = np.empty(post.shape[0])
    for b in range(post.shape[0]):
        joint = post[b][None, :, None, None] * blocks[..., None] * q[None]  # (B2, K, X, Y)
        y = joint.sum(axis=(1, 2), keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(joint > 0, joint * np.log2(q[None] / y), 0.0)
        out[b] = terms.reshape(len(blocks), -1).sum(axis=1).max()
    return out


def _full_capacity(channel: ForwardChannel, m: int, power: PowerSpec) -> float:
    spec = channel.spec
    q_batch = [q[None] for q in channel.kernels]
    best = -math.inf
    for p_list in _enumerate_kernels(spec, "x", m):
        cost = _batched_mean_cost(p_list, q_batch, power.costs)
        ok = cost <= power.budget + 1e-12
        if not np.any(ok):
            continue
        di = _batched_di(p_list, q_batch)
        best = max(best, float(np.max(di[ok])))
    if best == -math.inf:
        raise ValueError("no grid policy meets the power budget")
    return best / (spec.horizon + 1)


def brute_force_nrdf(source: InputPolicy, dist: DistortionSpec, budget: float | None = None, m: int = 64) -> float:
    """Smallest per-symbol directed information over grid channels meeting the budget."""
    spec = source.spec
    if not source.ignores_outputs(tol=1e-12):
        raise InvalidInstance("source kernels depend on past reproductions")
    budget = dist.budget if budget is None else budget
    p_batch = [p[None] for p in source.kernels]
    best = math.inf
    for q_list in _enumerate_kernels(spec, "y", m):
        d = _batched_mean_cost(p_batch, q_list, dist.tables)
        ok = d <= budget + 1e-12
        if not np.any(ok):
            continue
        di = _batched_di(p_batch, q_list)
        best = min(best, float(np.min(di[ok])))
    if best == math.inf:
        raise ValueError("no grid channel meets the distortion budget")
    return best / (spec.horizon + 1)
