"""Seeded randomized property suites for directed information.

Every suite draws one independent instance per trial (see :mod:`diflow.sampling`),
computes a *margin* that is nonnegative when the property holds, and counts a
violation when the margin drops below ``-VIOLATION_TOL``.  Identity checks use
``-|error|`` as their margin, so ``worst_margin`` is the largest error seen.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .directed import (
    ABS_SLACK,
    di_abs,
    di_cmi_sum,
    di_divergence,
    di_logratio,
    di_partition_sup,
    di_reverse,
    directed_information,
    mutual_information,
)
from .measures import (
    ConditionalTable,
    ForwardChannel,
    InputPolicy,
    InstanceSpec,
    compose_joint,
    expand_causal,
    expand_forward,
    factorize,
    marginal_x,
    marginal_y,
    mix_conditional,
)
from .sampling import (
    random_channel,
    random_instance,
    random_nu,
    random_policy,
    random_reverse_decomposition,
)
from .variational import (
    gap_A,
    gap_B,
    lambda_deviation,
    objective_A,
    objective_B,
    optimal_nu,
    optimal_reverse_decomposition,
    reciprocity_check,
)

VIOLATION_TOL = 1e-9
STRICT_MARGIN = 1e-12
ALPHAS = tuple(2 ** k for k in range(1, 11))


@dataclass
class PropertyReport:
    property_name: str
    trials: int
    violations: int
    worst_margin: float
    seed: int
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        worst = self.worst_margin if math.isfinite(self.worst_margin) else None
        return {
            "property_name": self.property_name,
            "trials": self.trials,
            "violations": self.violations,
            "worst_margin": worst,
            "seed": self.seed,
            "extras": self.extras,
        }


class _Tally:
    def __init__(self, name: str, seed: int):
        self.name, self.seed = name, seed
        self.trials = 0
        self.violations = 0
        self.worst = math.inf
        self.extras: dict = {}

    def add(self, margin: float) -> None:
        self.trials += 1
        if math.isnan(margin) or margin < -VIOLATION_TOL:
            self.violations += 1
        if not math.isnan(margin):
            self.worst = min(self.worst, margin)
        else:
            self.worst = -math.inf

    def report(self) -> PropertyReport:
        return PropertyReport(self.name, self.trials, self.violations, self.worst, self.seed, self.extras)


def _identity_margin(a: float, b: float) -> float:
    if math.isinf(a) or math.isinf(b):
        return 0.0 if a == b else -math.inf
    return -abs(a - b)


def mix_channels(q1: ForwardChannel, q2: ForwardChannel, lam: float) -> ForwardChannel:
    """Mixture of the full forward tables, refactored into kernels."""
    return factorize(mix_conditional(expand_forward(q1), expand_forward(q2), lam))


def mix_policies(p1: InputPolicy, p2: InputPolicy, lam: float) -> InputPolicy:
    return factorize(mix_conditional(expand_causal(p1), expand_causal(p2), lam))


def mix_kernelwise(q1: ForwardChannel, q2: ForwardChannel, lam: float) -> ForwardChannel:
    """Kernel-by-kernel averaging; not the same as :func:`mix_channels` once n >= 1."""
    return ForwardChannel(q1.spec, [lam * a + (1 - lam) * b for a, b in zip(q1.kernels, q2.kernels)])


# ------------------------------------------------------------------ route agreement

def check_route_equivalence(spec: InstanceSpec | None = None, trials: int = 1000, seed: int = 0) -> PropertyReport:
    """Pairwise agreement of the three directed-information routes, per step and total."""
    t = _Tally("route_equivalence", seed)
    for k in range(trials):
        _, _, p, q = random_instance(seed, k, spec)
        reports = [di_cmi_sum(p, q), di_divergence(p, q), di_logratio(p, q)]
        err = 0.0
        for a in range(3):
            for b in range(a + 1, 3):
                ra, rb = reports[a], reports[b]
                err = max(err, abs(ra.total_bits - rb.total_bits))
                err = max(err, max(abs(x - y) for x, y in zip(ra.per_step_bits, rb.per_step_bits)))
        t.add(-err)
    return t.report()


def check_conservation(spec: InstanceSpec | None = None, trials: int = 1000, seed: int = 0) -> PropertyReport:
    """``I(X^n; Y^n) = I(X^n -> Y^n) + sum_i I(Y^{i-1}; X_i | X^{i-1})``."""
    t = _Tally("conservation", seed)
    for k in range(trials):
        _, _, p, q = random_instance(seed, k, spec)
        mi = mutual_information(compose_joint(p, q))
        t.add(-abs(mi - di_cmi_sum(p, q).total_bits - di_reverse(p, q).total_bits))
    return t.report()


# ------------------------------------------------------------------ convexity family

def check_convexity_in_Q(spec: InstanceSpec | None = None, trials: int = 1000, seed: int = 0) -> PropertyReport:
    t = _Tally("convexity_in_Q", seed)
    for k in range(trials):
        rng, s, p, q1 = random_instance(seed, k, spec)
        q2 = random_channel(rng, s)
        lam = float(rng.random())
        mixed = directed_information(p, mix_channels(q1, q2, lam))
        bound = lam * directed_information(p, q1) + (1 - lam) * directed_information(p, q2)
        t.add(bound - mixed)
    return t.report()


def check_concavity_in_P(spec: InstanceSpec | None = None, trials: int = 1000, seed: int = 0) -> PropertyReport:
    t = _Tally("concavity_in_P", seed)
    for k in range(trials):
        rng, s, p1, q = random_instance(seed, k, spec)
        p2 = random_policy(rng, s)
        lam = float(rng.random())
        mixed = directed_information(mix_policies(p1, p2, lam), q)
        bound = lam * directed_information(p1, q) + (1 - lam) * directed_information(p2, q)
        t.add(mixed - bound)
    return t.report()


def _supported_rows_differ(p: InputPolicy, t1: ConditionalTable, t2: ConditionalTable, lam: float) -> bool:
    """Do the forward tables differ on some ``x^n`` reachable under ``P`` and the mixture?"""
    mixed = mix_conditional(t1, t2, lam)
    mu = marginal_x(compose_joint(p, factorize(mixed)))
    diff = np.abs(t1.values - t2.values)
    diff = diff.max(axis=p.spec.y_axes)  # one number per x^n
    return bool(np.any((mu > 0) & (diff > STRICT_MARGIN)))


def logsum_equality(p: InputPolicy, q1: ForwardChannel, q2: ForwardChannel, rtol: float = 1e-9) -> bool:
    """True when ``Q1 / nu1 == Q2 / nu2`` on every supported cell.

    This is exactly the case where mixing the two channels leaves no convexity
    gap, because each cell of the log-sum inequality is then tight.
    """
    spec = p.spec
    ptab = expand_causal(p).values[..., None]
    ratios, masses = [], []
    for q in (q1, q2):
        qt = expand_forward(q).values
        nu = spec.spread_y(marginal_y(compose_joint(p, q)))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios.append(np.where(nu > 0, qt / nu, np.nan))
        masses.append(ptab * nu)
    both = (masses[0] > 0) & (masses[1] > 0)
    r1, r2 = np.broadcast_arrays(ratios[0], ratios[1])
    r1, r2 = r1[both], r2[both]
    return bool(np.all(np.abs(r1 - r2) <= rtol * np.maximum(np.abs(r1), np.abs(r2)) + 1e-12))


def check_strict_convexity(spec: InstanceSpec | None = None, trials: int = 500, seed: int = 0) -> PropertyReport:
    """Strict convexity in the channel whenever the mixed tables differ on supported rows.

    ``extras`` records how many eligible trials failed to show a strict gap and
    how many of those satisfy the log-sum equality condition (so no strict gap
    is possible there at all).
    """
    t = _Tally("strict_convexity_in_Q", seed)
    eligible = strict_failures = explained = 0
    for k in range(trials):
        rng, s, p, q1 = random_instance(seed, k, spec)
        q2 = random_channel(rng, s)
        lam = float(rng.uniform(0.1, 0.9))
        t1, t2 = expand_forward(q1), expand_forward(q2)
        if not _supported_rows_differ(p, t1, t2, lam):
            continue
        eligible += 1
        mixed = directed_information(p, factorize(mix_conditional(t1, t2, lam)))
        gap = lam * directed_information(p, q1) + (1 - lam) * directed_information(p, q2) - mixed
        t.add(gap)
        if not gap > STRICT_MARGIN:
            strict_failures += 1
            explained += logsum_equality(p, q1, q2)
    t.extras.update(
        sampled=trials,
        eligible=eligible,
        strict_failures=strict_failures,
        failures_with_logsum_equality=explained,
    )
    return t.report()


# ------------------------------------------------------------------ limits along paths

def _binary_entropy(x: float) -> float:
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def entropy_continuity_bound(tv: float, support: int) -> float:
    """Largest ``|H(a) - H(b)|`` for pmfs on ``support`` points at total variation ``tv``."""
    if support <= 1:
        return 0.0
    if tv >= 1 - 1 / support:
        return math.log2(support)
    return tv * math.log2(support - 1) + _binary_entropy(tv)


def _di_entropy_terms(spec: InstanceSpec):
    """Marginal axis sets and signs writing DI as a sum of joint entropies.

    ``I(X^n -> Y^n) = H(Y^n) - H(X^n, Y^n) + sum_i [H(X^i, Y^{i-1}) - H(X^{i-1}, Y^{i-1})]``.
    """
    full = tuple(range(2 * spec.horizon + 2))
    terms = [(spec.y_axes, 1), (full, -1)]
    for i in range(spec.horizon + 1):
        terms.append((tuple(range(2 * i + 1)), 1))
        if i > 0:
            terms.append((tuple(range(2 * i)), -1))
    return terms


def di_continuity_radius(j0: np.ndarray, j1: np.ndarray, spec: InstanceSpec) -> float:
    """Upper bound on ``|DI(j0) - DI(j1)|`` from entropy continuity of each term."""
    total = 0.0
    for axes, _sign in _di_entropy_terms(spec):
        drop = tuple(a for a in range(j0.ndim) if a not in axes)
        m0, m1 = j0.sum(axis=drop), j1.sum(axis=drop)
        tv = 0.5 * float(np.abs(m0 - m1).sum())
        total += entropy_continuity_bound(min(tv, 1.0), m0.size)
    return total


def channel_path(q0: ForwardChannel, alpha: float, target: ForwardChannel | None = None) -> ForwardChannel:
    """``(1 - 1/alpha) Q0 + (1/alpha) U`` on full tables (``U`` uniform unless given)."""
    target = ForwardChannel.uniform(q0.spec) if target is None else target
    return mix_channels(q0, target, 1.0 - 1.0 / alpha)


def check_semicontinuity_paths(spec: InstanceSpec | None = None, trials: int = 500, seed: int = 0) -> PropertyReport:
    """``DI(P, Q0) <= min_{a' >= a} DI(P, Q^a') + delta(a)`` along mixture paths.

    ``delta`` is the entropy-continuity radius, which tends to zero with ``1/a``.
    ``extras["modulus"]`` lists the worst ``|DI(Q^a) - DI(Q0)|`` for each ``a``.
    """
    t = _Tally("semicontinuity_paths", seed)
    modulus = [0.0] * len(ALPHAS)
    for k in range(trials):
        _, _, p, q0 = random_instance(seed, k, spec)
        base = directed_information(p, q0)
        j0 = compose_joint(p, q0).table
        values, radii = [], []
        for a in ALPHAS:
            qa = channel_path(q0, a)
            values.append(directed_information(p, qa))
            radii.append(di_continuity_radius(j0, compose_joint(p, qa).table, p.spec))
        margin = math.inf
        for idx in range(len(ALPHAS)):
            tail = min(values[idx:])
            margin = min(margin, tail + radii[idx] - base)
            modulus[idx] = max(modulus[idx], abs(values[idx] - base))
        t.add(margin)
    t.extras["alphas"] = list(ALPHAS)
    t.extras["modulus"] = modulus
    return t.report()


def path_deviations(p: InputPolicy, q0: ForwardChannel, alpha: float) -> tuple[float, float, float]:
    """Max-norm deviations of the joint and both marginals at ``alpha``."""
    j0 = compose_joint(p, q0)
    ja = compose_joint(p, channel_path(q0, alpha))
    return (
        float(np.max(np.abs(ja.table - j0.table))),
        float(np.max(np.abs(marginal_x(ja) - marginal_x(j0)))),
        float(np.max(np.abs(marginal_y(ja) - marginal_y(j0)))),
    )


def check_composition_continuity(spec: InstanceSpec | None = None, trials: int = 500, seed: int = 0) -> PropertyReport:
    """Deviations along mixture paths stay below ``C / alpha`` with ``C`` fit at ``alpha = 2``."""
    t = _Tally("composition_continuity", seed)
    worst_c = 0.0
    for k in range(trials):
        _, _, p, q0 = random_instance(seed, k, spec)
        devs = [path_deviations(p, q0, a) for a in ALPHAS]
        consts = [ALPHAS[0] * d for d in devs[0]]
        worst_c = max(worst_c, *consts)
        margin = math.inf
        for a, d in zip(ALPHAS, devs):
            for c, v in zip(consts, d):
                margin = min(margin, c / a + 1e-12 - v)
        t.add(margin)
    t.extras["max_constant"] = worst_c
    return t.report()


# ------------------------------------------------------------------ bounds and identities

def check_sandwich_bound(spec: InstanceSpec | None = None, trials: int = 1000, seed: int = 0) -> PropertyReport:
    """``DI <= E|log ratio| <= DI + 2/(e ln 2)``."""
    t = _Tally("sandwich_bound", seed)
    for k in range(trials):
        _, _, p, q = random_instance(seed, k, spec)
        d, a = directed_information(p, q), di_abs(p, q)
        t.add(min(a - d, d + ABS_SLACK - a))
    return t.report()


def check_variational_identities(spec: InstanceSpec | None = None, trials: int = 1000, seed: int = 0) -> PropertyReport:
    """Both variational gap identities on random references, and both achievers.

    The worst error of each identity is reported separately in ``extras``.
    """
    t = _Tally("variational_identities", seed)
    worst = dict(gap_A=0.0, below_di_A=0.0, achiever_A=0.0, gap_B=0.0, achiever_B=0.0, lambda_B=0.0, reciprocity_B=0.0)
    for k in range(trials):
        rng, s, p, q = random_instance(seed, k, spec)
        di = directed_information(p, q)
        # output-reference form
        nu_bar = random_nu(rng, s, vertex_prob=0.1)
        obj_a = objective_A(p, q, nu_bar)
        m_gap_a = _identity_margin(obj_a, di + gap_A(p, q, nu_bar))
        m_below = obj_a - di
        m_ach_a = _identity_margin(objective_A(p, q, optimal_nu(p, q)), di)
        # reverse-decomposition form
        sr = random_reverse_decomposition(rng, s, vertex_prob=0.1)
        obj_b = objective_B(p, q, sr)
        m_gap_b = _identity_margin(obj_b, di - gap_B(p, q, sr))
        best = optimal_reverse_decomposition(p, q)
        m_ach_b = _identity_margin(objective_B(p, q, best), di)
        m_lam = -lambda_deviation(p, q, best)
        m_rec = -reciprocity_check(p, q, best).max_deviation
        margins = dict(
            gap_A=m_gap_a, below_di_A=m_below, achiever_A=m_ach_a,
            gap_B=m_gap_b, achiever_B=m_ach_b, lambda_B=m_lam, reciprocity_B=m_rec,
        )
        for key, m in margins.items():
            worst[key] = min(worst[key], m)
        t.add(min(margins.values()))
    t.extras["worst_by_identity"] = worst
    return t.report()


def random_partition(rng: np.random.Generator, n_cells: int, blocks: int) -> list[list[int]]:
    labels = rng.integers(0, blocks, size=n_cells)
    return [np.flatnonzero(labels == b).tolist() for b in range(blocks) if np.any(labels == b)]


def refine(rng: np.random.Generator, partition: list[list[int]]) -> list[list[int]]:
    """Split each block at random into at most two pieces."""
    out = []
    for block in partition:
        mask = rng.random(len(block)) < 0.5
        for piece in (np.asarray(block)[mask], np.asarray(block)[~mask]):
            if piece.size:
                out.append(piece.tolist())
    return out


def check_partition_supremum(spec: InstanceSpec | None = None, trials: int = 500, seed: int = 0) -> PropertyReport:
    """Finest partition recovers DI; coarser ones never exceed it; refinement never lowers it.

    ``extras`` carries the worst finest-partition error and the worst
    refinement margin separately.
    """
    t = _Tally("partition_supremum", seed)
    worst_fine = worst_ref = 0.0
    for k in range(trials):
        rng, s, p, q = random_instance(seed, k, spec)
        cells = s.cells
        finest = di_partition_sup(p, q, [[c] for c in range(cells)])
        target = di_divergence(p, q).total_bits
        m_fine = _identity_margin(finest, target)
        coarse = random_partition(rng, cells, int(rng.integers(1, cells + 1)))
        m_coarse = target - di_partition_sup(p, q, coarse)
        fine = refine(rng, coarse)
        m_ref = di_partition_sup(p, q, fine) - di_partition_sup(p, q, coarse)
        worst_fine, worst_ref = min(worst_fine, m_fine), min(worst_ref, m_ref)
        t.add(min(m_fine, m_coarse, m_ref))
    t.extras.update(worst_finest=worst_fine, worst_refinement=worst_ref)
    return t.report()


SUITES: dict[str, tuple[Callable[..., PropertyReport], int]] = {
    "route_equivalence": (check_route_equivalence, 1000),
    "conservation": (check_conservation, 1000),
    "convexity_in_Q": (check_convexity_in_Q, 1000),
    "concavity_in_P": (check_concavity_in_P, 1000),
    "strict_convexity_in_Q": (check_strict_convexity, 500),
    "semicontinuity_paths": (check_semicontinuity_paths, 500),
    "composition_continuity": (check_composition_continuity, 500),
    "sandwich_bound": (check_sandwich_bound, 1000),
    "variational_identities": (check_variational_identities, 1000),
    "partition_supremum": (check_partition_supremum, 500),
}


def run_all(
    spec: InstanceSpec | None = None, trials: int | None = None, seed: int = 0, names=None
) -> list[PropertyReport]:
    """Run the named suites (all by default) in a fixed order."""
    names = list(SUITES) if names is None else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown property suites: {unknown}")
    out = []
    for name in names:
        fn, default = SUITES[name]
        out.append(fn(spec, default if trials is None else trials, seed))
    return out


def strict_failure_count(report: PropertyReport) -> int:
    return int(report.extras.get("strict_failures", 0))


__all__ = [
    "PropertyReport",
    "VIOLATION_TOL",
    "ALPHAS",
    "check_route_equivalence",
    "check_conservation",
    "check_convexity_in_Q",
    "check_concavity_in_P",
    "check_strict_convexity",
    "check_semicontinuity_paths",
    "check_composition_continuity",
    "check_sandwich_bound",
    "check_variational_identities",
    "check_partition_supremum",
    "mix_channels",
    "mix_policies",
    "mix_kernelwise",
    "channel_path",
    "path_deviations",
    "logsum_equality",
    "entropy_continuity_bound",
    "di_continuity_radius",
    "run_all",
    "SUITES",
]
