"""Numeric and statistical checks of constructed families."""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from construct import CERTIFICATE_TOLERANCE, HeavyFamily, Policy, recompute_certificates
from errors import CheckFailure, HorizonError
from hypernum import Hypernum, hsum, relative_residual, relative_slack
from targets import HazardPoint, ProbeConfig, TargetDistribution, hazard_trace, resolve_probes

log = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-12
# stored and recomputed certificates come from the same arithmetic
CERTIFICATE_MATCH = 1e-9
# extra risk the horizon must cover beyond log(n_samples)
SAMPLING_MARGIN = 20.0


def subset_label(subset) -> str:
    return ','.join(str(i) for i in sorted(subset))


def _chunks(items, parts):
    parts = max(1, min(parts, len(items)))
    size = math.ceil(len(items) / parts)
    return [items[i:i + size] for i in range(0, len(items), size)]


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_family(fam: HeavyFamily, n_samples: int, seed: int, workers: int = 1,
                  margin: float = SAMPLING_MARGIN) -> np.ndarray:
    """Inverse-transform samples, one row per component.

    ``SeedSequence(seed).spawn(n)`` gives component i its own stream, so the
    output does not depend on ``workers``.
    """
    if n_samples < 1:
        raise ValueError(f'n_samples must be positive, got {n_samples}')
    needed = math.log(n_samples) + margin
    for i, R in enumerate(fam.risks, start=1):
        if R.horizon_risk < needed:
            raise HorizonError(
                f'component {i} reaches risk {R.horizon_risk} at the horizon, '
                f'but {n_samples} samples need risk up to {needed:.3f}; extend the plan',
                required_risk=Hypernum(needed))
    streams = np.random.SeedSequence(seed).spawn(fam.n)

    def draw(i):
        rng = np.random.default_rng(streams[i])
        u = rng.random(n_samples)
        # u = 0 would map to risk 0 and the support start
        u[u == 0.0] = np.nextafter(0.0, 1.0)
        x = fam.risks[i].inverse_array(-np.log1p(-u))
        beyond = int(np.count_nonzero(np.isinf(x)))
        if beyond:
            log.warning('component %d: %d sample(s) lie beyond the float range, reported as inf', i + 1, beyond)
        return x

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(draw, range(fam.n)))
    return np.vstack(rows)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov
# ---------------------------------------------------------------------------

def _sorted_cdf(samples, target: TargetDistribution):
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError('KS statistic needs at least one sample')
    return target.cdf_array(x), x.size


def ks_statistic(samples, target: TargetDistribution) -> float:
    """Two-sided D = sup |F_emp - F| by the sorted-sample formula."""
    cdf, n = _sorted_cdf(samples, target)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def ks_one_sided(samples, target: TargetDistribution) -> float:
    """sup (F - F_emp): how far the sample sits to the right of F."""
    cdf, n = _sorted_cdf(samples, target)
    i = np.arange(1, n + 1)
    return float(max(0.0, np.max(cdf - (i - 1) / n)))


def ks_critical(n: int, significance: float = 0.01, two_sided: bool = True) -> float:
    """Asymptotic critical value of D at the given significance."""
    if not 0.0 < significance < 1.0:
        raise ValueError(f'significance must lie in (0, 1), got {significance}')
    if two_sided:
        return float(stats.kstwobign.isf(significance)) / math.sqrt(n)
    return math.sqrt(-math.log(significance) / 2.0) / math.sqrt(n)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    n: int
    critical: float
    significance: float
    two_sided: bool

    @property
    def passed(self) -> bool:
        return self.statistic <= self.critical


def ks_test(samples, target: TargetDistribution, significance: float = 0.01,
            two_sided: bool = True) -> KSResult:
    samples = np.asarray(samples, dtype=float).ravel()
    d = ks_statistic(samples, target) if two_sided else ks_one_sided(samples, target)
    return KSResult(d, samples.size, ks_critical(samples.size, significance, two_sided),
                    significance, two_sided)


# ---------------------------------------------------------------------------
# Grid sweeps
# ---------------------------------------------------------------------------

def evaluation_grid(fam: HeavyFamily, points: int = 10_000) -> list[Hypernum]:
    """Grid up to the horizon: linear and log-spaced points inside every interval."""
    if points < 2:
        raise ValueError(f'grid needs at least 2 points, got {points}')
    if fam.plan is None:
        return [Hypernum(float(x)) for x in np.geomspace(1e-3, 1e6, points)]
    bps = fam.plan.breakpoints
    # same share of points per interval, half linear and half log-spaced
    per = max(2, points // len(fam.plan.frozen_sets))
    fractions = np.linspace(0.0, 1.0, per // 2 + 1)[1:]
    grid = []
    for a, b in zip(bps, bps[1:]):
        width = b - a
        grid.extend(a + width * float(t) for t in fractions)
        if a > 0:
            # linear points bunch at the right end of wide intervals
            la, lb = a.log(), b.log()
            grid.extend((la + (lb - la) * float(t)).exp() for t in fractions)
    return sorted(set(p for p in grid if p <= bps[-1]))


@dataclass(frozen=True)
class MinimumCheck:
    subset: tuple[int, ...]
    kind: str
    value: float
    worst_x: Hypernum | None
    points: int

    @property
    def passed(self) -> bool:
        if self.kind == 'exactness':
            return self.value <= EXACT_TOLERANCE
        return self.value >= -EXACT_TOLERANCE


def _check_subset(fam: HeavyFamily, subset) -> tuple[int, ...]:
    subset = tuple(sorted(int(i) for i in subset))
    if len(set(subset)) != len(subset) or any(not 1 <= i <= fam.n for i in subset):
        raise ValueError(f'subset {subset} must hold distinct indices in 1..{fam.n}')
    return subset


def check_minimum_distribution(fam: HeavyFamily, subset, grid=None, workers: int = 1) -> MinimumCheck:
    """Exactness (sum of all n risks is R_F, n == k) or dominance (sum >= R_F)."""
    subset = _check_subset(fam, subset)
    if len(subset) == fam.k - 1:
        raise ValueError(f'subset {subset} has size k-1 = {fam.k - 1}: it is a frozen set, '
                         f'use divergence_certificate for it')
    if len(subset) != fam.k:
        raise ValueError(f'subset {subset} has size {len(subset)}, the minimum law is checked on k = {fam.k}')
    exact = fam.n == fam.k
    grid = evaluation_grid(fam) if grid is None else [Hypernum.of(x) for x in grid]
    if not grid:
        raise ValueError('evaluation grid is empty')
    risks = [fam.risks[i - 1] for i in subset]
    target = fam.target

    def sweep(xs):
        # exactness tracks the largest residual, dominance the smallest slack
        sign = -1.0 if exact else 1.0
        worst, worst_x = math.inf, None
        for x in xs:
            total = hsum(R.risk(x) for R in risks)
            v = relative_residual(total, target.risk(x)) if exact else relative_slack(total, target.risk(x))
            if sign * v < worst:
                worst, worst_x = sign * v, x
        return sign * worst, worst_x

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(sweep, _chunks(grid, workers)))
    pick = max if exact else min
    value, worst_x = pick(parts, key=lambda p: p[0])
    return MinimumCheck(subset, 'exactness' if exact else 'dominance', value, worst_x, len(grid))


def component_bound(fam: HeavyFamily, grid=None) -> float:
    """max over components and grid of the relative excess of R_i over R_F."""
    grid = evaluation_grid(fam) if grid is None else [Hypernum.of(x) for x in grid]
    worst = -math.inf
    # R_i <= R_F holds for every component, frozen or tracking
    for R in fam.risks:
        for x in grid:
            worst = max(worst, relative_slack(R.risk(x), fam.target.risk(x)))
    return worst


# ---------------------------------------------------------------------------
# Certificates and hazard diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DivergenceBound:
    subset: tuple[int, ...]
    residue: int
    intervals: int
    count: int
    bound: Hypernum

    @property
    def passed(self) -> bool:
        return self.bound >= self.count * (1 - CERTIFICATE_TOLERANCE)


def divergence_certificate(fam: HeavyFamily, subset, L: int) -> DivergenceBound:
    """Lower bound on the truncated E g(min over ``subset``): certificates of intervals j < L, j = m mod M."""
    subset = _check_subset(fam, subset)
    if len(subset) != fam.k - 1:
        raise ValueError(f'divergence certificates are for frozen sets of size k-1 = {fam.k - 1}, '
                         f'got {subset}')
    plan = fam.plan
    if plan is None:
        raise ValueError('family has no construction plan')
    if not 1 <= L <= plan.intervals:
        raise HorizonError(f'L = {L} outside the {plan.intervals} intervals of the plan')
    m = plan.residue(subset)
    terms = plan.certificates[m:L:plan.M]
    return DivergenceBound(subset, m, L, len(terms), hsum(terms))


@dataclass(frozen=True)
class HazardDiagnostic:
    trace: list[HazardPoint]
    running_min: list[Hypernum]

    @property
    def strictly_decreasing(self) -> bool:
        logs = [p.log_ratio for p in self.trace]
        return all(b < a for a, b in zip(logs, logs[1:]))

    @property
    def min_ratio(self) -> float:
        return float(self.running_min[-1].exp())


def hazard_ratio_diagnostic(R, probes=None, probe: ProbeConfig = ProbeConfig()) -> HazardDiagnostic:
    """R(x)/x at the probes (by default the right ends of frozen intervals) and its running minimum."""
    trace = hazard_trace(R, resolve_probes(R, probe, probes))
    running = []
    for p in trace:
        running.append(p.log_ratio if not running or p.log_ratio < running[-1] else running[-1])
    return HazardDiagnostic(trace, running)


@dataclass(frozen=True)
class HazardBound:
    subset: tuple[int, ...]
    residue: int
    rounds: int
    worst: float

    @property
    def passed(self) -> bool:
        return self.worst <= 1 + EXACT_TOLERANCE


def hazard_bound(fam: HeavyFamily, subset) -> HazardBound:
    """max of r * R_I(a_{l+1}) / a_{l+1} over the rounds r >= 1 in which ``subset`` is frozen.

    At most 1 for plans built with the hazard policy, so R_I(x)/x has liminf 0.
    """
    subset = _check_subset(fam, subset)
    plan = fam.plan
    if plan is None:
        raise ValueError('family has no construction plan')
    m = plan.residue(subset)
    # round 0 carries no bound
    ls = list(range(m + plan.M, plan.intervals, plan.M))
    diag = hazard_ratio_diagnostic(fam.subset_risk(subset), probes=[plan.breakpoints[l + 1] for l in ls])
    worst = 0.0
    for l, p in zip(ls, diag.trace):
        if p.risk.is_zero():
            continue
        worst = max(worst, float((p.log_ratio + math.log(l // plan.M)).exp()))
    return HazardBound(subset, m, len(ls), worst)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    n: int
    k: int
    certificates: tuple[Hypernum, ...] = ()
    recomputed: tuple[Hypernum, ...] = ()
    # hazard plans are heavy through their hazard bound, not through g
    gauge_certified: bool = True
    gaps_min: Hypernum | None = None
    exactness_sup_error: float | None = None
    dominance_min_slack: dict[str, float] = field(default_factory=dict)
    component_bound_max: float | None = None
    certificate_min: dict[str, Hypernum] = field(default_factory=dict)
    divergence: dict[str, DivergenceBound] = field(default_factory=dict)
    hazard_bounds: dict[str, HazardBound] = field(default_factory=dict)
    ks: dict[str, KSResult] = field(default_factory=dict)
    hazard_trace: dict[str, list[HazardPoint]] = field(default_factory=dict)
    tolerance: float = EXACT_TOLERANCE

    def failures(self) -> list[str]:
        out = []
        for l, c in enumerate(self.certificates):
            if self.gauge_certified and not c >= 1 - CERTIFICATE_TOLERANCE:
                out.append(f'interval {l}: certificate {c} < 1')
        for l, (c, r) in enumerate(zip(self.certificates, self.recomputed)):
            if not relative_residual(c, r) <= CERTIFICATE_MATCH:
                out.append(f'interval {l}: stored certificate {c} differs from the recomputed {r}')
            if self.gauge_certified and not r >= 1 - CERTIFICATE_TOLERANCE:
                out.append(f'interval {l}: recomputed certificate {r} < 1')
        if self.gaps_min is not None and not self.gaps_min >= 1:
            out.append(f'smallest gap {self.gaps_min} < 1')
        if self.exactness_sup_error is not None and not self.exactness_sup_error <= self.tolerance:
            out.append(f'exactness residual {self.exactness_sup_error!r} > {self.tolerance!r}')
        for label, slack in self.dominance_min_slack.items():
            if not slack >= -self.tolerance:
                out.append(f'subset {{{label}}}: dominance slack {slack!r} < 0')
        if self.component_bound_max is not None and not self.component_bound_max <= self.tolerance:
            out.append(f'a component risk exceeds R_F by {self.component_bound_max!r}')
        for label, d in self.divergence.items():
            if not d.passed:
                out.append(f'frozen set {{{label}}}: divergence bound {d.bound} < {d.count}')
        for label, h in self.hazard_bounds.items():
            if not h.passed:
                out.append(f'frozen set {{{label}}}: round-scaled hazard ratio {h.worst!r} > 1')
        for label, r in self.ks.items():
            if not r.passed:
                out.append(f'subset {{{label}}}: KS statistic {r.statistic:.6g} > {r.critical:.6g}')
        return out

    @property
    def passed(self) -> bool:
        return not self.failures()


def verify_family(fam: HeavyFamily, samples: int = 0, seed: int = 0, significance: float = 0.01,
                  grid_points: int = 10_000, workers: int = 1) -> VerificationReport:
    """Every check that applies to ``fam``; KS only when ``samples`` > 0."""
    report = VerificationReport(fam.n, fam.k)
    plan = fam.plan
    if plan is not None:
        report.certificates = plan.certificates
        # a loaded plan's certificates are only trusted once re-derived from its breakpoints
        report.recomputed = recompute_certificates(fam)
        report.gauge_certified = plan.policy is not Policy.HAZARD
        report.gaps_min = min(plan.gaps)
    grid = evaluation_grid(fam, grid_points)

    subsets = list(itertools.combinations(range(1, fam.n + 1), fam.k))
    for subset in subsets:
        check = check_minimum_distribution(fam, subset, grid, workers)
        if check.kind == 'exactness':
            report.exactness_sup_error = check.value
        else:
            report.dominance_min_slack[subset_label(subset)] = check.value
    report.component_bound_max = component_bound(fam, grid)

    if plan is not None:
        for subset in plan.subsets:
            label = subset_label(subset)
            m = plan.residue(subset)
            own = report.recomputed[m::plan.M]
            if not own:
                continue
            report.certificate_min[label] = min(own)
            if report.gauge_certified:
                report.divergence[label] = divergence_certificate(fam, subset, plan.intervals)
                continue
            try:
                report.hazard_bounds[label] = hazard_bound(fam, subset)
            except ValueError as e:
                # fewer than two rounds after the first
                log.info('frozen set {%s}: no hazard bound (%s)', label, e)

    if samples > 0:
        x = sample_family(fam, samples, seed, workers)
        for subset in subsets:
            # row-wise minimum over the subset's components
            mins = np.min(x[[i - 1 for i in subset]], axis=0)
            report.ks[subset_label(subset)] = ks_test(mins, fam.target, significance,
                                                      two_sided=fam.n == fam.k)

    for i, R in enumerate(fam.risks, start=1):
        try:
            report.hazard_trace[str(i)] = hazard_ratio_diagnostic(R).trace
        except ValueError as e:
            log.info('component %d: no hazard trace (%s)', i, e)
    return report


def require(report: VerificationReport):
    """Raise CheckFailure naming every failed check."""
    failures = report.failures()
    if failures:
        raise CheckFailure(failures)
    return report
