"""Freeze/track constructions of heavy-tailed families.

On every interval (a_l, a_{l+1}] one frozen set I_l of components keeps its
risk constant while every other component tracks R_F. With n components and
frozen sets of size k - 1 cycled through all C(n, k - 1) subsets, every k
components contain at least one tracking risk, so the minimum of any k of
them is dominated by F; for n == k the tracking risk is unique and the sum of
all risks is exactly R_F.

The interval lengths are chosen so that each certificate

    (a_{l+1} - a_l) * exp(-sum_{i in I_l} R_i(g^-1(a_l)))

is at least 1, which makes E g(min of the frozen set) diverge. The hazard
policy instead stretches round r of the cycle until R_I(a_{l+1}) / a_{l+1}
is at most 1/r, so R_I(x)/x has liminf 0 and the frozen minimum is heavy
without reference to a gauge.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from errors import HorizonError, HypothesisViolation
from hypernum import ONE, ZERO, Hypernum, hmax, hmin, hsum
from risk import RiskFunction, Segment, Term, evaluate_segments, sum_risks
from targets import GaugeFamily, GrowthFunction, TargetDistribution, TargetFamily

log = logging.getLogger(__name__)

MAX_LEVEL = 64
# safety stop for x-bound horizons
MAX_INTERVALS = 100_000
CERTIFICATE_TOLERANCE = 1e-12


class Policy(str, Enum):
    PAPER_MINIMAL = 'paper-minimal'
    EXACT_MINIMAL = 'exact-minimal'
    EXPLICIT = 'explicit'
    # R_I(a_l) / a_{l+1} <= 1/r in the r-th round of the cycle
    HAZARD = 'hazard'


@dataclass(frozen=True)
class Horizon:
    """Build up to ``intervals`` intervals, or until a breakpoint reaches ``x_bound``."""
    intervals: int | None = None
    x_bound: Hypernum | None = None

    def __post_init__(self):
        if (self.intervals is None) == (self.x_bound is None):
            raise ValueError('a horizon is either an interval count or an x bound')
        if self.intervals is not None and self.intervals < 1:
            raise ValueError(f'horizon needs at least 1 interval, got {self.intervals}')
        if self.x_bound is not None:
            object.__setattr__(self, 'x_bound', Hypernum.of(self.x_bound))

    @classmethod
    def of(cls, value) -> Horizon:
        if isinstance(value, Horizon):
            return value
        if isinstance(value, int):
            return cls(intervals=value)
        return cls(x_bound=value)


@dataclass(frozen=True)
class ConstructionPlan:
    policy: Policy
    n: int
    k: int
    subsets: tuple[tuple[int, ...], ...]
    breakpoints: tuple[Hypernum, ...]
    frozen_sets: tuple[tuple[int, ...], ...]
    certificates: tuple[Hypernum, ...]
    overflow: bool = False

    @property
    def M(self) -> int:
        return len(self.subsets)

    @property
    def intervals(self) -> int:
        return len(self.frozen_sets)

    @property
    def horizon(self) -> Hypernum:
        return self.breakpoints[-1]

    @property
    def gaps(self) -> tuple[Hypernum, ...]:
        return tuple(b - a for a, b in zip(self.breakpoints, self.breakpoints[1:]))

    @property
    def log_breakpoints(self) -> tuple[Hypernum, ...]:
        return tuple(a.log() for a in self.breakpoints)

    @property
    def min_certificate(self) -> Hypernum:
        return min(self.certificates)

    def residue(self, subset) -> int:
        """Cycle position m of a frozen set."""
        key = tuple(sorted(subset))
        try:
            return self.subsets.index(key)
        except ValueError:
            raise ValueError(f'{key} is not a frozen set of this plan') from None


@dataclass(frozen=True)
class HeavyFamily:
    n: int
    k: int
    risks: tuple[RiskFunction, ...]
    target: TargetDistribution
    gauge: GrowthFunction | None = None
    plan: ConstructionPlan | None = None
    note: str = ''

    @property
    def horizon(self) -> Hypernum | None:
        return None if self.plan is None else self.plan.horizon

    def subset_risk(self, subset) -> RiskFunction:
        """Risk of the minimum over the (1-based) components in ``subset``."""
        return sum_risks(self.risks[i - 1] for i in subset)


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------

def frozen_subsets(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """All (k-1)-subsets of {1..n} in lexicographic order."""
    return tuple(itertools.combinations(range(1, n + 1), k - 1))


class _Schedule:
    """Component risks recorded interval by interval.

    Both fresh builds and replays of stored plans go through here, so a
    replayed plan carries the exact same Hypernums as the original.
    """

    def __init__(self, target: TargetDistribution, n: int, start: Hypernum):
        self.target = target
        self.n = n
        self.a = start
        self.starts: list[Hypernum] = []
        self.segments: list[list[Segment]] = [[] for _ in range(n)]
        self.values: list[Hypernum] = [ZERO] * n

    def current(self, frozen) -> Hypernum:
        """sum_{i in frozen} R_i(a) at the current breakpoint a."""
        return hsum(self.values[i - 1] for i in frozen)

    def frozen_value(self, frozen, y: Hypernum) -> Hypernum:
        """sum_{i in frozen} R_i(y), valid for y up to the end of the next interval."""
        if y > self.a:
            return self.current(frozen)
        if not self.starts:
            return ZERO
        return hsum(evaluate_segments(self.segments[i - 1], self.starts, y) for i in frozen)

    def advance(self, frozen, nxt: Hypernum):
        a, target = self.a, self.target
        base = target.risk(a)
        self.starts.append(a)
        for i in range(self.n):
            if i + 1 in frozen:
                self.segments[i].append(Segment(a, self.values[i]))
            else:
                self.segments[i].append(Segment(a, self.values[i], (Term(target),), (base,)))
        inc = target.risk(nxt) - base
        for i in range(self.n):
            if i + 1 not in frozen:
                self.values[i] = self.values[i] + inc
        self.a = nxt

    def risks(self) -> tuple[RiskFunction, ...]:
        return tuple(RiskFunction(tuple(segs), horizon=self.a) for segs in self.segments)


def _certificates(risks, gauge: GrowthFunction, breakpoints, frozen_sets) -> tuple[Hypernum, ...]:
    horizon = breakpoints[-1]
    certs = []
    for l, frozen in enumerate(frozen_sets):
        a, b = breakpoints[l], breakpoints[l + 1]
        y = gauge.inverse(a)
        if y > horizon:
            log.warning('interval %d: g^-1(a_l) = %s lies beyond the horizon, certificate set to 0', l, y)
            certs.append(ZERO)
            continue
        exponent = hsum(risks[i - 1].risk(y) for i in frozen)
        certs.append(((b - a).log() - exponent).exp())
    return tuple(certs)


def _check_hypotheses(target: TargetDistribution, n: int, k: int):
    if not 1 < k <= n:
        raise HypothesisViolation('1 < k <= n', f'n={n}, k={k}')
    if target.support_start < 0:
        raise HypothesisViolation('target supported on [0, inf)', f'support starts at {target.support_start}')


def _check_sequence(seq) -> tuple[Hypernum, ...]:
    seq = tuple(Hypernum.of(a) for a in seq)
    if len(seq) < 2:
        raise ValueError('an explicit sequence needs at least two breakpoints')
    if not seq[0].is_zero():
        raise ValueError(f'an explicit sequence must start at 0, got {seq[0]}')
    for l, (a, b) in enumerate(zip(seq, seq[1:])):
        if not b > a:
            raise ValueError(f'explicit sequence is not strictly increasing at index {l + 1}: {a} then {b}')
    return seq


def _next_breakpoint(sched: _Schedule, target, gauge, policy: Policy, frozen, round_: int) -> Hypernum:
    """a_{l+1} for a generated policy, given the schedule built up to a_l."""
    a = sched.a
    if policy is Policy.HAZARD:
        # stretch the interval until the frozen hazard ratio drops to 1/round
        inc = ONE
        nxt = hmax(a + inc, sched.current(frozen) * round_)
    else:
        y = gauge.inverse(a)
        frozen_risk = sched.frozen_value(frozen, y)
        # R_F(y) bounds every single frozen risk; sets of k-1 >= 2 can sum past it
        paper_inc = hmax(ONE, hmax(target.risk(y), frozen_risk).exp())
        if policy is Policy.PAPER_MINIMAL:
            inc = paper_inc
            nxt = a + inc
        else:
            inc = hmax(ONE, frozen_risk.exp())
            # frozen risks are known exactly only up to the end of this interval,
            # so reach y unless the paper-minimal step already certifies the interval
            nxt = hmin(hmax(a + inc, y), a + paper_inc)
    while not nxt - a >= inc:
        # a + inc rounded down (or onto a itself)
        nxt = nxt.next_up()
    return nxt


def _build(target, gauge, n, k, policy, horizon, sequence, max_level) -> HeavyFamily:
    _check_hypotheses(target, n, k)
    policy = Policy(policy)
    horizon = Horizon.of(horizon)
    subsets = frozen_subsets(n, k)
    M = len(subsets)
    if policy is Policy.EXPLICIT:
        if sequence is None:
            raise ValueError('the explicit policy needs a breakpoint sequence')
        sequence = _check_sequence(sequence)
    limit = horizon.intervals if horizon.intervals is not None else MAX_INTERVALS
    if sequence is not None and limit > len(sequence) - 1:
        log.info('explicit sequence covers %d intervals, fewer than requested', len(sequence) - 1)
        limit = len(sequence) - 1

    # every plan starts at a_0 = 0 with all risks zero
    sched = _Schedule(target, n, ZERO)
    breakpoints, frozen_sets = [ZERO], []
    overflow = False
    for l in range(limit):
        a = sched.a
        if horizon.x_bound is not None and a >= horizon.x_bound:
            break
        # lexicographic cycle through the (k-1)-subsets
        frozen = subsets[l % M]
        if policy is Policy.EXPLICIT:
            nxt = sequence[l + 1]
        else:
            nxt = _next_breakpoint(sched, target, gauge, policy, frozen, l // M)
        # keep the prefix, flag the rest
        if not nxt.is_finite() or nxt.pt > max_level or not nxt > a:
            log.warning('plan stopped after %d intervals: breakpoint %s exceeds the representable range', l, nxt)
            overflow = True
            break
        sched.advance(frozen, nxt)
        breakpoints.append(nxt)
        frozen_sets.append(frozen)
    if not frozen_sets:
        raise HorizonError('no interval could be built within the representable range')

    risks = sched.risks()
    plan = ConstructionPlan(
        policy=policy, n=n, k=k, subsets=subsets,
        breakpoints=tuple(breakpoints), frozen_sets=tuple(frozen_sets),
        certificates=_certificates(risks, gauge, breakpoints, frozen_sets),
        overflow=overflow,
    )
    log.debug('built %s plan n=%d k=%d over %d intervals', policy.value, n, k, plan.intervals)
    return HeavyFamily(n, k, risks, target, gauge, plan)


def construct_family(target: TargetDistribution, gauge: GrowthFunction, n: int, k: int,
                     policy: Policy | str = Policy.EXACT_MINIMAL, horizon=32,
                     sequence: Sequence | None = None, max_level: int = MAX_LEVEL) -> HeavyFamily:
    """n components, any k of which have a minimum dominated by ``target``."""
    return _build(target, gauge, n, k, policy, horizon, sequence, max_level)


def construct_pair(target: TargetDistribution, gauge: GrowthFunction,
                   policy: Policy | str = Policy.EXACT_MINIMAL, horizon=32,
                   sequence: Sequence | None = None, max_level: int = MAX_LEVEL) -> HeavyFamily:
    """Two components taking turns; their minimum has law ``target`` exactly."""
    return _build(target, gauge, 2, 2, policy, horizon, sequence, max_level)


def extend(family: HeavyFamily, intervals: int) -> HeavyFamily:
    """The same plan carried to ``intervals`` intervals; the known prefix is unchanged."""
    plan = family.plan
    if plan is None:
        raise ValueError('family has no construction plan to extend')
    if plan.policy is Policy.EXPLICIT:
        raise ValueError('explicit plans end where their sequence ends')
    if intervals < plan.intervals:
        raise ValueError(f'cannot shrink a plan from {plan.intervals} to {intervals} intervals')
    return _build(family.target, family.gauge, family.n, family.k, plan.policy,
                  Horizon(intervals=intervals), None, MAX_LEVEL)


def replay_plan(target: TargetDistribution, gauge: GrowthFunction, policy, n: int, k: int,
                breakpoints, frozen_sets, certificates, overflow: bool = False) -> HeavyFamily:
    """Rebuild the risks of a stored plan, keeping its stored certificates."""
    _check_hypotheses(target, n, k)
    breakpoints = _check_sequence(breakpoints)
    frozen_sets = tuple(tuple(sorted(int(i) for i in fs)) for fs in frozen_sets)
    subsets = frozen_subsets(n, k)
    if len(frozen_sets) != len(breakpoints) - 1 or len(certificates) != len(frozen_sets):
        raise ValueError('plan needs one frozen set and one certificate per interval')
    for l, fs in enumerate(frozen_sets):
        if fs not in subsets:
            raise ValueError(f'interval {l}: {fs} is not a ({k - 1})-subset of 1..{n}')
    sched = _Schedule(target, n, breakpoints[0])
    for fs, nxt in zip(frozen_sets, breakpoints[1:]):
        sched.advance(fs, nxt)
    plan = ConstructionPlan(Policy(policy), n, k, subsets, breakpoints, frozen_sets,
                            tuple(Hypernum.of(c) for c in certificates), overflow)
    return HeavyFamily(n, k, sched.risks(), target, gauge, plan)


def recompute_certificates(fam: HeavyFamily) -> tuple[Hypernum, ...]:
    """Certificates re-derived from the family's own breakpoints and risks."""
    plan = fam.plan
    if plan is None:
        raise ValueError('family has no construction plan')
    if fam.gauge is None:
        raise ValueError('certificates need the growth gauge the plan was built for')
    return _certificates(fam.risks, fam.gauge, plan.breakpoints, plan.frozen_sets)


# ---------------------------------------------------------------------------
# Sequences
# ---------------------------------------------------------------------------

def minimal_sequence(target: TargetDistribution, gauge: GrowthFunction, count: int) -> list[Hypernum]:
    """a*_0 = 0, a*_{j+1} = a*_j + max(1, exp(R_F(g^-1(a*_j)))), first ``count`` terms."""
    if count < 1:
        raise ValueError(f'count must be at least 1, got {count}')
    seq = [ZERO]
    while len(seq) < count:
        a = seq[-1]
        seq.append(a + hmax(ONE, target.risk(gauge.inverse(a)).exp()))
    return seq


class Example(str, Enum):
    EXPONENTIAL = 'exponential'
    POLYNOMIAL = 'polynomial'
    WEIBULL = 'weibull'


def check_example(example, alpha: float, beta: float) -> Example:
    example = Example(example)
    if example is Example.EXPONENTIAL and not 0 < beta < alpha:
        raise HypothesisViolation('exponential example requires 0 < beta < alpha', f'alpha={alpha}, beta={beta}')
    if example is Example.POLYNOMIAL and not (beta > 0 and beta + 1 < alpha):
        raise HypothesisViolation('polynomial example requires beta > 0 and beta + 1 < alpha',
                                  f'alpha={alpha}, beta={beta}')
    if example is Example.WEIBULL and not 0 < beta < alpha < 1:
        raise HypothesisViolation('weibull example requires 0 < beta < alpha < 1', f'alpha={alpha}, beta={beta}')
    return example


def example_setting(example, alpha: float, beta: float) -> tuple[TargetDistribution, GrowthFunction]:
    """Target and gauge an example sequence is meant for."""
    example = check_example(example, alpha, beta)
    if example is Example.EXPONENTIAL:
        return TargetDistribution.exponential(alpha), GrowthFunction.exp(beta)
    if example is Example.POLYNOMIAL:
        return TargetDistribution.polynomial(alpha), GrowthFunction.power(beta)
    return TargetDistribution.weibull(alpha), GrowthFunction.exp_power(beta)


def example_exponent_sums(alpha: float, beta: float, count: int) -> list[Hypernum]:
    """s_j = sum_{i=1}^{j} (alpha/beta)^i for j = 1..count."""
    ratio = Hypernum(alpha / beta)
    sums, total, term = [], ZERO, ONE
    for _ in range(count):
        term = term * ratio
        total = total + term
        sums.append(total)
    return sums


def example_sequence(example, alpha: float, beta: float, count: int) -> list[Hypernum]:
    """Closed-form breakpoints a_1..a_count.

    exponential, polynomial: a_j = 2^{s_j}; weibull: a_j = exp(exp(s_j)).
    """
    example = check_example(example, alpha, beta)
    if count < 1:
        raise ValueError(f'count must be at least 1, got {count}')
    sums = example_exponent_sums(alpha, beta, count)
    if example is Example.WEIBULL:
        return [s.exp().exp() for s in sums]
    return [(s * math.log(2.0)).exp() for s in sums]


@dataclass(frozen=True)
class IntervalCheck:
    interval: int
    gap: Hypernum
    certificate: Hypernum

    @property
    def covers(self) -> bool:
        return self.gap >= 1

    @property
    def certified(self) -> bool:
        return self.certificate >= 1 - CERTIFICATE_TOLERANCE


@dataclass(frozen=True)
class SequenceReport:
    rows: tuple[IntervalCheck, ...]
    n: int
    k: int

    @property
    def passed(self) -> bool:
        return all(r.covers and r.certified for r in self.rows)

    def failures(self) -> list[str]:
        out = []
        for r in self.rows:
            if not r.covers:
                out.append(f'interval {r.interval}: gap {r.gap} < 1')
            if not r.certified:
                out.append(f'interval {r.interval}: certificate {r.certificate} < 1')
        return out


def validate_explicit_sequence(target: TargetDistribution, gauge: GrowthFunction, seq,
                               n: int = 2, k: int = 2) -> SequenceReport:
    """Per-interval gap and certificate of ``seq`` under the n, k freeze cycle."""
    fam = construct_family(target, gauge, n, k, Policy.EXPLICIT,
                           Horizon(intervals=max(1, len(seq) - 1)), sequence=seq)
    plan = fam.plan
    rows = tuple(IntervalCheck(l, gap, cert)
                 for l, (gap, cert) in enumerate(zip(plan.gaps, plan.certificates)))
    return SequenceReport(rows, n, k)


# ---------------------------------------------------------------------------
# Square-root split
# ---------------------------------------------------------------------------

def sqrt_split_shortcut(target: TargetDistribution, gauge: GrowthFunction | None) -> bool | None:
    """For an exponential target and exp gauge: are the split halves already g-heavy?

    ``None`` when no closed answer is known for the pair of families.
    """
    if gauge is None:
        return None
    if target.family is TargetFamily.EXPONENTIAL and gauge.family is GaugeFamily.EXP:
        return gauge.beta > target.alpha / 2
    return None


def sqrt_split(target: TargetDistribution, gauge: GrowthFunction | None = None) -> HeavyFamily:
    """Two copies of the distribution with tail sqrt(1 - F)."""
    half = target.scaled(0.5)
    risk = RiskFunction.of_target(half) if half is not None else RiskFunction.of_target(target, 0.5)
    shortcut = sqrt_split_shortcut(target, gauge)
    if shortcut:
        note = (f'exponential shortcut: beta={gauge.beta!r} > alpha/2={target.alpha / 2!r}, '
                f'so the EXPONENTIAL({target.alpha / 2!r}) components are already g-heavy')
    else:
        note = 'components have risk R_F/2 and are not g-heavy in general'
    return HeavyFamily(2, 2, (risk, risk), target, gauge, None, note)
