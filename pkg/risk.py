"""Risk-function algebra.

A risk function R(x) = -log(1 - F(x)) is stored as a chain of half-open
segments (a_l, a_{l+1}]. On a segment the value is

    R(x) = offset_l + sum_j c_j * (R_{F_j}(x) - R_{F_j}(a_l))

with ``offset_l = R(a_l)``. No terms means the segment is FLAT, a single term
with c = 1 TRACKs a target. Evaluation at exactly a_l uses the left segment,
so every function is right-continuous at its breakpoints. Sums of risks (the
risk of a minimum of independent variables) merge breakpoints and add terms,
so the algebra is closed.
"""
from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from errors import BoundedSupportError, HorizonError, InadmissibleRiskError
from hypernum import ZERO, Hypernum, hsum, relative_residual
from targets import TAIL_UNDERFLOW_RISK, TargetDistribution

log = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-12

__all__ = [
    'Segment', 'SegmentKind', 'Term', 'RiskFunction', 'Tail', 'TargetDistribution',
    'risk_from_tail', 'tail_from_risk', 'sum_risks', 'quantile_from_risk',
]


class SegmentKind(str, Enum):
    FLAT = 'flat'
    TRACK = 'track'


@dataclass(frozen=True)
class Term:
    target: TargetDistribution
    slope: float = 1.0


@dataclass(frozen=True)
class Segment:
    start: Hypernum
    offset: Hypernum
    terms: tuple[Term, ...] = ()
    bases: tuple[Hypernum, ...] = ()

    @property
    def kind(self) -> SegmentKind:
        return SegmentKind.FLAT if not self.terms else SegmentKind.TRACK

    def value(self, x: Hypernum) -> Hypernum:
        v = self.offset
        for term, base in zip(self.terms, self.bases):
            inc = term.target.risk(x) - base
            v = v + (inc if term.slope == 1.0 else inc * term.slope)
        return v


def evaluate_segments(segments: Sequence[Segment], starts: Sequence[Hypernum], x: Hypernum) -> Hypernum:
    """Value of a segment chain at x, with no horizon check."""
    if x <= starts[0]:
        return ZERO
    return segments[bisect.bisect_left(starts, x) - 1].value(x)


@dataclass(frozen=True)
class Tail:
    value: float
    risk: Hypernum
    underflow: bool = False

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class RiskFunction:
    """Immutable piecewise risk function over a horizon (``None`` = whole line)."""
    segments: tuple[Segment, ...]
    horizon: Hypernum | None = None
    _starts: tuple = field(init=False, repr=False, compare=False)
    _ends: tuple = field(init=False, repr=False, compare=False)
    _target: TargetDistribution | None = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.segments:
            raise InadmissibleRiskError('a risk function needs at least one segment')
        starts = tuple(s.start for s in self.segments)
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise InadmissibleRiskError('segment starts must be strictly increasing')
        if self.horizon is not None and self.horizon <= starts[-1]:
            raise InadmissibleRiskError('horizon must lie beyond the last segment start')
        object.__setattr__(self, '_starts', starts)
        ends = []
        for l, seg in enumerate(self.segments):
            end_x = self._end_x(l)
            ends.append(None if end_x is None else seg.value(end_x))
        object.__setattr__(self, '_ends', tuple(ends))
        targets = {t.target for s in self.segments for t in s.terms}
        single = (len(targets) == 1
                  and all(len(s.terms) <= 1 for s in self.segments))
        object.__setattr__(self, '_target', next(iter(targets)) if single else None)

    # ---- constructors ----------------------------------------------------

    @classmethod
    def of_target(cls, target: TargetDistribution, scale: float = 1.0) -> RiskFunction:
        """Whole-line risk ``scale * R_F``."""
        start = Hypernum(target.support_start)
        return cls((Segment(start, ZERO, (Term(target, float(scale)),), (target.risk(start),)),))

    @classmethod
    def flat(cls, value: float = 0.0, start: float = 0.0) -> RiskFunction:
        return cls((Segment(Hypernum(start), Hypernum(value)),))

    # ---- structure -------------------------------------------------------

    def _end_x(self, l: int) -> Hypernum | None:
        if l + 1 < len(self.segments):
            return self._starts[l + 1]
        return self.horizon

    @property
    def support_start(self) -> Hypernum:
        return self._starts[0]

    @property
    def breakpoints(self) -> tuple[Hypernum, ...]:
        if self.horizon is None:
            return self._starts
        return self._starts + (self.horizon,)

    @property
    def log_breakpoints(self) -> tuple[Hypernum, ...]:
        return tuple(b.log() for b in self.breakpoints)

    @property
    def horizon_risk(self) -> Hypernum:
        """Risk reached at the horizon (infinite for whole-line functions)."""
        if self.horizon is None:
            return Hypernum(math.inf)
        return self._ends[-1]

    def default_probes(self) -> list[Hypernum]:
        """Right endpoints of FLAT segments carrying positive risk."""
        probes = []
        for l, seg in enumerate(self.segments):
            end_x = self._end_x(l)
            if seg.kind is SegmentKind.FLAT and end_x is not None and seg.offset > 0:
                probes.append(end_x)
        return probes

    # ---- evaluation ------------------------------------------------------

    def risk(self, x) -> Hypernum:
        x = Hypernum.of(x)
        if self.horizon is not None and x > self.horizon:
            raise HorizonError(f'x = {x} lies beyond the horizon {self.horizon}')
        return evaluate_segments(self.segments, self._starts, x)

    __call__ = risk

    def tail(self, x) -> Tail:
        return tail_from_risk(self, x)

    def inverse(self, r) -> Hypernum:
        """Generalized inverse ``inf{x : R(x) >= r}``."""
        r = Hypernum.of(r)
        if r <= 0:
            return self.support_start
        keys = [Hypernum(math.inf) if e is None else e for e in self._ends]
        l = bisect.bisect_left(keys, r)
        if l == len(keys):
            raise HorizonError(
                f'risk level {r} is not reached before the horizon {self.horizon} '
                f'(risk there is {self._ends[-1]})', required_risk=r)
        seg, end_x = self.segments[l], self._end_x(l)
        if r <= seg.offset:
            return seg.start
        if len(seg.terms) == 1:
            term, base = seg.terms[0], seg.bases[0]
            x = term.target.inverse_risk(base + (r - seg.offset) / term.slope)
        else:
            x = self._solve_segment(seg, end_x, r)
        if end_x is not None and x > end_x:
            x = end_x
        return x if x > seg.start else seg.start

    def _solve_segment(self, seg: Segment, end_x, r: Hypernum) -> Hypernum:
        lo = float(seg.start)
        hi = float(end_x) if end_x is not None else max(2.0 * lo, lo + 1.0)
        if not (math.isfinite(lo) and r.is_linear()):
            raise HorizonError(f'cannot resolve risk level {r} on a multi-target segment '
                               f'outside the float range', required_risk=r)
        target = float(r)
        while end_x is None and float(seg.value(Hypernum(hi))) < target:
            hi = 2.0 * hi
            if not math.isfinite(hi):
                raise HorizonError(f'risk level {r} not bracketed', required_risk=r)
        hi = min(hi, 1e300)
        x = brentq(lambda v: float(seg.value(Hypernum(v))) - target, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return Hypernum(x)

    # ---- vectorised float paths -----------------------------------------

    def _float_tables(self):
        cached = self.__dict__.get('_tables')
        if cached is not None:
            return cached
        n = len(self.segments)
        starts = np.array([float(s) for s in self._starts])
        offsets = np.array([float(s.offset) for s in self.segments])
        ends = np.array([math.inf if e is None else float(e) for e in self._ends])
        end_x = np.array([math.inf if self._end_x(l) is None else float(self._end_x(l)) for l in range(n)])
        slopes = np.array([s.terms[0].slope if s.terms else 0.0 for s in self.segments])
        bases = np.array([float(s.bases[0]) if s.terms else 0.0 for s in self.segments])
        tables = (starts, offsets, ends, end_x, slopes, bases)
        object.__setattr__(self, '_tables', tables)
        return tables

    def risk_array(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.horizon is not None and np.any(x > float(self.horizon)):
            raise HorizonError(f'evaluation grid reaches beyond the horizon {self.horizon}')
        if self._target is None:
            return np.array([float(self.risk(v)) for v in x.ravel()]).reshape(x.shape)
        starts, offsets, _, _, slopes, bases = self._float_tables()
        idx = np.searchsorted(starts, x, side='left') - 1
        below = idx < 0
        idx = np.clip(idx, 0, None)
        with np.errstate(invalid='ignore', over='ignore'):
            inc = self._target.risk_array(x) - bases[idx]
            r = np.where(slopes[idx] == 0.0, offsets[idx],
                         offsets[idx] + np.where(slopes[idx] == 1.0, inc, inc * slopes[idx]))
        return np.where(below, 0.0, r)

    def inverse_array(self, r) -> np.ndarray:
        """Vectorised generalized inverse; ``inf`` where x leaves the float range."""
        r = np.asarray(r, dtype=float)
        if self._target is None:
            return np.array([float(self.inverse(v)) for v in r.ravel()]).reshape(r.shape)
        starts, offsets, ends, end_x, slopes, bases = self._float_tables()
        l = np.searchsorted(ends, r, side='left')
        if np.any(l >= len(ends)):
            worst = float(np.max(r))
            raise HorizonError(
                f'risk level {worst!r} is not reached before the horizon {self.horizon} '
                f'(risk there is {self._ends[-1]})', required_risk=Hypernum(worst))
        with np.errstate(invalid='ignore', over='ignore', divide='ignore'):
            slope = np.where(slopes[l] > 0.0, slopes[l], 1.0)
            s = bases[l] + (r - offsets[l]) / slope
            x = self._target.inverse_risk_array(s)
            x = np.maximum(np.minimum(x, end_x[l]), starts[l])
        return np.where(r <= 0.0, float(self.support_start), x)

    # ---- admissibility ---------------------------------------------------

    def validate(self) -> RiskFunction:
        """Raise InadmissibleRiskError unless this is a risk function (on its horizon)."""
        if not self.segments[0].offset.is_zero():
            raise InadmissibleRiskError('risk must be 0 at and below the support start')
        for l, seg in enumerate(self.segments):
            if any(not (t.slope >= 0.0 and math.isfinite(t.slope)) for t in seg.terms):
                raise InadmissibleRiskError(f'segment {l} has a negative or non-finite slope')
            if l > 0:
                prev_end = self._ends[l - 1]
                if relative_residual(seg.offset, prev_end) > EXACT_TOLERANCE:
                    raise InadmissibleRiskError(
                        f'risk is not continuous at breakpoint {l}: {prev_end} then {seg.offset}')
        last = self.segments[-1]
        if self.horizon is None and not any(t.slope > 0 for t in last.terms):
            raise InadmissibleRiskError('risk never tends to infinity (zero or flat tail)')
        return self


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def risk_from_tail(tail) -> RiskFunction:
    """R = -log(tail) for a target or a tabulated sequence of (x, tail) pairs."""
    if isinstance(tail, TargetDistribution):
        return RiskFunction.of_target(tail)
    pairs = [(float(x), float(t)) for x, t in tail]
    risks = []
    for x, t in pairs:
        if t > 1.0:
            raise InadmissibleRiskError(f'tail value {t} > 1 at x = {x}')
        if t <= 0.0:
            raise BoundedSupportError(f'tail is 0 at x = {x}: support is bounded on the right')
        risks.append(-math.log(t))
    if not pairs or risks[0] != 0.0:
        raise InadmissibleRiskError('tabulated tail must equal 1 at its first node')
    return RiskFunction.of_target(TargetDistribution.tabulated([p[0] for p in pairs], risks))


def tail_from_risk(R: RiskFunction, x) -> Tail:
    r = R.risk(x)
    if r > TAIL_UNDERFLOW_RISK:
        return Tail(0.0, r, underflow=True)
    return Tail(math.exp(-float(r)), r)


def sum_risks(rs: Iterable[RiskFunction]) -> RiskFunction:
    """Pointwise sum: the risk of the minimum of independent variables."""
    rs = list(rs)
    if not rs:
        raise ValueError('sum_risks needs at least one risk function')
    for r in rs:
        r.validate()
    if len(rs) == 1:
        return rs[0]
    horizons = [r.horizon for r in rs if r.horizon is not None]
    horizon = min(horizons) if horizons else None
    starts = sorted({s for r in rs for s in r._starts})
    if horizon is not None:
        starts = [s for s in starts if s < horizon]
    segments = []
    for s in starts:
        offset = hsum(r.risk(s) for r in rs)
        slopes: dict[TargetDistribution, float] = {}
        for r in rs:
            i = bisect.bisect_right(r._starts, s) - 1
            if i < 0:
                continue
            for t in r.segments[i].terms:
                slopes[t.target] = slopes.get(t.target, 0.0) + t.slope
        terms = tuple(Term(t, c) for t, c in slopes.items())
        segments.append(Segment(s, offset, terms, tuple(t.risk(s) for t in slopes)))
    return RiskFunction(tuple(segments), horizon)


def quantile_from_risk(R: RiskFunction, u: float) -> Hypernum:
    """``inf{x : R(x) >= -log(1 - u)}`` for u in (0, 1)."""
    if not 0.0 < u < 1.0:
        raise ValueError(f'quantile level must lie in (0, 1), got {u}')
    return R.inverse(Hypernum(-math.log1p(-u)))
