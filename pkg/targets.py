"""Target distributions F and growth gauges g.

Every family is evaluable on Hypernums so that risks and gauge inverses stay
exact far past the range of a double. The float/numpy paths (``*_array``)
serve sampling and KS tests, where values are small.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from hypernum import NEG_INF, ONE, ZERO, Hypernum

log = logging.getLogger(__name__)

# tails below exp(-TAIL_UNDERFLOW_RISK) are reported as 0 with an underflow flag
TAIL_UNDERFLOW_RISK = 700.0


class TargetFamily(str, Enum):
    EXPONENTIAL = 'exponential'
    POLYNOMIAL = 'polynomial'
    WEIBULL = 'weibull'
    TABULATED = 'tabulated'


class GaugeFamily(str, Enum):
    POWER = 'power'
    EXP = 'exp'
    EXP_POWER = 'exp_power'
    IDENTITY_PLUS = 'identity_plus'
    TABULATED = 'tabulated'


def _check_grid(xs, ys, what):
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError(f'{what} grid needs at least 2 matching (x, value) nodes')
    if any(not math.isfinite(v) for v in (*xs, *ys)):
        raise ValueError(f'{what} grid must be finite')
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError(f'{what} grid x must be strictly increasing')
    if any(b < a for a, b in zip(ys, ys[1:])):
        raise ValueError(f'{what} grid values must be non-decreasing')
    if ys[-1] <= ys[-2]:
        raise ValueError(f'{what} grid must end on a strictly increasing segment '
                         f'so that it can be extended to infinity')


def _interp_inverse(y, xs, ys) -> np.ndarray:
    """Generalized inverse ``inf{x : f(x) >= y}`` of a piecewise-linear f, for y <= ys[-1]."""
    xs, ys, y = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), np.asarray(y, dtype=float)
    # first node with f >= y, so flat stretches resolve to their left end
    i = np.clip(np.searchsorted(ys, y, side='left'), 1, len(ys) - 1)
    x0, x1, y0, y1 = xs[i - 1], xs[i], ys[i - 1], ys[i]
    with np.errstate(divide='ignore', invalid='ignore'):
        x = x0 + (x1 - x0) * (y - y0) / (y1 - y0)
    return np.where(y <= ys[0], xs[0], x)


def _tail_slope(xs, ys):
    return (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])


# ---------------------------------------------------------------------------
# Target distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetDistribution:
    """Right-unbounded distribution F given through its risk R_F = -log(1 - F).

    Parametric families (all supported on [0, inf)):

    * exponential: tail e^{-alpha x}
    * polynomial:  tail (1 + x)^{-alpha}
    * weibull:     tail e^{-x^alpha}

    A tabulated target interpolates R linearly between ``(grid_x, grid_risk)``
    nodes and continues the last segment to infinity.
    """
    family: TargetFamily
    alpha: float | None = None
    grid_x: tuple[float, ...] = ()
    grid_risk: tuple[float, ...] = ()
    support_start: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'family', TargetFamily(self.family))
        if self.family is TargetFamily.TABULATED:
            xs, rs = tuple(map(float, self.grid_x)), tuple(map(float, self.grid_risk))
            _check_grid(xs, rs, 'tabulated risk')
            if rs[0] != 0.0:
                raise ValueError('tabulated risk must be 0 at the first node (the support start)')
            object.__setattr__(self, 'grid_x', xs)
            object.__setattr__(self, 'grid_risk', rs)
            object.__setattr__(self, 'support_start', xs[0])
        else:
            if self.alpha is None or not self.alpha > 0 or not math.isfinite(self.alpha):
                raise ValueError(f'{self.family.value} target needs alpha > 0, got {self.alpha}')
            object.__setattr__(self, 'alpha', float(self.alpha))

    @classmethod
    def exponential(cls, alpha: float) -> TargetDistribution:
        return cls(TargetFamily.EXPONENTIAL, alpha)

    @classmethod
    def polynomial(cls, alpha: float) -> TargetDistribution:
        return cls(TargetFamily.POLYNOMIAL, alpha)

    @classmethod
    def weibull(cls, alpha: float) -> TargetDistribution:
        return cls(TargetFamily.WEIBULL, alpha)

    @classmethod
    def tabulated(cls, xs: Sequence[float], risks: Sequence[float]) -> TargetDistribution:
        return cls(TargetFamily.TABULATED, grid_x=tuple(xs), grid_risk=tuple(risks))

    @property
    def label(self) -> str:
        if self.family is TargetFamily.TABULATED:
            return f'tabulated[{len(self.grid_x)} nodes]'
        return f'{self.family.value}:{self.alpha!r}'

    # ---- risk / tail -----------------------------------------------------

    def risk(self, x) -> Hypernum:
        """R_F(x), exact on Hypernums."""
        x = Hypernum.of(x)
        if x <= self.support_start:
            return ZERO
        fam = self.family
        if fam is TargetFamily.EXPONENTIAL:
            return x * self.alpha
        if fam is TargetFamily.POLYNOMIAL:
            if x.is_linear():
                return Hypernum(self.alpha * math.log1p(float(x)))
            return x.log() * self.alpha
        if fam is TargetFamily.WEIBULL:
            return x ** self.alpha
        xs, rs = self.grid_x, self.grid_risk
        if x.is_linear() and float(x) <= xs[-1]:
            return Hypernum(float(np.interp(float(x), xs, rs)))
        return (x - xs[-1]) * _tail_slope(xs, rs) + rs[-1]

    def risk_array(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        fam = self.family
        with np.errstate(over='ignore', invalid='ignore'):
            if fam is TargetFamily.EXPONENTIAL:
                r = self.alpha * x
            elif fam is TargetFamily.POLYNOMIAL:
                r = self.alpha * np.log1p(np.maximum(x, 0.0))
            elif fam is TargetFamily.WEIBULL:
                r = np.power(np.maximum(x, 0.0), self.alpha)
            else:
                xs, rs = np.asarray(self.grid_x), np.asarray(self.grid_risk)
                r = np.interp(x, xs, rs)
                beyond = x > xs[-1]
                r = np.where(beyond, rs[-1] + _tail_slope(self.grid_x, self.grid_risk) * (x - xs[-1]), r)
        return np.where(x <= self.support_start, 0.0, r)

    def inverse_risk(self, s) -> Hypernum:
        """Generalized inverse ``inf{x : R_F(x) >= s}``."""
        s = Hypernum.of(s)
        if s <= 0:
            return Hypernum(self.support_start)
        fam = self.family
        if fam is TargetFamily.EXPONENTIAL:
            return s / self.alpha
        if fam is TargetFamily.POLYNOMIAL:
            q = s / self.alpha
            if q.is_linear() and float(q) < TAIL_UNDERFLOW_RISK:
                return Hypernum(math.expm1(float(q)))
            return q.exp() - ONE
        if fam is TargetFamily.WEIBULL:
            return s ** (1.0 / self.alpha)
        xs, rs = self.grid_x, self.grid_risk
        if s.is_linear() and float(s) <= rs[-1]:
            return Hypernum(float(_interp_inverse(float(s), xs, rs)))
        return (s - rs[-1]) / _tail_slope(xs, rs) + xs[-1]

    def inverse_risk_array(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        fam = self.family
        with np.errstate(over='ignore', invalid='ignore'):
            if fam is TargetFamily.EXPONENTIAL:
                x = s / self.alpha
            elif fam is TargetFamily.POLYNOMIAL:
                x = np.expm1(s / self.alpha)
            elif fam is TargetFamily.WEIBULL:
                x = np.power(np.maximum(s, 0.0), 1.0 / self.alpha)
            else:
                xs, rs = self.grid_x, self.grid_risk
                x = np.where(s <= rs[-1], _interp_inverse(np.minimum(s, rs[-1]), xs, rs),
                             xs[-1] + (s - rs[-1]) / _tail_slope(xs, rs))
        return np.where(s <= 0.0, self.support_start, x)

    def tail(self, x) -> float:
        r = self.risk(x)
        if r > TAIL_UNDERFLOW_RISK:
            return 0.0
        return math.exp(-float(r))

    def cdf_array(self, x) -> np.ndarray:
        return -np.expm1(-self.risk_array(x))

    def quantile(self, u: float) -> Hypernum:
        if not 0.0 < u < 1.0:
            raise ValueError(f'quantile level must lie in (0, 1), got {u}')
        return self.inverse_risk(-math.log1p(-u))

    def scaled(self, c: float) -> TargetDistribution | None:
        """The named family with risk ``c * R_F``, when one exists."""
        if self.family in (TargetFamily.EXPONENTIAL, TargetFamily.POLYNOMIAL):
            return TargetDistribution(self.family, self.alpha * c)
        if self.family is TargetFamily.TABULATED:
            return TargetDistribution.tabulated(self.grid_x, [r * c for r in self.grid_risk])
        return None


# ---------------------------------------------------------------------------
# Growth gauges
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthFunction:
    """Non-negative, non-decreasing gauge g with g(x) -> inf.

    * power:         (x+)^beta
    * exp:           e^{beta x}
    * exp_power:     e^{(x+)^beta}
    * identity_plus: max(x, 0)
    * tabulated:     piecewise linear through ``(grid_x, grid_g)``, constant on
                     the left, extended linearly on the right
    """
    family: GaugeFamily
    beta: float | None = None
    grid_x: tuple[float, ...] = ()
    grid_g: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'family', GaugeFamily(self.family))
        fam = self.family
        if fam is GaugeFamily.TABULATED:
            xs, gs = tuple(map(float, self.grid_x)), tuple(map(float, self.grid_g))
            _check_grid(xs, gs, 'tabulated gauge')
            if gs[0] < 0:
                raise ValueError('tabulated gauge must be non-negative')
            object.__setattr__(self, 'grid_x', xs)
            object.__setattr__(self, 'grid_g', gs)
        elif fam is not GaugeFamily.IDENTITY_PLUS:
            if self.beta is None or not self.beta > 0 or not math.isfinite(self.beta):
                raise ValueError(f'{fam.value} gauge needs beta > 0, got {self.beta}')
            object.__setattr__(self, 'beta', float(self.beta))

    @classmethod
    def power(cls, beta: float) -> GrowthFunction:
        return cls(GaugeFamily.POWER, beta)

    @classmethod
    def exp(cls, beta: float) -> GrowthFunction:
        return cls(GaugeFamily.EXP, beta)

    @classmethod
    def exp_power(cls, beta: float) -> GrowthFunction:
        return cls(GaugeFamily.EXP_POWER, beta)

    @classmethod
    def identity_plus(cls) -> GrowthFunction:
        return cls(GaugeFamily.IDENTITY_PLUS)

    @classmethod
    def tabulated(cls, xs: Sequence[float], gs: Sequence[float]) -> GrowthFunction:
        return cls(GaugeFamily.TABULATED, grid_x=tuple(xs), grid_g=tuple(gs))

    @property
    def label(self) -> str:
        if self.family is GaugeFamily.IDENTITY_PLUS:
            return 'identity_plus'
        if self.family is GaugeFamily.TABULATED:
            return f'tabulated[{len(self.grid_x)} nodes]'
        return f'{self.family.value}:{self.beta!r}'

    @property
    def infimum(self) -> float:
        if self.family is GaugeFamily.EXP_POWER:
            return 1.0
        if self.family is GaugeFamily.TABULATED:
            return self.grid_g[0]
        return 0.0

    def evaluate(self, x) -> Hypernum:
        x = Hypernum.of(x)
        fam = self.family
        if fam is GaugeFamily.EXP:
            return (x * self.beta).exp()
        if fam is GaugeFamily.TABULATED:
            xs, gs = self.grid_x, self.grid_g
            if x.is_linear() and float(x) <= xs[-1]:
                return Hypernum(float(np.interp(float(x), xs, gs)))
            return (x - xs[-1]) * _tail_slope(xs, gs) + gs[-1]
        if x <= 0:
            return ONE if fam is GaugeFamily.EXP_POWER else ZERO
        if fam is GaugeFamily.POWER:
            return x ** self.beta
        if fam is GaugeFamily.EXP_POWER:
            return (x ** self.beta).exp()
        return x

    def inverse(self, t) -> Hypernum:
        """``inf{x : g(x) >= t}``; the ``NEG_INF`` sentinel when t <= inf g."""
        t = Hypernum.of(t)
        if t < 0:
            raise ValueError(f'gauge inverse needs t >= 0, got {t}')
        if t <= self.infimum:
            return NEG_INF
        fam = self.family
        if fam is GaugeFamily.POWER:
            return t ** (1.0 / self.beta)
        if fam is GaugeFamily.EXP:
            return t.log() / self.beta
        if fam is GaugeFamily.EXP_POWER:
            return t.log() ** (1.0 / self.beta)
        if fam is GaugeFamily.IDENTITY_PLUS:
            return t
        xs, gs = self.grid_x, self.grid_g
        if t.is_linear() and float(t) <= gs[-1]:
            return Hypernum(float(_interp_inverse(float(t), xs, gs)))
        return (t - gs[-1]) / _tail_slope(xs, gs) + xs[-1]


def g_eval(g: GrowthFunction, x) -> Hypernum:
    return g.evaluate(x)


def g_inverse(g: GrowthFunction, t) -> Hypernum:
    return g.inverse(t)


# ---------------------------------------------------------------------------
# Tail diagnostics
# ---------------------------------------------------------------------------

class TailEvidence(str, Enum):
    LIGHT = 'light-evidence'
    HEAVY = 'heavy-evidence'
    INCONCLUSIVE = 'inconclusive'


@dataclass(frozen=True)
class ProbeConfig:
    """Where and how strictly to probe R(x)/x."""
    count: int = 40
    low: float = 1.0
    high: float = 1e300
    epsilon: float = 0.01
    margin: float = 0.1

    def points(self) -> list[Hypernum]:
        if self.count < 2:
            raise ValueError(f'need at least 2 probe points, got {self.count}')
        return [Hypernum(float(v)) for v in np.geomspace(self.low, self.high, self.count)]


@dataclass(frozen=True)
class HazardPoint:
    x: Hypernum
    risk: Hypernum
    log_ratio: Hypernum

    @property
    def ratio(self) -> float:
        return float(self.log_ratio.exp())


def _clip_to_horizon(obj, probes):
    horizon = getattr(obj, 'horizon', None)
    if horizon is None:
        return list(probes)
    kept = [p for p in probes if p <= horizon]
    if len(kept) < len(probes):
        log.warning('clipped %d probe(s) beyond the horizon %s', len(probes) - len(kept), horizon)
    return kept


def hazard_trace(obj, probes) -> list[HazardPoint]:
    """(x, R(x)/x) at each probe, with the ratio carried as a log."""
    trace = []
    for x in probes:
        x = Hypernum.of(x)
        if x <= 0:
            raise ValueError(f'hazard probes must be positive, got {x}')
        r = obj.risk(x)
        lr = NEG_INF if r.is_zero() else r.log() - x.log()
        trace.append(HazardPoint(x, r, lr))
    return trace


@dataclass(frozen=True)
class TailReport:
    verdict: TailEvidence
    trace: list[HazardPoint] = field(repr=False)
    running_min: list[Hypernum] = field(repr=False)
    min_ratio: float = 0.0
    trend: float = 1.0


def resolve_probes(obj, probe: ProbeConfig, probes):
    if probes is None:
        default = getattr(obj, 'default_probes', None)
        probes = default() if callable(default) else []
        if len(probes) < 2:
            probes = probe.points()
    probes = _clip_to_horizon(obj, [Hypernum.of(p) for p in probes])
    if len(probes) < 2:
        raise ValueError(f'need at least 2 probe points, got {len(probes)}')
    return probes


def classify_tail(obj, probe: ProbeConfig = ProbeConfig(), probes=None) -> TailReport:
    """Evidence (never proof) of a light or heavy tail from R(x)/x.

    A tail is heavy iff liminf R(x)/x = 0. We call it heavy-evidence when the
    running minimum of the ratio at the largest probes is below ``epsilon`` and
    still falling, and light-evidence when the ratio at the largest probes stays
    within ``margin`` of its mid-range value.
    """
    trace = hazard_trace(obj, resolve_probes(obj, probe, probes))
    logs = [p.log_ratio for p in trace]
    running = []
    for lr in logs:
        running.append(lr if not running or lr < running[-1] else running[-1])
    mid = logs[len(logs) // 2]
    window = logs[-max(1, len(logs) // 4):]
    floor = mid + math.log1p(-probe.margin)
    declining = logs[-1] < floor
    if running[-1] < math.log(probe.epsilon) and declining:
        verdict = TailEvidence.HEAVY
    elif min(window) >= floor:
        verdict = TailEvidence.LIGHT
    else:
        verdict = TailEvidence.INCONCLUSIVE
    trend = float((logs[-1] - mid).exp()) if mid.is_finite() else math.nan
    return TailReport(verdict, trace, running, float(running[-1].exp()), trend)


def is_long_tailed_evidence(obj, probes=None, tolerance: float = 1e-3) -> bool:
    """Whether tail(x+1)/tail(x) = exp(-(R(x+1) - R(x))) looks to approach 1.

    Only probes where x + 1 is distinguishable from x are usable.
    """
    if probes is None:
        probes = ProbeConfig(count=40, low=1.0, high=1e15).points()
    usable = [Hypernum.of(p) for p in _clip_to_horizon(obj, probes)]
    usable = [p for p in usable if p.is_linear() and float(p) + 1.0 != float(p)]
    horizon = getattr(obj, 'horizon', None)
    if horizon is not None:
        usable = [p for p in usable if p + 1.0 <= horizon]
    if not usable:
        raise ValueError('no probe point resolves x + 1 from x')
    window = usable[-max(1, len(usable) // 4):]
    jumps = [float(obj.risk(p + 1.0) - obj.risk(p)) for p in window]
    return max(jumps) < tolerance
