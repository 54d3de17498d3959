"""Signed extended reals stored as base-e power towers.

A Hypernum is ``sign * exp(exp(...exp(mantissa)...))`` with ``pt`` nested
exponentials. Level 0 is an ordinary float. A number only climbs a level once
its mantissa passes OVERFLOW, so everything a double can hold stays a double
and arithmetic there is plain float arithmetic.

Breakpoints of the constructed risk functions grow doubly exponentially (and
as power towers for the identity gauge), so plans, risks and certificates are
all carried as Hypernums.
"""
from __future__ import annotations

import math
import re

OVERFLOW = 1e300
CUTOFF = math.log(OVERFLOW)
# below this, products of two level-0 numbers cannot overflow
FAST = 1e150

_TOKEN = re.compile(r'^(?P<sign>-)?(?P<pt>\d+)p(?P<mantissa>.+)$')


class Hypernum:
    """Signed power-tower number, after the Hypercalc-style ``pt`` encoding."""

    __slots__ = ('sign', 'pt', 'mantissa')

    def __init__(self, value=0.0, pt=0, sign=None):
        if isinstance(value, Hypernum):
            self.sign, self.pt, self.mantissa = value.sign, value.pt, value.mantissa
            return
        if isinstance(value, int) and not isinstance(value, bool) and abs(value) > OVERFLOW:
            # huge ints: go through the log
            s = -1 if value < 0 else 1
            self.sign, self.pt, self.mantissa = s, 1, math.log(abs(value))
            self._normalize()
            return
        value = float(value)
        if sign is None:
            sign = -1 if value < 0 else 1
            value = abs(value)
        self.sign = sign
        self.pt = int(pt)
        self.mantissa = value
        self._normalize()

    @classmethod
    def of(cls, value) -> Hypernum:
        return value if isinstance(value, Hypernum) else cls(value)

    @classmethod
    def _raw(cls, sign, pt, mantissa) -> Hypernum:
        h = cls.__new__(cls)
        h.sign, h.pt, h.mantissa = sign, pt, mantissa
        h._normalize()
        return h

    def _normalize(self):
        m = self.mantissa
        if math.isnan(m) or math.isinf(m):
            if math.isinf(m):
                self.pt = 0
            return
        while m > OVERFLOW:
            m = math.log(m)
            self.pt += 1
        while self.pt > 0 and m <= CUTOFF:
            m = math.exp(m)
            self.pt -= 1
        if m == 0.0:
            self.sign = 1
            self.pt = 0
        self.mantissa = m

    # ---- predicates ------------------------------------------------------

    def is_zero(self) -> bool:
        return self.mantissa == 0.0

    def is_finite(self) -> bool:
        return math.isfinite(self.mantissa)

    def is_nan(self) -> bool:
        return math.isnan(self.mantissa)

    def is_linear(self) -> bool:
        """True when the value fits in a double."""
        return self.pt == 0

    def __float__(self) -> float:
        if self.pt == 0:
            return self.sign * self.mantissa
        return self.sign * math.inf

    def __bool__(self) -> bool:
        return not self.is_zero()

    # ---- elementary functions --------------------------------------------

    def log(self) -> Hypernum:
        if self.sign < 0 and not self.is_zero():
            raise ValueError(f'log of negative Hypernum {self}')
        if self.pt > 0:
            return Hypernum._raw(1, self.pt - 1, self.mantissa)
        if self.mantissa == 0.0:
            return Hypernum(-math.inf)
        return Hypernum(math.log(self.mantissa))

    def exp(self) -> Hypernum:
        if self.sign < 0:
            if self.pt == 0:
                return Hypernum(math.exp(-self.mantissa))
            return Hypernum(0.0)
        if self.pt == 0 and self.mantissa <= CUTOFF:
            return Hypernum(math.exp(self.mantissa))
        return Hypernum._raw(1, self.pt + 1, self.mantissa)

    def __neg__(self) -> Hypernum:
        if self.is_zero():
            return self
        return Hypernum._raw(-self.sign, self.pt, self.mantissa)

    def __abs__(self) -> Hypernum:
        return self if self.sign > 0 else -self

    # ---- arithmetic ------------------------------------------------------

    def __add__(self, other) -> Hypernum:
        o = Hypernum.of(other)
        if self.pt == 0 and o.pt == 0:
            return Hypernum(float(self) + float(o))
        if not self.is_finite() or not o.is_finite():
            if self.is_finite():
                return o
            if o.is_finite():
                return self
            return Hypernum(float(self) + float(o))
        if self.is_zero():
            return o
        if o.is_zero():
            return self
        big, small = (self, o) if _cmp_abs(self, o) >= 0 else (o, self)
        la = abs(big).log()
        d = float(abs(small).log() - la)
        if big.sign == small.sign:
            delta = math.log1p(math.exp(d))
        else:
            if d == 0.0:
                return Hypernum(0.0)
            delta = math.log1p(-math.exp(d))
        if delta == 0.0:
            return big
        r = (la + delta).exp()
        return r if big.sign > 0 else -r

    __radd__ = __add__

    def __sub__(self, other) -> Hypernum:
        return self + (-Hypernum.of(other))

    def __rsub__(self, other) -> Hypernum:
        return Hypernum.of(other) - self

    def __mul__(self, other) -> Hypernum:
        o = Hypernum.of(other)
        if self.is_zero() or o.is_zero():
            return Hypernum(0.0)
        if self.pt == 0 and o.pt == 0 and self.mantissa < FAST and o.mantissa < FAST:
            return Hypernum(float(self) * float(o))
        r = (abs(self).log() + abs(o).log()).exp()
        return r if self.sign * o.sign > 0 else -r

    __rmul__ = __mul__

    def __truediv__(self, other) -> Hypernum:
        o = Hypernum.of(other)
        if o.is_zero():
            raise ZeroDivisionError('Hypernum division by zero')
        if self.is_zero():
            return Hypernum(0.0)
        if self.pt == 0 and o.pt == 0:
            q = float(self) / float(o)
            if math.isfinite(q):
                return Hypernum(q)
        r = (abs(self).log() - abs(o).log()).exp()
        return r if self.sign * o.sign > 0 else -r

    def __rtruediv__(self, other) -> Hypernum:
        return Hypernum.of(other) / self

    def __pow__(self, p: float) -> Hypernum:
        if self.sign < 0 and not self.is_zero():
            raise ValueError('fractional power of a negative Hypernum')
        if self.is_zero():
            return Hypernum(0.0 if p > 0 else (1.0 if p == 0 else math.inf))
        if self.pt == 0:
            try:
                return Hypernum(math.pow(self.mantissa, p))
            except OverflowError:
                pass
        return (self.log() * p).exp()

    # ---- ordering --------------------------------------------------------

    def _key(self):
        if math.isinf(self.mantissa):
            return (self.sign, self.sign * math.inf, 0.0)
        if self.sign > 0:
            return (1, self.pt, self.mantissa)
        return (-1, -self.pt, -self.mantissa)

    def __eq__(self, other):
        if not isinstance(other, (Hypernum, int, float)):
            return NotImplemented
        o = Hypernum.of(other)
        return self._key() == o._key()

    def __lt__(self, other):
        return self._key() < Hypernum.of(other)._key()

    def __le__(self, other):
        return self._key() <= Hypernum.of(other)._key()

    def __gt__(self, other):
        return self._key() > Hypernum.of(other)._key()

    def __ge__(self, other):
        return self._key() >= Hypernum.of(other)._key()

    def __hash__(self):
        return hash(self._key())

    # ---- text ------------------------------------------------------------

    def to_token(self) -> str:
        """Exact text form: ``repr(float)`` at level 0, ``[-]{pt}p{mantissa!r}`` above."""
        if self.pt == 0:
            return repr(float(self))
        return f"{'-' if self.sign < 0 else ''}{self.pt}p{self.mantissa!r}"

    @classmethod
    def from_token(cls, token) -> Hypernum:
        if isinstance(token, (int, float)):
            return cls(token)
        token = str(token).strip()
        m = _TOKEN.match(token)
        if not m:
            return cls(float(token))
        sign = -1 if m.group('sign') else 1
        return cls._raw(sign, int(m.group('pt')), float(m.group('mantissa')))

    def next_up(self) -> Hypernum:
        """Smallest representable Hypernum above this one."""
        if self.pt == 0:
            return Hypernum(math.nextafter(float(self), math.inf))
        toward = math.inf if self.sign > 0 else -math.inf
        return Hypernum._raw(self.sign, self.pt, math.nextafter(self.mantissa, toward))

    def log_float(self) -> float:
        """Natural log as a float; ``inf`` when even the log does not fit."""
        return float(self.log())

    def __repr__(self):
        if self.pt == 0:
            return f'Hypernum({float(self)!r})'
        return f'Hypernum(sign={self.sign}, pt={self.pt}, mantissa={self.mantissa!r})'

    __str__ = to_token


NEG_INF = Hypernum(-math.inf)
ZERO = Hypernum(0.0)
ONE = Hypernum(1.0)


def _cmp_abs(a: Hypernum, b: Hypernum) -> int:
    ka, kb = (a.pt, a.mantissa), (b.pt, b.mantissa)
    return (ka > kb) - (ka < kb)


def hmax(*values) -> Hypernum:
    return max(Hypernum.of(v) for v in values)


def hmin(*values) -> Hypernum:
    return min(Hypernum.of(v) for v in values)


def hsum(values) -> Hypernum:
    total = ZERO
    for v in values:
        total = total + v
    return total


def _lift(a: Hypernum, b: Hypernum):
    level = max(a.pt, b.pt)
    for _ in range(level):
        if a.sign < 0 or b.sign < 0 or a.is_zero() or b.is_zero():
            return None
        a, b = a.log(), b.log()
    return float(a), float(b)


def relative_slack(a, b) -> float:
    """Signed relative difference ``(a - b) / max(1, |b|)``.

    Above level 0 both numbers are lifted to their common level and the
    mantissas are compared, which is the finest resolution the encoding has.
    """
    a, b = Hypernum.of(a), Hypernum.of(b)
    if a.pt == 0 and b.pt == 0:
        fa, fb = float(a), float(b)
        if fa == fb:
            return 0.0
        return (fa - fb) / max(1.0, abs(fb))
    lifted = _lift(a, b)
    if lifted is None:
        return math.inf if a > b else -math.inf
    la, lb = lifted
    if la == lb:
        return 0.0
    return (la - lb) / max(1.0, abs(lb))


def relative_residual(a, b) -> float:
    return abs(relative_slack(a, b))
