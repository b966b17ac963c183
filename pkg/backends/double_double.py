"""
Double-double backend
Shadow values as unevaluated sums hi + lo of two binary64 numbers
(about 106 significant bits), renormalised after every operation.
"""

import math
from typing import Tuple

from core import eft
from core.kernel_lang import OpEvent, ShadowHook
from core.ops import Operator
from core.residue_engine import Residue


def _two_sum(a: float, b: float) -> Tuple[float, float]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a: float, b: float) -> Tuple[float, float]:
    """Assumes |a| >= |b|"""
    s = a + b
    return s, b - (s - a)


def _two_prod(a: float, b: float) -> Tuple[float, float]:
    p = a * b
    return p, eft.product_error(a, b, p)


class DoubleDouble(tuple):
    """Stored as (hi, lo) with |lo| <= 0.5 ulp(hi)"""
    __slots__ = ()

    def __new__(cls, hi: float, lo: float = 0.0):
        return super().__new__(cls, (float(hi), float(lo)))

    @property
    def hi(self) -> float:
        return self[0]

    @property
    def lo(self) -> float:
        return self[1]

    def is_finite(self) -> bool:
        return math.isfinite(self[0]) and math.isfinite(self[1])

    def __neg__(self) -> 'DoubleDouble':
        return DoubleDouble(-self[0], -self[1])

    def __abs__(self) -> 'DoubleDouble':
        return -self if self[0] < 0.0 or (self[0] == 0.0 and self[1] < 0.0) else self

    def __add__(self, other: 'DoubleDouble') -> 'DoubleDouble':
        s, e = _two_sum(self[0], other[0])
        t, f = _two_sum(self[1], other[1])
        e += t
        s, e = _quick_two_sum(s, e)
        e += f
        return DoubleDouble(*_quick_two_sum(s, e))

    def __sub__(self, other: 'DoubleDouble') -> 'DoubleDouble':
        return self + (-other)

    def __mul__(self, other: 'DoubleDouble') -> 'DoubleDouble':
        p, e = _two_prod(self[0], other[0])
        e += self[0] * other[1] + self[1] * other[0]
        return DoubleDouble(*_quick_two_sum(p, e))

    def __truediv__(self, other: 'DoubleDouble') -> 'DoubleDouble':
        q1 = self[0] / other[0]
        r = self - other * DoubleDouble(q1)
        q2 = r[0] / other[0]
        r = r - other * DoubleDouble(q2)
        q3 = r[0] / other[0]
        q1, q2 = _quick_two_sum(q1, q2)
        return DoubleDouble(q1, q2) + DoubleDouble(q3)

    def sqrt(self) -> 'DoubleDouble':
        """One Newton step on fl(sqrt(hi)) carried out in double-double"""
        if self[0] == 0.0:
            return DoubleDouble(0.0)
        s = math.sqrt(self[0])
        residual = self - DoubleDouble(*_two_prod(s, s))
        return DoubleDouble(s) + DoubleDouble(residual[0] / (2.0 * s))


_NAN_DD = DoubleDouble(math.nan, math.nan)


def dd_op(operator: Operator, operands) -> DoubleDouble:
    x = operands[0]
    if operator is Operator.ADD:
        return x + operands[1]
    if operator is Operator.SUB:
        return x - operands[1]
    if operator is Operator.MUL:
        return x * operands[1]
    if operator is Operator.DIV:
        if operands[1][0] == 0.0:
            return _NAN_DD
        return x / operands[1]
    if operator is Operator.SQRT:
        if x[0] < 0.0:
            return _NAN_DD
        return x.sqrt()
    if operator is Operator.FABS:
        return abs(x)
    if operator is Operator.NEG:
        return -x
    return x


class DDBackend(ShadowHook):
    """Residues from double-double shadow values; no rounding-trick handling"""
    name = 'dd'

    def lift(self, actual: float, literal: bool) -> DoubleDouble:
        return DoubleDouble(actual)

    def on_op(self, event: OpEvent) -> Tuple[DoubleDouble, Residue]:
        shadows = [s if isinstance(s, DoubleDouble) else DoubleDouble(a)
                   for s, a in zip(event.shadows, event.operands)]
        if any(not s.is_finite() for s in shadows):
            shadow = _NAN_DD
        else:
            shadow = dd_op(event.operator, shadows)
        actual = event.result
        if not shadow.is_finite() or not math.isfinite(actual):
            return shadow, Residue.poison()
        value = (shadow.hi - actual) + shadow.lo
        return shadow, Residue.unscored(value if math.isfinite(value) else eft.POISON)
