"""
Error-free transformations
Rounding-error estimates (mu) for every machine operation the kernel
language executes, plus the rounding-trick pattern detector.

A mu is "ideal minus actual" for a single operation on its actual operands.
Poisoned values are NaN and stay NaN downstream.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from .ops import Operator, OpProvenance

logger = logging.getLogger('ResidueDebugger.EFT')

POISON = float('nan')

_SPLITTER = 134217729.0  # 2**27 + 1
_SPLIT_LIMIT = 2.0 ** 996
# Below this magnitude the low part of a product may not be representable.
_PRODUCT_FLOOR = 2.0 ** -969

# 1.5 * 2**52 and the widened single-precision 1.5 * 2**23
TRICK_CONSTANTS = (6755399441055744.0, 12582912.0)


@dataclass(frozen=True)
class EftResult:
    """Machine result of an operation and its rounding error"""
    result: float
    mu: float


def is_poisoned(value: float) -> bool:
    return value != value


def out_of_range(actual: float) -> bool:
    """Poisoning predicate shared by every backend for machine results"""
    return not math.isfinite(actual)


def _fma_self_test() -> bool:
    """Check that math.fma exists and rounds once on a few hard cases"""
    fma = getattr(math, 'fma', None)
    if fma is None:
        return False
    cases = [
        (1.0 + 2.0 ** -52, 1.0 + 2.0 ** -52, -(1.0 + 2.0 ** -51)),
        (0.1, 10.0, -1.0),
        (3.0 * 2.0 ** -27 + 1.0, 3.0 * 2.0 ** -27 + 1.0, -1.0),
        (1e200, 1e-200, -1.0),
    ]
    try:
        for a, b, c in cases:
            expected = float(Fraction(a) * Fraction(b) + Fraction(c))
            if fma(a, b, c) != expected:
                return False
    except Exception as e:
        logger.warning(f"fused multiply-add self-test raised: {e}")
        return False
    return True


FMA_AVAILABLE = _fma_self_test()
logger.debug(f"two_prod strategy: {'fma' if FMA_AVAILABLE else 'dekker'}")


def _split(a: float) -> Tuple[float, float]:
    """Dekker split into two halves of at most 26 significant bits each"""
    if abs(a) > _SPLIT_LIMIT:
        hi, lo = _split(a * 2.0 ** -28)
        return hi * 2.0 ** 28, lo * 2.0 ** 28
    c = _SPLITTER * a
    abig = c - a
    hi = c - abig
    return hi, a - hi


def _dekker_error(a: float, b: float, p: float) -> float:
    ahi, alo = _split(a)
    bhi, blo = _split(b)
    return ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo


def product_error(a: float, b: float, p: float) -> float:
    """Exact a*b - p for p = fl(a*b)"""
    if FMA_AVAILABLE:
        return math.fma(a, b, -p)
    return _dekker_error(a, b, p)


def two_sum(a: float, b: float) -> EftResult:
    """Knuth's branch-free TwoSum"""
    s = a + b
    if not math.isfinite(s):
        return EftResult(s, POISON)
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return EftResult(s, err)


def two_prod(a: float, b: float) -> EftResult:
    p = a * b
    if not math.isfinite(p):
        return EftResult(p, POISON)
    if p == 0.0:
        # exact only if an operand was zero
        return EftResult(p, 0.0 if (a == 0.0 or b == 0.0) else POISON)
    if abs(p) < _PRODUCT_FLOOR:
        return EftResult(p, POISON)
    return EftResult(p, product_error(a, b, p))


def product_remainder(x: float, y: float, q: float) -> float:
    """Exact q*y - x for q = fl(x/y); the division mu fed to the residue engine"""
    if y == 0.0 or not (math.isfinite(q) and math.isfinite(x) and math.isfinite(y)):
        return POISON
    if q == 0.0:
        return -x
    if FMA_AVAILABLE:
        return math.fma(q, y, -x)
    p = q * y
    if not math.isfinite(p) or abs(p) < _PRODUCT_FLOOR:
        return POISON
    return (p - x) + _dekker_error(q, y, p)


def div_err(x: float, y: float, q: float) -> float:
    """Estimate of x/y - q, computed as fl((x - q*y)/y) with an exact numerator"""
    r = product_remainder(x, y, q)
    if is_poisoned(r):
        return POISON
    return -r / y


def radicand_remainder(x: float, s: float) -> float:
    """Exact x - s*s for s = fl(sqrt(x)); the sqrt mu fed to the residue engine"""
    if x < 0.0 or not (math.isfinite(x) and math.isfinite(s)):
        return POISON
    if s == 0.0:
        return x
    if FMA_AVAILABLE:
        return math.fma(-s, s, x)
    p = s * s
    if abs(p) < _PRODUCT_FLOOR:
        return POISON
    return (x - p) - _dekker_error(s, s, p)


def sqrt_err(x: float, s: float) -> float:
    """Estimate of sqrt(x) - s, computed as fl((x - s*s)/(2s))"""
    if x < 0.0:
        return POISON
    if s == 0.0:
        return 0.0 if x == 0.0 else POISON
    r = radicand_remainder(x, s)
    if is_poisoned(r):
        return POISON
    return r / (2.0 * s)


def narrow_to_binary32(x: float) -> np.float32:
    with np.errstate(over='ignore', under='ignore'):
        return np.float32(x)


def cast_err_64to32(x: float) -> Tuple[np.float32, float]:
    """Round to binary32 and return the exact narrowing error x - widen(x32)"""
    x32 = narrow_to_binary32(x)
    if not math.isfinite(x) or not np.isfinite(x32):
        return x32, POISON
    return x32, x - float(x32)


def is_trick_constant(value: Optional[float]) -> bool:
    return value is not None and abs(value) in TRICK_CONSTANTS


def is_trick_setup(prov: OpProvenance) -> bool:
    """True for (x + C), (C + x) and (x - C) with C a rounding-trick constant"""
    if not is_trick_constant(prov.constant):
        return False
    if prov.operator is Operator.ADD:
        return True
    return prov.operator is Operator.SUB and not prov.constant_on_left


def _signed_shift(prov: OpProvenance) -> float:
    return prov.constant if prov.operator is Operator.ADD else -prov.constant


def detect_round_trick(cur: OpProvenance, left: Optional[OpProvenance]) -> bool:
    """Structural match of the undo half of the rounding trick.

    ``cur`` must add or subtract a literal on the right of a value whose
    producing op (``left``) shifted by a trick constant, and the two shifts
    must cancel. No magnitude guard is applied.
    """
    if cur.operator not in (Operator.ADD, Operator.SUB):
        return False
    if cur.constant is None or cur.constant_on_left:
        return False
    if left is None or not is_trick_setup(left):
        return False
    return _signed_shift(cur) == -_signed_shift(left)
