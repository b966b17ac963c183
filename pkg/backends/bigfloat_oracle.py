"""
Big-float oracle backend
Ground-truth residues from arbitrary precision shadow values kept as raw
mpmath mpf tuples (sign, mantissa, exponent, bitcount). Every shadow result
is correctly rounded to nearest-even at the working precision.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from mpmath.libmp import (ComplexResult, fnan, from_float, mpf_abs, mpf_add, mpf_div, mpf_mul,
                          mpf_neg, mpf_pos, mpf_sqrt, mpf_sub, round_nearest, to_float)

from core import eft
from core.errors import BackendError
from core.kernel_lang import OpEvent, ShadowHook, Trace
from core.ops import Operator
from core.residue_engine import Residue

BigFloat = Tuple[int, int, int, int]

MIN_PRECISION = 128
MAX_PRECISION = 4096
DEFAULT_PRECISION = 512
EXPONENT_LIMIT = 2 ** 20

_BINARY32_BITS = 24
_BINARY64_BITS = 53


def is_special(value: BigFloat) -> bool:
    """NaN or infinity (zero is an ordinary value)"""
    _, man, exp, _ = value
    return not man and bool(exp)


def out_of_range(value: BigFloat) -> bool:
    _, man, exp, bc = value
    return bool(man) and abs(exp + bc) > EXPONENT_LIMIT


def bigfloat_op(operator: Operator, operands: Sequence[BigFloat], precision: int) -> BigFloat:
    """Correctly rounded result at ``precision`` bits; fnan for invalid or out-of-range results"""
    if any(is_special(a) for a in operands):
        return fnan
    x = operands[0]
    try:
        if operator is Operator.ADD:
            result = mpf_add(x, operands[1], precision, round_nearest)
        elif operator is Operator.SUB:
            result = mpf_sub(x, operands[1], precision, round_nearest)
        elif operator is Operator.MUL:
            result = mpf_mul(x, operands[1], precision, round_nearest)
        elif operator is Operator.DIV:
            result = mpf_div(x, operands[1], precision, round_nearest)
        elif operator is Operator.SQRT:
            result = mpf_sqrt(x, precision, round_nearest)
        elif operator is Operator.FABS:
            result = mpf_abs(x, precision, round_nearest)
        elif operator is Operator.NEG:
            result = mpf_neg(x, precision, round_nearest)
        elif operator is Operator.CAST64TO32:
            result = mpf_pos(x, _BINARY32_BITS, round_nearest)
        else:
            result = mpf_pos(x, precision, round_nearest)
    except (ComplexResult, ZeroDivisionError):
        return fnan
    if out_of_range(result):
        return fnan
    return result


def round_to_binary64(value: BigFloat) -> float:
    if is_special(value):
        return math.nan
    return to_float(value, rnd=round_nearest)


def residue_of(shadow: BigFloat, actual: float) -> float:
    """binary64 rounding of the exact difference shadow - actual"""
    if is_special(shadow) or not math.isfinite(actual):
        return eft.POISON
    value = to_float(mpf_sub(shadow, from_float(actual)), rnd=round_nearest)
    return value if math.isfinite(value) else eft.POISON


@dataclass(frozen=True)
class OracleShadow:
    value: BigFloat
    alt: Optional[BigFloat] = None


class OracleBackend(ShadowHook):
    """Shadow hook computing ideal values at ``precision`` bits"""

    def __init__(self, precision: int = DEFAULT_PRECISION, round_trick: bool = True):
        if not MIN_PRECISION <= precision <= MAX_PRECISION:
            raise BackendError(f"oracle precision must lie in [{MIN_PRECISION}, {MAX_PRECISION}], "
                               f"got {precision}")
        self.precision = precision
        self.round_trick = round_trick
        self.name = f"oracle:{precision}"
        self.trace: Optional[Trace] = None
        self.logger = logging.getLogger('ResidueDebugger.Oracle')

    def begin(self, trace: Trace) -> None:
        self.trace = trace

    def lift(self, actual: float, literal: bool) -> OracleShadow:
        return OracleShadow(from_float(actual))

    def on_op(self, event: OpEvent) -> Tuple[OracleShadow, Residue]:
        shadows = [s if isinstance(s, OracleShadow) else OracleShadow(from_float(a))
                   for s, a in zip(event.shadows, event.operands)]
        values = [s.value for s in shadows]
        alt = None

        if event.operator.is_cast:
            # the ideal computation never narrows
            shadow = values[0]
        elif (self.round_trick and shadows[0].alt is not None
              and eft.detect_round_trick(event.provenance, event.operand_provenance[0])):
            shadow = bigfloat_op(event.operator, [shadows[0].alt, values[1]], self.precision)
            self._patch_setup(event.operand_provenance[0].op_id, shadows[0].alt)
        else:
            shadow = bigfloat_op(event.operator, values, self.precision)
            if self.round_trick and eft.is_trick_setup(event.provenance) and not is_special(shadow):
                alt = mpf_pos(shadow, _BINARY64_BITS, round_nearest)

        residue = Residue.unscored(residue_of(shadow, event.result))
        return OracleShadow(shadow, alt), residue

    def _patch_setup(self, op_id: int, alt: BigFloat) -> None:
        if self.trace is None or op_id >= len(self.trace.records):
            return
        record = self.trace.records[op_id]
        record.residue = Residue.unscored(residue_of(alt, record.result))
        self.logger.debug(f"rounding trick: setup op {op_id} shadow rounded to binary64")
