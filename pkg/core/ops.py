"""
Operator vocabulary shared by the kernel language, the EFT layer and the
shadow backends.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional


class Operator(Enum):
    """Floating-point operators that receive an OpId and a hook call"""
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"
    SQRT = "sqrt"
    FABS = "fabs"
    NEG = "neg"
    CAST64TO32 = "cast64to32"
    CAST32TO64 = "cast32to64"

    @property
    def arity(self) -> int:
        return 2 if self in BINARY_OPERATORS else 1

    @property
    def is_cast(self) -> bool:
        return self in (Operator.CAST64TO32, Operator.CAST32TO64)


BINARY_OPERATORS = frozenset({Operator.ADD, Operator.SUB, Operator.MUL, Operator.DIV})

# Surface names accepted by the parser. A one-argument "-" is NEG.
OPERATOR_SYMBOLS = {
    "+": Operator.ADD,
    "-": Operator.SUB,
    "*": Operator.MUL,
    "/": Operator.DIV,
    "sqrt": Operator.SQRT,
    "fabs": Operator.FABS,
    "neg": Operator.NEG,
    "cast64to32": Operator.CAST64TO32,
    "cast32to64": Operator.CAST32TO64,
}


@dataclass(frozen=True)
class OpProvenance:
    """Producing-op metadata attached to every computed value.

    ``constant`` is the bit-exact value of a literal operand when the op had
    one; ``constant_on_left`` tells which side it was on. When both operands
    are literals the right one is recorded.
    """
    operator: Operator
    op_id: int
    constant: Optional[float] = None
    constant_on_left: bool = False
