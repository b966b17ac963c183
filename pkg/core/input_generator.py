"""
Input Generator for the residue debugger
Seeded, platform independent generation of binary64 input vectors, input
file parsing and the per-input state key.

The generator is SplitMix64. For every vector, parameters are drawn in
declaration order; per value the exponent comes from one draw, the 52
significand bits from the next, and under the mixed sign policy the sign
from a third.
"""

import hashlib
import logging
import math
import re
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence

from .errors import InputSpecError
from .kernel_lang import parse_number

logger = logging.getLogger('ResidueDebugger.Inputs')

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIN_EXPONENT = -1022
MAX_EXPONENT = 1023
_HEX_BITS_RE = re.compile(r"[0-9a-fA-F]{16}$")


class SplitMix64:
    """Steele, Lea and Flood's 64-bit mixing generator"""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + _GOLDEN_GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)


class SignPolicy(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    MIXED = "mixed"


@dataclass(frozen=True)
class ParamRange:
    """Exponent range and sign policy of one parameter"""
    e_min: int
    e_max: int
    sign: SignPolicy = SignPolicy.POSITIVE

    def __post_init__(self):
        if self.e_min > self.e_max:
            raise InputSpecError(f"empty exponent range [{self.e_min}, {self.e_max}]")
        if self.e_min < MIN_EXPONENT or self.e_max > MAX_EXPONENT:
            raise InputSpecError(f"exponent range [{self.e_min}, {self.e_max}] leaves the "
                                 f"binary64 normal range [{MIN_EXPONENT}, {MAX_EXPONENT}]")

    def to_dict(self) -> Dict:
        return {'e_min': self.e_min, 'e_max': self.e_max, 'sign': self.sign.value}

    @classmethod
    def from_dict(cls, data: Dict) -> 'ParamRange':
        return cls(int(data['e_min']), int(data['e_max']),
                   SignPolicy(data.get('sign', SignPolicy.POSITIVE.value)))


@dataclass(frozen=True)
class InputSpec:
    seed: int
    count: int
    params: Sequence[ParamRange] = field(default_factory=tuple)

    def __post_init__(self):
        if self.count < 1:
            raise InputSpecError(f"input count must be positive, got {self.count}")
        if not 0 <= self.seed <= _MASK64:
            raise InputSpecError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        object.__setattr__(self, 'params', tuple(self.params))

    def to_dict(self) -> Dict:
        return {'seed': self.seed, 'count': self.count,
                'params': [p.to_dict() for p in self.params]}

    @classmethod
    def from_dict(cls, data: Dict) -> 'InputSpec':
        return cls(int(data['seed']), int(data['count']),
                   tuple(ParamRange.from_dict(p) for p in data.get('params', [])))


def _draw(rng: SplitMix64, rng_range: ParamRange) -> float:
    span = rng_range.e_max - rng_range.e_min + 1
    exponent = rng_range.e_min + rng.next() % span
    significand = rng.next() >> 12
    negative = False
    if rng_range.sign is SignPolicy.MIXED:
        negative = bool(rng.next() >> 63)
    elif rng_range.sign is SignPolicy.NEGATIVE:
        negative = True
    bits = (int(negative) << 63) | ((exponent + 1023) << 52) | significand
    return struct.unpack('>d', struct.pack('>Q', bits))[0]


def generate_inputs(spec: InputSpec) -> List[List[float]]:
    """Deterministic input vectors; never NaN, infinite or subnormal"""
    rng = SplitMix64(spec.seed)
    vectors = [[_draw(rng, p) for p in spec.params] for _ in range(spec.count)]
    logger.debug(f"generated {len(vectors)} vector(s) from seed {spec.seed}")
    return vectors


def float_to_hex(x: float) -> str:
    """16 uppercase hex digits of the big-endian binary64 bit pattern"""
    return struct.pack('>d', x).hex().upper()


def hex_to_float(text: str) -> float:
    if not _HEX_BITS_RE.match(text):
        raise InputSpecError(f"'{text}' is not a 16-digit binary64 bit pattern")
    return struct.unpack('>d', bytes.fromhex(text))[0]


def parse_value(text: str) -> float:
    """A 16-hex-digit bit pattern, a decimal literal or a hex-float literal.

    Sixteen plain decimal digits read as a decimal number.
    """
    text = text.strip()
    if _HEX_BITS_RE.match(text) and not text.isdigit():
        return hex_to_float(text)
    number = parse_number(text)
    if number is None:
        raise InputSpecError(f"cannot parse input value '{text}'")
    return number


def parse_inputs(text: str, arity: Optional[int] = None) -> List[List[float]]:
    """One whitespace separated vector per line; blank and '#' lines ignored"""
    vectors = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        try:
            vector = [parse_value(tok) for tok in line.split()]
        except InputSpecError as e:
            raise InputSpecError(f"line {lineno}: {e}") from e
        if arity is not None and len(vector) != arity:
            raise InputSpecError(f"line {lineno}: expected {arity} values, got {len(vector)}")
        vectors.append(vector)
    return vectors


def parse_input_file(path: str, arity: Optional[int] = None) -> List[List[float]]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return parse_inputs(f.read(), arity)
    except OSError as e:
        raise InputSpecError(f"cannot read input file {path}: {e}") from e


def parse_assignments(items: Iterable[str], params: Sequence[str]) -> List[float]:
    """Command line 'name=value' pairs into a vector ordered like ``params``"""
    values: Dict[str, float] = {}
    for item in items:
        name, sep, text = item.partition('=')
        if not sep:
            raise InputSpecError(f"expected name=value, got '{item}'")
        if name not in params:
            raise InputSpecError(f"'{name}' is not a parameter of the entry function")
        values[name] = parse_value(text)
    missing = [p for p in params if p not in values]
    if missing:
        raise InputSpecError(f"missing input value(s) for {', '.join(missing)}")
    return [values[p] for p in params]


def input_key(program_name: str, inputs: Sequence[float]) -> str:
    """Stable identifier of a (program, input vector) pair"""
    payload = program_name + ':' + ','.join(float_to_hex(x) for x in inputs)
    return hashlib.sha1(payload.encode('utf-8')).hexdigest()[:16]


def is_normal(x: float) -> bool:
    return math.isfinite(x) and (x == 0.0 or abs(x) >= 2.0 ** MIN_EXPONENT)
