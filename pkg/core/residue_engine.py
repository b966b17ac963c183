"""
Residue Engine for the residue debugger
Residue functions in the canonical form e_z = A*mu_z + B*e_x + C*e_y,
largest/second-largest contributor tracking, isZero/isAbsorbed flags and
absorption detection.

All engine arithmetic is plain binary64.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional, Tuple

from .eft import POISON, is_poisoned

NONE_OP = -1


@dataclass(frozen=True)
class Residue:
    """Residue of one value (ideal minus actual) and its bookkeeping"""
    value: float
    max_err_op: int = NONE_OP
    snd_err_op: int = NONE_OP
    is_absorbed: bool = False
    is_zero: bool = False

    @property
    def poisoned(self) -> bool:
        return is_poisoned(self.value)

    @classmethod
    def exact(cls) -> 'Residue':
        """Residue of an input or a literal"""
        return cls(0.0, is_zero=True)

    @classmethod
    def poison(cls) -> 'Residue':
        return cls(POISON)

    @classmethod
    def unscored(cls, value: float) -> 'Residue':
        """A bare value without contributor tracking (oracle-style backends)"""
        return cls(value)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'value': self.value,
            'max_err_op': self.max_err_op,
            'snd_err_op': self.snd_err_op,
            'is_absorbed': self.is_absorbed,
            'is_zero': self.is_zero,
        }


EXACT = Residue.exact()


@dataclass(frozen=True)
class TermDecomposition:
    """The three terms of a residue function; unary ops leave amp_term2 at 0"""
    intro_term: float
    amp_term1: float = 0.0
    amp_term2: float = 0.0

    @property
    def abs_intro_err(self) -> float:
        return abs(self.intro_term)

    @property
    def abs_amp_err1(self) -> float:
        return abs(self.amp_term1)

    @property
    def abs_amp_err2(self) -> float:
        return abs(self.amp_term2)

    def total(self) -> float:
        return (self.intro_term + self.amp_term1) + self.amp_term2

    @property
    def poisoned(self) -> bool:
        return (is_poisoned(self.intro_term) or is_poisoned(self.amp_term1)
                or is_poisoned(self.amp_term2))


@dataclass(frozen=True)
class AbsorptionRecord:
    """(i_x*, j_x*, i_y*, j_y*, k): contributors of both inputs and the detecting op"""
    x_max: int
    x_snd: int
    y_max: int
    y_snd: int
    op_id: int

    def as_tuple(self) -> Tuple[int, int, int, int, int]:
        return (self.x_max, self.x_snd, self.y_max, self.y_snd, self.op_id)


@dataclass(frozen=True)
class EngineConfig:
    """Thresholds of the residue engine"""
    cond_threshold: float = 2.0 ** 40
    absorb_ulps: float = 4.0
    warn_ulps: int = 45
    max_dyn_ops: int = 10_000_000
    inherit_absorbed: bool = True
    round_trick_detection: bool = True

    def __post_init__(self):
        if not self.cond_threshold > 1.0:
            raise ValueError(f"cond_threshold must exceed 1, got {self.cond_threshold}")
        if not self.absorb_ulps >= 1.0:
            raise ValueError(f"absorb_ulps must be at least 1, got {self.absorb_ulps}")
        if self.max_dyn_ops < 1:
            raise ValueError(f"max_dyn_ops must be positive, got {self.max_dyn_ops}")

    @classmethod
    def from_settings(cls, config: Optional[Dict[str, Any]]) -> 'EngineConfig':
        """Build from the 'engine' section of a loaded configuration"""
        engine = (config or {}).get('engine', {})
        defaults = cls()
        return cls(
            cond_threshold=float(engine.get('cond_threshold', defaults.cond_threshold)),
            absorb_ulps=float(engine.get('absorb_ulps', defaults.absorb_ulps)),
            warn_ulps=int(engine.get('warn_ulps', defaults.warn_ulps)),
            max_dyn_ops=int(engine.get('max_dyn_ops', defaults.max_dyn_ops)),
            inherit_absorbed=bool(engine.get('inherit_absorbed', defaults.inherit_absorbed)),
            round_trick_detection=bool(engine.get('round_trick_detection',
                                                  defaults.round_trick_detection)),
        )


@dataclass(frozen=True)
class EngineMode:
    """Which residue functions are used; the three named modes below are the backends"""
    name: str
    corrected_sub: bool = True
    corrected_div: bool = True
    higher_order_mul: bool = True
    sign_aware_abs: bool = True
    sum_of_roots_sqrt: bool = True
    instrument_casts: bool = True
    round_trick: bool = True


REPO_MODE = EngineMode('repo')
EFTSAN_FIXED_MODE = EngineMode('eftsan-fixed', higher_order_mul=False, sign_aware_abs=False,
                               sum_of_roots_sqrt=False, instrument_casts=False, round_trick=False)
EFTSAN_BUGGY_MODE = replace(EFTSAN_FIXED_MODE, name='eftsan-buggy',
                            corrected_sub=False, corrected_div=False)


def update_contributors(d: TermDecomposition, cur_op: int,
                        e_x: Residue, e_y: Residue) -> Tuple[int, int]:
    """Largest and second-largest contributors; ties go to e_z, then e_x, then e_y"""
    intro, amp1, amp2 = d.abs_intro_err, d.abs_amp_err1, d.abs_amp_err2
    if intro >= max(amp1, amp2):
        max_op, max_mag = cur_op, intro
        if amp1 >= amp2:
            snd_op, snd_mag = e_x.max_err_op, amp1
        else:
            snd_op, snd_mag = e_y.max_err_op, amp2
    elif amp1 >= amp2:
        max_op, max_mag = e_x.max_err_op, amp1
        if intro >= amp2:
            snd_op, snd_mag = cur_op, intro
        else:
            snd_op, snd_mag = e_y.max_err_op, amp2
    else:
        max_op, max_mag = e_y.max_err_op, amp2
        if intro >= amp1:
            snd_op, snd_mag = cur_op, intro
        else:
            snd_op, snd_mag = e_x.max_err_op, amp1

    if max_mag == 0.0:
        max_op = NONE_OP
    if snd_mag == 0.0 or snd_op == max_op:
        snd_op = NONE_OP
    return max_op, snd_op


def _largest_term(d: TermDecomposition) -> Tuple[int, float]:
    """Index (0 intro, 1 amp1, 2 amp2) and signed value of the largest term"""
    terms = (d.intro_term, d.amp_term1, d.amp_term2)
    best = 0
    for i in (1, 2):
        if abs(terms[i]) > abs(terms[best]):
            best = i
    return best, terms[best]


def set_flags(value: float, d: TermDecomposition, e_x: Residue, e_y: Residue,
              cfg: EngineConfig) -> Tuple[bool, bool]:
    """isZero and isAbsorbed of a freshly computed residue value"""
    if is_poisoned(value) or d.poisoned:
        return False, False

    magnitude = d.abs_intro_err + d.abs_amp_err1 + d.abs_amp_err2
    if value == 0.0:
        is_zero = True
    else:
        is_zero = magnitude / abs(value) > cfg.cond_threshold

    best, largest = _largest_term(d)
    others_nonzero = sum(1 for t in (d.intro_term, d.amp_term1, d.amp_term2) if t != 0.0) > 1
    is_absorbed = False
    if largest != 0.0 and others_nonzero:
        is_absorbed = abs(value - largest) <= cfg.absorb_ulps * math.ulp(value)

    if not is_absorbed and cfg.inherit_absorbed and largest != 0.0:
        if best == 1:
            is_absorbed = e_x.is_absorbed
        elif best == 2:
            is_absorbed = e_y.is_absorbed
    return is_zero, is_absorbed


def detect_absorption(cur_op: int, e_z: Residue, e_x: Residue,
                      e_y: Residue) -> Optional[AbsorptionRecord]:
    """Record the contributors of a harmful cancellation, None for benign ones"""
    if not (e_z.is_zero and e_z.is_absorbed):
        return None
    if not e_x.is_absorbed and not e_y.is_absorbed:
        return None
    return AbsorptionRecord(e_x.max_err_op, e_x.snd_err_op,
                            e_y.max_err_op, e_y.snd_err_op, cur_op)


class ResidueEngine:
    """Residue functions for one backend mode"""

    def __init__(self, config: Optional[EngineConfig] = None, mode: EngineMode = REPO_MODE):
        self.config = config or EngineConfig()
        self.mode = mode
        self.logger = logging.getLogger('ResidueDebugger.Engine')

    def _finish(self, d: TermDecomposition, cur_op: int,
                e_x: Residue, e_y: Residue = EXACT) -> Residue:
        if d.poisoned:
            return Residue.poison()
        value = d.total()
        if is_poisoned(value) or math.isinf(value):
            return Residue.poison()
        max_op, snd_op = update_contributors(d, cur_op, e_x, e_y)
        is_zero, is_absorbed = set_flags(value, d, e_x, e_y, self.config)
        return Residue(value, max_op, snd_op, is_absorbed, is_zero)

    @staticmethod
    def _any_poisoned(mu: float, *inputs: Residue) -> bool:
        return is_poisoned(mu) or any(r.poisoned for r in inputs)

    def residue_add(self, x: float, y: float, mu: float, e_x: Residue, e_y: Residue,
                    cur_op: int) -> Residue:
        if self._any_poisoned(mu, e_x, e_y):
            return Residue.poison()
        return self._finish(TermDecomposition(mu, e_x.value, e_y.value), cur_op, e_x, e_y)

    def residue_sub(self, x: float, y: float, mu: float, e_x: Residue, e_y: Residue,
                    cur_op: int) -> Residue:
        if self._any_poisoned(mu, e_x, e_y):
            return Residue.poison()
        c = -1.0 if self.mode.corrected_sub else 1.0
        return self._finish(TermDecomposition(mu, e_x.value, c * e_y.value), cur_op, e_x, e_y)

    def residue_mul(self, x: float, y: float, mu: float, e_x: Residue, e_y: Residue,
                    cur_op: int) -> Residue:
        if self._any_poisoned(mu, e_x, e_y):
            return Residue.poison()
        if self.mode.higher_order_mul:
            b = y + e_y.value / 2.0
            c = x + e_x.value / 2.0
        else:
            b, c = y, x
        return self._finish(TermDecomposition(mu, b * e_x.value, c * e_y.value),
                            cur_op, e_x, e_y)

    def residue_div(self, x: float, y: float, z: float, mu: float, e_x: Residue,
                    e_y: Residue, cur_op: int) -> Residue:
        """``mu`` is the exact product remainder z*y - x"""
        if self._any_poisoned(mu, e_x, e_y):
            return Residue.poison()
        denom = y + e_y.value
        if denom == 0.0 or not math.isfinite(denom):
            return Residue.poison()
        a = (-1.0 if self.mode.corrected_div else 1.0) / denom
        return self._finish(TermDecomposition(a * mu, e_x.value / denom, (-z / denom) * e_y.value),
                            cur_op, e_x, e_y)

    def residue_sqrt(self, x: float, z: float, mu: float, e_x: Residue, cur_op: int) -> Residue:
        """``mu`` is the exact radicand remainder x - z*z"""
        if self._any_poisoned(mu, e_x):
            return Residue.poison()
        if self.mode.sum_of_roots_sqrt:
            shifted = x + e_x.value
            if shifted < 0.0:
                return Residue.poison()
            denom = math.sqrt(x) + math.sqrt(shifted)
        else:
            denom = 2.0 * z
        if denom == 0.0:
            if mu == 0.0 and e_x.value == 0.0:
                return self._finish(TermDecomposition(0.0), cur_op, e_x)
            return Residue.poison()
        return self._finish(TermDecomposition(mu / denom, e_x.value / denom), cur_op, e_x)

    def residue_abs(self, x: float, e_x: Residue, cur_op: int) -> Residue:
        if e_x.poisoned:
            return Residue.poison()
        shifted = x + e_x.value
        if self.mode.sign_aware_abs and math.copysign(1.0, x) == math.copysign(1.0, shifted):
            term = math.copysign(1.0, x) * e_x.value
        else:
            term = abs(shifted) - abs(x)
        return self._finish(TermDecomposition(0.0, term), cur_op, e_x)

    def residue_neg(self, e_x: Residue, cur_op: int) -> Residue:
        if e_x.poisoned:
            return Residue.poison()
        return self._finish(TermDecomposition(0.0, -e_x.value), cur_op, e_x)

    def residue_cast(self, mu: float, e_x: Residue, cur_op: int) -> Residue:
        if self._any_poisoned(mu, e_x):
            return Residue.poison()
        if not self.mode.instrument_casts:
            mu = 0.0
        return self._finish(TermDecomposition(mu, e_x.value), cur_op, e_x)

    def overridden(self, value: float, cur_op: int) -> Residue:
        """Residue whose value was replaced by a probed value: a single local term"""
        if is_poisoned(value):
            return Residue.poison()
        return self._finish(TermDecomposition(value), cur_op, EXACT)
