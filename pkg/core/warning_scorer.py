"""
Warning Scorer for the residue debugger
Turns traces into numerical warnings and scores a backend's warnings
against the oracle's (false positives / false negatives per OpId).
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from .errors import TraceMismatchError
from .kernel_lang import Trace

DEFAULT_WARN_ULPS = 45
NEAR_THRESHOLD_FACTOR = 2  # within 2**2 of the threshold
_MIN_SUBNORMAL = 5e-324

logger = logging.getLogger('ResidueDebugger.WarningScorer')


class ZeroUlpPolicy(Enum):
    """How a nonzero residue on an actual value of exactly zero is counted"""
    INFINITE = "infinite"
    DENORMAL = "denormal"


def ulp_count(residue: float, actual: float,
              policy: ZeroUlpPolicy = ZeroUlpPolicy.INFINITE) -> float:
    """|residue| in units of ulp(actual); NaN for poisoned residues"""
    if residue != residue or not math.isfinite(actual):
        return math.nan
    if residue == 0.0:
        return 0.0
    if actual == 0.0:
        if policy is ZeroUlpPolicy.INFINITE:
            return math.inf
        return abs(residue) / _MIN_SUBNORMAL
    return abs(residue) / math.ulp(actual)


@dataclass(frozen=True)
class NumericalWarning:
    op_id: int
    operator: str
    actual: float
    residue: float
    ulp_count: float
    position: Tuple[int, int] = (0, 0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'op_id': self.op_id,
            'operator': self.operator,
            'actual': self.actual,
            'residue': self.residue,
            'ulp_count': self.ulp_count,
            'position': f"{self.position[0]}:{self.position[1]}",
        }


@dataclass
class WarningSet:
    """Warnings of one trace plus the per-op ulp counts they were derived from"""
    warnings: Dict[int, NumericalWarning] = field(default_factory=dict)
    ulp_counts: List[float] = field(default_factory=list)
    operators: Tuple[str, ...] = ()
    warn_ulps: int = DEFAULT_WARN_ULPS

    @property
    def op_ids(self) -> List[int]:
        return sorted(self.warnings)

    def __len__(self) -> int:
        return len(self.warnings)

    def __contains__(self, op_id: int) -> bool:
        return op_id in self.warnings

    def to_dict(self) -> Dict[str, Any]:
        return {'warn_ulps': self.warn_ulps,
                'warnings': [self.warnings[k].to_dict() for k in self.op_ids]}


def compute_warnings(trace: Trace, warn_ulps: int = DEFAULT_WARN_ULPS,
                     policy: ZeroUlpPolicy = ZeroUlpPolicy.INFINITE) -> WarningSet:
    threshold = 2.0 ** warn_ulps
    result = WarningSet(operators=tuple(r.operator.value for r in trace.records),
                        warn_ulps=warn_ulps)
    for record in trace.records:
        count = ulp_count(record.residue.value, record.result, policy)
        result.ulp_counts.append(count)
        if count >= threshold:
            result.warnings[record.op_id] = NumericalWarning(
                record.op_id, record.operator.value, record.result, record.residue.value,
                count, record.position)
    return result


@dataclass(frozen=True)
class FalseReport:
    """One OpId where a backend and the oracle disagree"""
    op_id: int
    kind: str  # 'fp' or 'fn'
    operator: str
    oracle_ulps: float
    test_ulps: float
    near_threshold: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'op_id': self.op_id,
            'kind': self.kind,
            'operator': self.operator,
            'oracle_ulps': self.oracle_ulps,
            'test_ulps': self.test_ulps,
            'near_threshold': self.near_threshold,
        }


@dataclass
class ScoreCard:
    false_positives: int = 0
    false_negatives: int = 0
    diffs: List[FalseReport] = field(default_factory=list)
    excluded: int = 0
    near_threshold: int = 0

    @property
    def total(self) -> int:
        return self.false_positives + self.false_negatives

    def add(self, other: 'ScoreCard') -> None:
        """Accumulate another input's card; counts are summed across inputs"""
        self.false_positives += other.false_positives
        self.false_negatives += other.false_negatives
        self.diffs.extend(other.diffs)
        self.excluded += other.excluded
        self.near_threshold += other.near_threshold

    def to_dict(self) -> Dict[str, Any]:
        return {
            'false_positives': self.false_positives,
            'false_negatives': self.false_negatives,
            'excluded': self.excluded,
            'near_threshold': self.near_threshold,
            'diffs': [d.to_dict() for d in self.diffs],
        }


def _in_band(count: float, warn_ulps: int, width: float) -> bool:
    if count != count or math.isinf(count):
        return False
    return 2.0 ** (warn_ulps - width) <= count <= 2.0 ** (warn_ulps + width)


def score(test: WarningSet, truth: WarningSet, margin: Optional[float] = None) -> ScoreCard:
    """Set difference of warning OpIds, optionally excluding a band around the threshold"""
    if test.operators != truth.operators:
        raise TraceMismatchError(f"warning sets come from different traces "
                                 f"({len(test.operators)} vs {len(truth.operators)} ops)")
    warn_ulps = truth.warn_ulps
    card = ScoreCard()
    for op_id in sorted(set(test.warnings) ^ set(truth.warnings)):
        oracle_ulps = truth.ulp_counts[op_id]
        if margin is not None and _in_band(oracle_ulps, warn_ulps, margin):
            card.excluded += 1
            continue
        kind = 'fp' if op_id in test.warnings else 'fn'
        near = _in_band(oracle_ulps, warn_ulps, NEAR_THRESHOLD_FACTOR)
        card.diffs.append(FalseReport(op_id, kind, truth.operators[op_id], oracle_ulps,
                                      test.ulp_counts[op_id], near))
        if kind == 'fp':
            card.false_positives += 1
        else:
            card.false_negatives += 1
        card.near_threshold += int(near)
    return card
