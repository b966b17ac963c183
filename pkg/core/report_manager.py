"""
Report Manager for the residue debugger
Collects per-input results into per-entry reports, aggregates statistics
and writes them as a structured JSON file plus a human readable text file.
"""

import json
import logging
import math
import os
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .input_generator import float_to_hex
from .kernel_lang import Trace
from .warning_scorer import ScoreCard, WarningSet

REPORT_FORMAT = "residue-report/1"
MAX_AGREEMENT_BITS = 53.0


def agreement_bits(test: float, truth: float) -> float:
    """Bits to which a residue agrees with the oracle residue; NaN when either is poisoned"""
    if test != test or truth != truth:
        return math.nan
    if test == truth:
        return MAX_AGREEMENT_BITS
    if truth == 0.0:
        return 0.0
    relative = abs(test - truth) / abs(truth)
    return float(max(0.0, min(MAX_AGREEMENT_BITS, -math.log2(relative))))


def trace_agreement(test: Trace, truth: Trace) -> List[float]:
    return [agreement_bits(a.residue.value, b.residue.value)
            for a, b in zip(test.records, truth.records)]


@dataclass
class InputResult:
    """Outcome of one input vector under one backend"""
    inputs: List[float]
    output: float
    executions: int
    truncated: bool
    warnings: WarningSet
    score: ScoreCard
    residues: List[float] = field(default_factory=list)
    agreement: List[float] = field(default_factory=list)
    hook_seconds: float = 0.0
    plain_seconds: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'inputs': [float_to_hex(x) for x in self.inputs],
            'inputs_decimal': [repr(x) for x in self.inputs],
            'output': repr(self.output),
            'executions': self.executions,
            'truncated': self.truncated,
            'warnings': self.warnings.to_dict()['warnings'],
            'score': self.score.to_dict(),
        }


@dataclass
class ReexecStats:
    histogram: Dict[int, int]
    mean: float
    maximum: int
    no_reexec: int
    truncated: int

    @classmethod
    def from_results(cls, results: Sequence[InputResult]) -> 'ReexecStats':
        if not results:
            return cls({}, 0.0, 0, 0, 0)
        counts = [r.executions for r in results]
        return cls(dict(sorted(Counter(counts).items())), float(np.mean(counts)), max(counts),
                   sum(1 for c in counts if c <= 1), sum(1 for r in results if r.truncated))


@dataclass
class EntryReport:
    """All inputs of one program under one backend"""
    name: str
    backend: str
    ro: bool
    results: List[InputResult] = field(default_factory=list)

    @property
    def score(self) -> ScoreCard:
        total = ScoreCard()
        for result in self.results:
            total.add(result.score)
        return total

    @property
    def warning_count(self) -> int:
        return sum(len(r.warnings) for r in self.results)

    @property
    def reexec(self) -> ReexecStats:
        return ReexecStats.from_results(self.results)

    def accuracy(self) -> Dict[str, float]:
        bits = [b for r in self.results for b in r.agreement if b == b]
        if not bits:
            return {}
        return {'median_bits': float(np.median(bits)), 'min_bits': float(np.min(bits)),
                'max_bits': float(np.max(bits))}

    def timing(self) -> Dict[str, float]:
        hook = sum(r.hook_seconds for r in self.results)
        out = {'hook_seconds': hook}
        plain = [r.plain_seconds for r in self.results if r.plain_seconds is not None]
        if plain:
            out['plain_seconds'] = sum(plain)
            out['overhead'] = hook / out['plain_seconds'] if out['plain_seconds'] > 0 else math.inf
        return out

    def to_dict(self, emit_timing: bool = False) -> Dict[str, Any]:
        card = self.score
        data = {
            'name': self.name,
            'backend': self.backend,
            'ro': self.ro,
            'inputs': len(self.results),
            'warnings': self.warning_count,
            'false_positives': card.false_positives,
            'false_negatives': card.false_negatives,
            'excluded': card.excluded,
            'near_threshold': card.near_threshold,
            'reexec': asdict(self.reexec),
            'accuracy': self.accuracy(),
            'results': [r.to_dict() for r in self.results],
        }
        if emit_timing:
            data['timing'] = self.timing()
        return data


class ReportManager:
    """Accumulates entry reports and renders them"""

    def __init__(self, emit_timing: bool = False):
        self.emit_timing = emit_timing
        self.entries: List[EntryReport] = []
        self.logger = logging.getLogger('ResidueDebugger.ReportManager')

    def add(self, report: EntryReport) -> None:
        self.entries.append(report)

    def find(self, name: str, backend: str) -> Optional[EntryReport]:
        for entry in self.entries:
            if entry.name == name and entry.backend == backend:
                return entry
        return None

    def totals(self) -> Dict[str, int]:
        """Total false reports per backend across all entries"""
        totals: Dict[str, int] = {}
        for entry in self.entries:
            totals[entry.backend] = totals.get(entry.backend, 0) + entry.score.total
        return totals

    def to_dict(self) -> Dict[str, Any]:
        return {
            'format': REPORT_FORMAT,
            'generated': datetime.now().isoformat(),
            'entries': [e.to_dict(self.emit_timing) for e in self.entries],
            'totals': self.totals(),
        }

    def render_text(self, details: bool = True) -> str:
        lines = []
        header = f"{'entry':<16}{'backend':<14}{'ro':<5}{'inputs':>7}{'warn':>7}" \
                 f"{'FP':>6}{'FN':>6}{'near':>6}{'exec':>7}"
        if self.emit_timing:
            header += f"{'overhead':>10}"
        lines.append(header)
        lines.append('-' * len(header))
        for entry in self.entries:
            card = entry.score
            stats = entry.reexec
            row = f"{entry.name:<16}{entry.backend:<14}{'on' if entry.ro else 'off':<5}" \
                  f"{len(entry.results):>7}{entry.warning_count:>7}{card.false_positives:>6}" \
                  f"{card.false_negatives:>6}{card.near_threshold:>6}{stats.mean:>7.2f}"
            if self.emit_timing:
                overhead = entry.timing().get('overhead')
                row += f"{overhead:>10.2f}" if overhead is not None else f"{'-':>10}"
            lines.append(row)

        if details:
            for entry in self.entries:
                for result in entry.results:
                    if not result.warnings and not result.score.diffs:
                        continue
                    vector = ' '.join(repr(x) for x in result.inputs)
                    lines.append("")
                    lines.append(f"{entry.name} [{entry.backend}] inputs {vector}: "
                                 f"{result.executions} execution(s)")
                    for op_id in result.warnings.op_ids:
                        w = result.warnings.warnings[op_id]
                        lines.append(f"  warning op {w.op_id} '{w.operator}' at "
                                     f"{w.position[0]}:{w.position[1]}: actual {w.actual:.16e} "
                                     f"residue {w.residue:.16e} ({_format_ulps(w.ulp_count)} ulps)")
                    for diff in result.score.diffs:
                        tag = 'false positive' if diff.kind == 'fp' else 'false negative'
                        near = ' near threshold' if diff.near_threshold else ''
                        lines.append(f"  {tag} op {diff.op_id} '{diff.operator}'{near}")
        totals = self.totals()
        if totals:
            lines.append("")
            lines.append("total false reports: " +
                         ', '.join(f"{name} {count}" for name, count in totals.items()))
        return '\n'.join(lines) + '\n'

    def write(self, path: str) -> bool:
        """Write ``path`` (JSON) and ``path`` with a .txt suffix (text)"""
        try:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(self.to_dict(), f, indent=2, default=_json_default)
            text_path = os.path.splitext(path)[0] + '.txt'
            with open(text_path, 'w', encoding='utf-8') as f:
                f.write(self.render_text())
            self.logger.info(f"Report written to {path} and {text_path}")
            return True
        except Exception as e:
            self.logger.error(f"Error writing report: {e}")
            return False


def _format_ulps(count: float) -> str:
    if math.isinf(count):
        return 'inf'
    return f"2^{math.log2(count):.1f}" if count > 0 else '0'


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return str(value)
