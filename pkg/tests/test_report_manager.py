import json
import math

import pytest

from core.input_generator import float_to_hex
from core.report_manager import (EntryReport, InputResult, ReexecStats, ReportManager,
                                 agreement_bits)
from core.warning_scorer import FalseReport, NumericalWarning, ScoreCard, WarningSet


@pytest.mark.parametrize("test, truth, bits", [
    (1.0, 1.0, 53.0),
    (1.0 + 2.0 ** -10, 1.0, 10.0),
    (1.0, 0.0, 0.0),
    (-1.0, 1.0, 0.0),
])
def test_agreement_bits(test, truth, bits):
    assert agreement_bits(test, truth) == bits


def test_agreement_bits_of_poisoned_residues():
    assert math.isnan(agreement_bits(math.nan, 1.0))
    assert math.isnan(agreement_bits(1.0, math.nan))


def make_result(executions=1, fp=0, fn=0, truncated=False, warned=False):
    warnings = WarningSet()
    if warned:
        warnings.warnings[3] = NumericalWarning(3, '-', 0.0, 1.5e-50, math.inf, (6, 17))
    diffs = [FalseReport(4, 'fn', '*', math.inf, 0.0, False)] * fn
    return InputResult([1e99], 0.0, executions, truncated, warnings, ScoreCard(fp, fn, diffs),
                       [0.0], [53.0, 20.0, math.nan], hook_seconds=0.5, plain_seconds=0.25)


def test_reexec_stats():
    stats = ReexecStats.from_results([make_result(1), make_result(3), make_result(3, truncated=True)])
    assert stats.histogram == {1: 1, 3: 2}
    assert stats.maximum == 3
    assert stats.no_reexec == 1
    assert stats.truncated == 1
    assert math.isclose(stats.mean, 7 / 3)
    assert ReexecStats.from_results([]).maximum == 0


def test_entry_report_aggregates():
    report = EntryReport('diff-roots', 'repo', True, [make_result(fn=2), make_result(fp=1)])
    assert report.score.false_negatives == 2
    assert report.score.false_positives == 1
    assert report.accuracy() == {'median_bits': 36.5, 'min_bits': 20.0, 'max_bits': 53.0}
    timing = report.timing()
    assert timing['hook_seconds'] == 1.0
    assert timing['overhead'] == 2.0
    assert 'timing' not in report.to_dict()
    assert 'timing' in report.to_dict(emit_timing=True)


def test_manager_totals_and_render():
    manager = ReportManager()
    manager.add(EntryReport('diff-roots', 'repo', True, [make_result(3, warned=True)]))
    manager.add(EntryReport('diff-roots', 'eftsan-buggy', False, [make_result(fn=2)]))
    manager.add(EntryReport('cancel-mul', 'repo', True, [make_result(fp=1)]))
    assert manager.totals() == {'repo': 1, 'eftsan-buggy': 2}
    assert manager.find('diff-roots', 'eftsan-buggy').ro is False
    assert manager.find('diff-roots', 'dd') is None

    text = manager.render_text()
    assert 'diff-roots' in text and 'eftsan-buggy' in text
    assert "warning op 3 '-' at 6:17" in text
    assert 'false negative op 4' in text
    assert 'total false reports: repo 1, eftsan-buggy 2' in text
    assert 'warning op' not in manager.render_text(details=False)


def test_manager_writes_json_and_text(tmp_path):
    manager = ReportManager(emit_timing=True)
    manager.add(EntryReport('diff-roots', 'repo', True, [make_result(3, warned=True)]))
    path = tmp_path / 'out' / 'report.json'
    assert manager.write(str(path))
    data = json.loads(path.read_text(encoding='utf-8'))
    assert data['format'] == 'residue-report/1'
    entry = data['entries'][0]
    assert entry['name'] == 'diff-roots'
    assert entry['reexec']['maximum'] == 3
    assert entry['results'][0]['inputs'] == [float_to_hex(1e99)]
    assert 'timing' in entry
    assert (tmp_path / 'out' / 'report.txt').read_text(encoding='utf-8') == manager.render_text()
