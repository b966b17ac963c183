import math

import pytest

from core.errors import TraceMismatchError
from core.kernel_lang import Trace, TraceRecord
from core.ops import Operator
from core.residue_engine import Residue
from core.warning_scorer import (ScoreCard, ZeroUlpPolicy, compute_warnings, score,
                                 ulp_count)

ULP1 = 2.0 ** -52


def make_trace(pairs):
    """(result, residue) pairs as a trace of additions"""
    records = [TraceRecord(i, Operator.ADD, (result, 0.0), result, Residue(residue))
               for i, (result, residue) in enumerate(pairs)]
    return Trace(records, pairs[-1][0] if pairs else math.nan)


def test_ulp_count():
    assert ulp_count(ULP1 * 2.0 ** 45, 1.0) == 2.0 ** 45
    assert ulp_count(-ULP1, 1.0) == 1.0
    assert ulp_count(0.0, 0.0) == 0.0
    assert math.isinf(ulp_count(1e-300, 0.0))
    assert ulp_count(5e-324, 0.0, ZeroUlpPolicy.DENORMAL) == 1.0
    assert math.isnan(ulp_count(math.nan, 1.0))
    assert math.isnan(ulp_count(1.0, math.inf))


def test_warnings_at_threshold():
    trace = make_trace([(1.0, ULP1 * 2.0 ** 45), (1.0, ULP1 * 2.0 ** 44), (0.0, 1e-300),
                        (1.0, math.nan)])
    warnings = compute_warnings(trace)
    assert warnings.op_ids == [0, 2]
    assert 0 in warnings and 1 not in warnings
    assert len(warnings) == 2
    assert warnings.warnings[0].ulp_count == 2.0 ** 45
    assert math.isnan(warnings.ulp_counts[3])
    assert compute_warnings(trace, warn_ulps=44).op_ids == [0, 1, 2]


def test_score_counts_false_reports():
    truth = compute_warnings(make_trace([(1.0, 1.0), (1.0, 1.0), (1.0, 0.0)]))
    test = compute_warnings(make_trace([(1.0, 1.0), (1.0, 0.0), (1.0, 1.0)]))
    card = score(test, truth)
    assert (card.false_positives, card.false_negatives) == (1, 1)
    assert [(d.op_id, d.kind) for d in card.diffs] == [(1, 'fn'), (2, 'fp')]
    assert card.total == 2
    assert score(truth, truth).total == 0


def test_margin_excludes_ops_near_threshold():
    near = ULP1 * 2.0 ** 46
    truth = compute_warnings(make_trace([(1.0, near), (1.0, 1.0)]))
    test = compute_warnings(make_trace([(1.0, 0.0), (1.0, 0.0)]))
    card = score(test, truth)
    assert card.false_negatives == 2
    assert card.near_threshold == 1
    assert [d.near_threshold for d in card.diffs] == [True, False]
    card = score(test, truth, margin=2)
    assert card.false_negatives == 1
    assert card.excluded == 1


def test_traces_must_match():
    a = compute_warnings(make_trace([(1.0, 0.0)]))
    b = compute_warnings(make_trace([(1.0, 0.0), (1.0, 0.0)]))
    with pytest.raises(TraceMismatchError):
        score(a, b)


def test_scorecards_accumulate():
    total = ScoreCard()
    total.add(ScoreCard(1, 2, excluded=1))
    total.add(ScoreCard(0, 1, near_threshold=1))
    assert (total.false_positives, total.false_negatives, total.excluded,
            total.near_threshold) == (1, 3, 1, 1)
    assert total.to_dict()['false_negatives'] == 3
