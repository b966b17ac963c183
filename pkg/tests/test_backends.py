import math
from fractions import Fraction

import mpmath
import pytest
from mpmath.libmp import fnan, from_float

from backends import (ORACLE, REPO, BackendId, BackendKind, DDBackend, DoubleDouble,
                      OracleBackend, PlainBackend, ResidueBackend, create_hook)
from backends.bigfloat_oracle import bigfloat_op, residue_of
from core.errors import BackendError
from core.kernel_lang import execute
from core.ops import Operator
from core.orchestrator import repo_drive
from core.residue_engine import EFTSAN_FIXED_MODE, NONE_OP, EngineConfig
from core.warning_scorer import compute_warnings, score
from corpus import bundled_corpus, find_entry


# residue of y*y once y carries its probed residue
OVERRIDE_RUN_E4 = "0x1.17f7d4ed8c33fp-331"


def fmt(value):
    return f"{value:.16e}"


@pytest.mark.parametrize("text, expected", [
    ('repo', 'repo'),
    ('eftsan-fixed', 'eftsan-fixed'),
    ('eftsan', 'eftsan-fixed'),
    ('EFTSan-Buggy', 'eftsan-buggy'),
    ('oracle', 'oracle:512'),
    ('oracle:1024', 'oracle:1024'),
    ('dd', 'dd'),
    ('double-double', 'dd'),
    ('plain', 'plain'),
])
def test_backend_identifiers(text, expected):
    assert str(BackendId.parse(text)) == expected


@pytest.mark.parametrize("text", ['quad', 'repo:53', 'oracle:64', 'oracle:8192', 'oracle:many'])
def test_invalid_backend_identifiers(text):
    with pytest.raises(BackendError):
        BackendId.parse(text)


def test_backend_kinds():
    assert REPO.uses_engine and REPO.engine_mode.name == 'repo'
    assert not ORACLE.uses_engine and ORACLE.precision == 512
    assert isinstance(create_hook(ORACLE), OracleBackend)
    assert isinstance(create_hook(BackendId(BackendKind.DOUBLE_DOUBLE)), DDBackend)
    assert isinstance(create_hook(BackendId(BackendKind.PLAIN)), PlainBackend)
    assert isinstance(create_hook(REPO), ResidueBackend)


def test_diff_roots_first_run_residues(diff_roots):
    hook = ResidueBackend()
    trace = execute(diff_roots, [1e99], hook)
    e = trace.residues()
    assert fmt(e[0]) == '1.0000000000000000e+00'
    assert fmt(e[1]) == '1.3144752779492117e+32'
    assert fmt(e[2]) == '1.3144752779492117e+32'
    assert e[3] == 0.0 and e[4] == 0.0
    assert [r.as_tuple() for r in hook.absorptions] == [(2, 0, 1, NONE_OP, 3)]


def test_silenced_run_exposes_the_hidden_residue(diff_roots):
    hook = ResidueBackend(silent_ops={1, 2}, probe_ops={3})
    trace = execute(diff_roots, [1e99], hook)
    assert trace.residues()[1] == 0.0
    assert hook.temp_res_override[3] == 1.5811388300841897e-50
    assert hook.absorptions == []


def test_override_replaces_residue(diff_roots):
    hook = ResidueBackend(res_override={3: 1.5811388300841897e-50})
    trace = execute(diff_roots, [1e99], hook)
    assert trace.records[3].residue.max_err_op == 3
    assert trace.residues()[4].hex() == OVERRIDE_RUN_E4
    truth = execute(diff_roots, [1e99], OracleBackend()).residues()[4]
    assert math.isclose(trace.residues()[4], truth, rel_tol=1e-15)


def test_oracle_matches_high_precision_reference(diff_roots):
    trace = execute(diff_roots, [1e99], OracleBackend())
    with mpmath.workprec(400):
        x = mpmath.mpf(1e99)
        y = mpmath.sqrt(x + 1) - mpmath.sqrt(x)
    assert math.isclose(trace.residues()[3], float(y), rel_tol=1e-15)
    assert math.isclose(trace.residues()[4], float(y * y), rel_tol=1e-15)
    assert trace.residues()[0] == 1.0


@pytest.mark.parametrize("name", ['diff-roots', 'cancel-mul', 'poly-expand', 'sin-reduce'])
def test_oracle_precision_does_not_change_warnings(name):
    entry = find_entry(name)
    program = entry.load()
    for inputs in entry.inputs(10):
        low = compute_warnings(execute(program, inputs, OracleBackend(512)))
        high = compute_warnings(execute(program, inputs, OracleBackend(1024)))
        assert low.op_ids == high.op_ids


def test_oracle_poisons_invalid_operations(kernel):
    program = kernel("(define (f x) (+ (sqrt (- x 2)) 1))")
    trace = execute(program, [1.0], OracleBackend())
    assert math.isnan(trace.residues()[1])
    assert math.isnan(trace.residues()[2])
    assert OracleBackend().name == 'oracle:512'
    with pytest.raises(BackendError):
        OracleBackend(64)


def test_oracle_casts_keep_the_ideal_value(kernel):
    program = kernel("(define (f x) (cast32to64 (cast64to32 x)))")
    x = 1.0 + 2.0 ** -24
    trace = execute(program, [x], OracleBackend())
    assert trace.output == 1.0
    assert trace.residues() == [2.0 ** -24, 2.0 ** -24]


def test_bigfloat_helpers():
    third = bigfloat_op(Operator.DIV, [from_float(1.0), from_float(3.0)], 128)
    exact = float(Fraction(1, 3) - Fraction(1.0 / 3.0))
    assert math.isclose(residue_of(third, 1.0 / 3.0), exact, rel_tol=1e-15)
    assert math.isnan(residue_of(third, math.inf))
    assert residue_of(from_float(0.5), 0.5) == 0.0
    assert bigfloat_op(Operator.SQRT, [from_float(-1.0)], 128) == fnan


def test_double_double_arithmetic():
    third = DoubleDouble(1.0) / DoubleDouble(3.0)
    assert third.hi == 1.0 / 3.0
    with mpmath.workprec(200):
        lo_ref = float(mpmath.mpf(1) / 3 - mpmath.mpf(1.0 / 3.0))
    assert math.isclose(third.lo, lo_ref, rel_tol=1e-12)
    root = DoubleDouble(2.0).sqrt()
    assert root.hi == math.sqrt(2.0)
    assert abs(-third) == third


def test_dd_backend_residues_agree_with_oracle(kernel):
    program = kernel("(define (f x) (- (/ x 3) (* 0.1 x)))")
    dd = execute(program, [7.0], DDBackend()).residues()
    oracle = execute(program, [7.0], OracleBackend()).residues()
    for a, b in zip(dd, oracle):
        assert math.isclose(a, b, rel_tol=1e-10, abs_tol=1e-300)


def test_plain_backend_does_no_work(diff_roots):
    trace = execute(diff_roots, [1e99], PlainBackend())
    assert trace.residues() == [0.0] * 5


def test_round_trick_is_recognised(sin_reduce):
    hook = ResidueBackend()
    trace = execute(sin_reduce, [10.0], hook)
    assert hook.trick_sites == [(1, 2)]
    # the undo op only carries the residue of x * (2/pi)
    assert abs(trace.residues()[2]) <= abs(trace.residues()[0]) * 2

    fixed = ResidueBackend(EFTSAN_FIXED_MODE)
    execute(sin_reduce, [10.0], fixed)
    assert fixed.trick_sites == []


def test_round_trick_removes_false_positives(sin_reduce):
    entry = find_entry('sin-reduce')
    repo_total = fixed_total = 0
    for inputs in entry.inputs(10):
        truth = compute_warnings(execute(sin_reduce, inputs, OracleBackend()))
        repo = compute_warnings(execute(sin_reduce, inputs, ResidueBackend()))
        fixed = compute_warnings(execute(sin_reduce, inputs, ResidueBackend(EFTSAN_FIXED_MODE)))
        assert not {1, 2} & set(repo.op_ids)
        repo_total += score(repo, truth).false_positives
        fixed_total += score(fixed, truth).false_positives
    assert fixed_total > repo_total


ALL_BACKENDS = ['repo', 'eftsan-fixed', 'eftsan-buggy', 'oracle', 'oracle:1024', 'dd', 'plain']


@pytest.mark.parametrize("entry", bundled_corpus(), ids=lambda e: e.name)
def test_shadow_work_never_changes_actual_values(entry):
    program = entry.load()
    for inputs in entry.inputs(5):
        reference = execute(program, inputs, PlainBackend())
        expected = (reference.signature(), reference.output.hex())
        for text in ALL_BACKENDS:
            trace = execute(program, inputs, create_hook(BackendId.parse(text)))
            assert (trace.signature(), trace.output.hex()) == expected, text
        driven = repo_drive(program, inputs).trace
        assert (driven.signature(), driven.output.hex()) == expected


def test_round_trick_detection_switch(sin_reduce):
    entry = find_entry('sin-reduce')
    reduction_ops = set(range(7))
    off = EngineConfig(round_trick_detection=False)
    on_total = off_total = 0
    for inputs in entry.inputs(10):
        truth = compute_warnings(execute(sin_reduce, inputs, OracleBackend()))
        on = compute_warnings(execute(sin_reduce, inputs, ResidueBackend()))
        hook = ResidueBackend(config=off)
        without = compute_warnings(execute(sin_reduce, inputs, hook))
        assert hook.trick_sites == []
        on_total += sum(1 for d in score(on, truth).diffs
                        if d.kind == 'fp' and d.op_id in reduction_ops)
        off_total += sum(1 for d in score(without, truth).diffs
                         if d.kind == 'fp' and d.op_id in reduction_ops)
    assert on_total == 0
    assert off_total >= 1
