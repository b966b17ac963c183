import pytest

from backends import BackendId
from core.kernel_lang import execute, static_op_count
from corpus import CORPUS_DIR, bundled_corpus, find_entry

ENGINE_BACKENDS = [BackendId.parse(b) for b in ('repo', 'eftsan-fixed', 'eftsan-buggy')]


def test_bundled_entries_load():
    entries = bundled_corpus()
    assert [e.name for e in entries] == ['diff-roots', 'cancel-mul', 'poly-expand', 'sin-reduce',
                                         'harmonic-acc', 'cast-chain']
    for entry in entries:
        program = entry.load()
        assert program.arity == 1
        assert static_op_count(program) > 0
        assert entry.path.startswith(CORPUS_DIR)
        assert entry.to_dict()['name'] == entry.name


def test_inputs_put_pinned_vectors_first():
    entry = find_entry('diff-roots')
    vectors = entry.inputs(3)
    assert vectors[0] == [1e99]
    assert len(vectors) == 4
    assert vectors == entry.inputs(3)
    assert find_entry('no-such-entry') is None


@pytest.mark.parametrize("entry", bundled_corpus(), ids=lambda e: e.name)
def test_every_entry_executes_deterministically(entry):
    program = entry.load()
    for inputs in entry.inputs(5):
        assert execute(program, inputs).signature() == execute(program, inputs).signature()


POWER_OPS = [2, 3, 4, 5, 6]


def test_poly_expand_needs_the_second_order_product_term(debugger):
    entry = find_entry('poly-expand')
    vectors = entry.inputs(10)
    assert all(1.0 + v[0] == 1.0 for v in vectors)
    repo, fixed, buggy = debugger.run(entry.load(), entry.name, vectors, ENGINE_BACKENDS)
    assert repo.score.total == 0
    assert all(r.warnings.op_ids == [1] + POWER_OPS for r in repo.results)
    # first-order products of cancelled zeros stay zero
    for report in (fixed, buggy):
        assert report.score.false_positives == 0
        assert report.score.false_negatives == len(POWER_OPS) * len(vectors)
        assert {d.op_id for d in report.score.diffs} == set(POWER_OPS)


@pytest.mark.slow
def test_backend_ordering_over_the_corpus(debugger):
    reports = {}
    for entry in bundled_corpus():
        for report in debugger.run(entry.load(), entry.name, entry.inputs(), ENGINE_BACKENDS):
            reports[entry.name, report.backend] = report
    names = [e.name for e in bundled_corpus()]

    totals = {str(b): sum(reports[n, str(b)].score.total for n in names) for b in ENGINE_BACKENDS}
    assert totals['repo'] <= totals['eftsan-fixed'] <= totals['eftsan-buggy']
    for name in ('cancel-mul', 'sin-reduce', 'poly-expand'):
        assert reports[name, 'repo'].score.total < reports[name, 'eftsan-fixed'].score.total
    for name in names:
        assert all(d.near_threshold for d in reports[name, 'repo'].score.diffs)


@pytest.mark.slow
@pytest.mark.parametrize("entry", bundled_corpus(), ids=lambda e: e.name)
def test_ro_never_adds_false_reports(debugger, entry):
    program = entry.load()
    vectors = entry.inputs(20)
    repo = BackendId.parse('repo')
    with_ro, = debugger.run(program, entry.name, vectors, [repo], ro=True)
    without_ro, = debugger.run(program, entry.name, vectors, [repo], ro=False)
    assert with_ro.score.total <= without_ro.score.total
    assert with_ro.reexec.maximum <= 20
    if entry.name in ('diff-roots', 'cancel-mul'):
        assert with_ro.score.total == 0
    if entry.name == 'diff-roots':
        assert with_ro.results[0].executions == 3


@pytest.mark.slow
def test_ro_repairs_cancel_mul(debugger):
    entry = find_entry('cancel-mul')
    program = entry.load()
    repo = BackendId.parse('repo')
    with_ro, = debugger.run(program, entry.name, entry.inputs(3), [repo], ro=True)
    without_ro, = debugger.run(program, entry.name, entry.inputs(3), [repo], ro=False)
    assert with_ro.score.total == 0
    assert without_ro.score.total > 0
    assert with_ro.reexec.maximum > 1


@pytest.mark.slow
@pytest.mark.parametrize("name", ['harmonic-acc', 'cast-chain'])
def test_benign_entries_stay_quiet(debugger, name):
    entry = find_entry(name)
    report, = debugger.run(entry.load(), name, entry.inputs(10), [BackendId.parse('repo')])
    assert report.warning_count == 0
    assert report.score.total == 0

