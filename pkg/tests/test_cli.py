import json

import pytest

from residue_debugger import EXIT_CLEAN, EXIT_ERROR, EXIT_FALSE_REPORTS, ResidueDebugger, main

PROGRAM = """
; (1 + t) - 1 loses the low bits of t
(define (shift t)
  (- (+ 1 t) 1))
"""


@pytest.fixture
def state_args(tmp_path):
    return ['--state-dir', str(tmp_path / 'state')]


def test_inspect(capsys):
    assert main(['inspect', 'diff-roots']) == EXIT_CLEAN
    out = capsys.readouterr().out
    assert 'entry diff-roots(x)' in out
    assert 'diff-roots-plain(x)' in out
    assert '5 static op(s)' in out


def test_run_with_ro_is_clean(capsys, state_args):
    assert main(['run', 'diff-roots', '--inputs', 'x=1e99', '--strict'] + state_args) == EXIT_CLEAN
    out = capsys.readouterr().out
    assert 'total false reports: repo 0' in out
    assert "warning op 3 '-'" in out


def test_run_without_ro_reports_false_negatives(capsys, state_args):
    argv = ['run', 'diff-roots', '--inputs', 'x=1e99', '--ro', 'off', '--strict'] + state_args
    assert main(argv) == EXIT_FALSE_REPORTS
    assert 'false negative op 4' in capsys.readouterr().out


def test_compare_two_backends(capsys, state_args):
    argv = ['compare', '--corpus', 'cancel-mul', '--count', '1',
            '--a', 'eftsan-buggy', '--b', 'repo'] + state_args
    assert main(argv) == EXIT_CLEAN
    out = capsys.readouterr().out
    assert 'eftsan-buggy' in out and 'repo' in out


def test_corpus_report(tmp_path, state_args):
    report = tmp_path / 'report.json'
    argv = ['corpus', '--entries', 'diff-roots', '--count', '1', '--backends', 'repo',
            '--report', str(report)] + state_args
    assert main(argv) == EXIT_CLEAN
    data = json.loads(report.read_text(encoding='utf-8'))
    assert [e['name'] for e in data['entries']] == ['diff-roots']
    assert data['totals'] == {'repo': 0}
    assert (tmp_path / 'report.txt').exists()


def test_oracle_check(capsys):
    assert main(['oracle-check', 'diff-roots', '--count', '2']) == EXIT_CLEAN
    assert '3/3 input(s) stable' in capsys.readouterr().out


def test_program_file_with_seeded_inputs(tmp_path, capsys, state_args):
    path = tmp_path / 'shift.fpk'
    path.write_text(PROGRAM, encoding='utf-8')
    argv = ['run', str(path), '--seed', '3', '--count', '4', '--exp-min', '-60',
            '--exp-max', '-55', '--backend', 'oracle'] + state_args
    assert main(argv) == EXIT_CLEAN
    out = capsys.readouterr().out
    assert 'shift' in out and 'oracle:512' in out


def test_input_file(tmp_path, state_args):
    inputs = tmp_path / 'inputs.txt'
    inputs.write_text("# one vector per line\n1e99\n4.0\n", encoding='utf-8')
    argv = ['run', 'diff-roots', '--input-file', str(inputs), '--backend', 'dd'] + state_args
    assert main(argv) in (EXIT_CLEAN, EXIT_FALSE_REPORTS)


@pytest.mark.parametrize("argv, message", [
    (['run', 'diff-roots', '--backend', 'quad', '--count', '1'], 'unknown backend'),
    (['run', 'no-such-program.fpk'], 'no corpus entry'),
    (['run', 'diff-roots', '--inputs', 'y=1'], 'not a parameter'),
])
def test_errors_exit_with_status_2(capsys, argv, message):
    assert main(argv) == EXIT_ERROR
    assert message in capsys.readouterr().err


def test_syntax_error_in_program_file(tmp_path, capsys):
    path = tmp_path / 'bad.fpk'
    path.write_text("(define (f x) (+ x y))", encoding='utf-8')
    assert main(['inspect', str(path)]) == EXIT_ERROR
    assert "unbound variable 'y'" in capsys.readouterr().err


def test_usage_errors():
    with pytest.raises(SystemExit) as info:
        main(['run'])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        main([])


def test_overrides_reach_the_engine(tmp_path):
    debugger = ResidueDebugger(overrides={'engine.warn_ulps': 30, 'engine.absorb_ulps': 8})
    assert debugger.engine_config.warn_ulps == 30
    assert debugger.engine_config.absorb_ulps == 8.0
    name, program, entry = debugger.load_program('cast-chain')
    assert name == 'cast-chain' and entry is not None
    assert debugger.inspect(program)['functions']['cast-chain']['static_ops'] == 6


def test_debug_logging_records_the_configuration(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    ResidueDebugger(overrides={'engine.warn_ulps': 40}, debug=True)
    # a non-debug instance closes the file handler again
    ResidueDebugger()
    log = (tmp_path / 'residue_debugger.log').read_text(encoding='utf-8')
    assert '[ResidueDebugger]' in log
    assert "Configuration: {" in log
    assert "'warn_ulps': 40" in log
