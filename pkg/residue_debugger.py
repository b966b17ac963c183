#!/usr/bin/env python3
"""
Residue Debugger
Residue-based floating-point debugger for a small numerical kernel language

Runs kernel programs under pluggable residue backends, repairs absorbed
residues by multi-run residue override, and scores every backend's
numerical warnings against an arbitrary precision oracle.
"""

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

from backends import BackendId, BackendKind, PlainBackend, create_hook
from core.config_manager import ConfigManager
from core.errors import InputSpecError, ResidueDebuggerError
from core.input_generator import (InputSpec, ParamRange, SignPolicy, generate_inputs,
                                  parse_assignments, parse_input_file)
from core.kernel_lang import Program, Trace, call_graph, execute, parse_program, static_op_count
from core.orchestrator import ResidueOrchestrator
from core.report_manager import EntryReport, InputResult, ReportManager, trace_agreement
from core.residue_engine import EngineConfig
from core.state_store import StateStore
from core.warning_scorer import WarningSet, ZeroUlpPolicy, compute_warnings, score
from corpus import CorpusEntry, bundled_corpus, find_entry

__version__ = "1.0.0"

EXIT_CLEAN = 0
EXIT_FALSE_REPORTS = 1
EXIT_ERROR = 2

LOG_FORMAT = '[%(name)s] %(asctime)s - %(levelname)s - %(message)s'
DEFAULT_BACKENDS = ('repo', 'eftsan-fixed', 'eftsan-buggy')


class ResidueDebugger:
    """Coordinates configuration, execution, scoring and reporting"""

    def __init__(self, config_path: Optional[str] = None,
                 overrides: Optional[Dict[str, Any]] = None, debug: bool = False):
        self.version = __version__
        self.config_manager = ConfigManager()
        self.config = self.config_manager.load_config(config_path)
        if overrides:
            self.config = self.config_manager.apply_overrides(self.config, overrides)
        if debug:
            self.config['advanced_settings']['enable_debug_logging'] = True
        self.logger = logging.getLogger('ResidueDebugger')
        self._configure_logging()

    def _configure_logging(self):
        """Configure logging based on enable_debug_logging setting"""
        root_logger = logging.getLogger()
        for handler in root_logger.handlers[:]:
            root_logger.removeHandler(handler)
            handler.close()

        if self.config['advanced_settings']['enable_debug_logging']:
            root_logger.setLevel(logging.DEBUG)
            file_handler = logging.FileHandler('residue_debugger.log', encoding='utf-8')
            file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
            root_logger.addHandler(file_handler)
            stream_handler = logging.StreamHandler()
            stream_handler.setFormatter(logging.Formatter(LOG_FORMAT))
            root_logger.addHandler(stream_handler)
            self.logger.info("Debug logging enabled - full logging active")
            self.logger.debug(f"Configuration: {self.config_manager.get_config_summary(self.config)}")
        else:
            root_logger.setLevel(logging.WARNING)
            stream_handler = logging.StreamHandler(sys.stderr)
            stream_handler.setFormatter(logging.Formatter(LOG_FORMAT))
            root_logger.addHandler(stream_handler)

    # ------------------------------------------------------------ settings

    @property
    def engine_config(self) -> EngineConfig:
        return EngineConfig.from_settings(self.config)

    @property
    def zero_ulp_policy(self) -> ZeroUlpPolicy:
        return ZeroUlpPolicy(self.config['reporting']['zero_ulp_policy'])

    @property
    def score_margin(self) -> Optional[float]:
        return self.config['reporting']['score_margin']

    @property
    def emit_timing(self) -> bool:
        return self.config['reporting']['emit_timing']

    def oracle_id(self, precision: Optional[int] = None) -> BackendId:
        return BackendId(BackendKind.ORACLE, precision or self.config['oracle']['precision'])

    # ------------------------------------------------------------ programs and inputs

    def load_program(self, source: str) -> Tuple[str, Program, Optional[CorpusEntry]]:
        """A bundled corpus entry by name, or a program file"""
        entry = find_entry(source)
        if entry is not None:
            return entry.name, entry.load(), entry
        if not os.path.isfile(source):
            raise ResidueDebuggerError(f"no corpus entry or program file named '{source}'")
        with open(source, 'r', encoding='utf-8') as f:
            program = parse_program(f.read())
        name = os.path.splitext(os.path.basename(source))[0]
        return name, program, None

    def default_inputs(self, program: Program, entry: Optional[CorpusEntry],
                       count: Optional[int] = None) -> List[List[float]]:
        count = count or self.config['corpus']['inputs_per_entry']
        if entry is not None:
            return entry.inputs(count)
        spec = InputSpec(1, count, tuple(ParamRange(-20, 20) for _ in program.params))
        return generate_inputs(spec)

    # ------------------------------------------------------------ execution

    def oracle_run(self, program: Program, inputs: Sequence[float],
                   precision: Optional[int] = None) -> Tuple[Trace, WarningSet]:
        hook = create_hook(self.oracle_id(precision),
                           oracle_round_trick=self.config['oracle']['round_trick'])
        trace = execute(program, inputs, hook, self.engine_config.max_dyn_ops)
        return trace, compute_warnings(trace, self.engine_config.warn_ulps, self.zero_ulp_policy)

    def evaluate_input(self, program: Program, name: str, inputs: Sequence[float],
                       backend: BackendId, ro: bool,
                       truth: Optional[Tuple[Trace, WarningSet]] = None) -> InputResult:
        """Run one input under ``backend`` (with RO when asked) and score it"""
        truth_trace, truth_warnings = truth or self.oracle_run(program, inputs)
        store = None
        if self.config['orchestrator']['persist_state'] and backend.uses_engine and ro:
            store = StateStore(self.config['orchestrator']['state_dir'], name)
        orchestrator = ResidueOrchestrator(program, inputs, name, backend, self.engine_config,
                                           self.config['orchestrator']['max_reexec'], store,
                                           self.zero_ulp_policy)
        if backend.uses_engine and ro:
            drive = orchestrator.drive()
            outcome, executions, truncated = drive.outcome, drive.executions, drive.truncated
        elif backend.kind is BackendKind.ORACLE:
            trace, warnings = self.oracle_run(program, inputs, backend.precision)
            outcome, executions, truncated = None, 1, False
        else:
            outcome = orchestrator.execute_run(orchestrator.new_state())
            executions, truncated = 1, False
        if outcome is not None:
            trace, warnings = outcome.trace, outcome.warnings

        result = InputResult(list(inputs), trace.output, executions, truncated, warnings,
                             score(warnings, truth_warnings, self.score_margin),
                             trace.residues(), trace_agreement(trace, truth_trace),
                             trace.hook_seconds)
        if self.emit_timing:
            start = time.perf_counter()
            execute(program, inputs, PlainBackend(), self.engine_config.max_dyn_ops)
            result.plain_seconds = time.perf_counter() - start
        return result

    def run(self, program: Program, name: str, vectors: Sequence[Sequence[float]],
            backends: Sequence[BackendId], ro: bool = True) -> List[EntryReport]:
        """Every input under every backend; the oracle runs once per input"""
        reports = [EntryReport(name, str(b), ro and b.uses_engine) for b in backends]
        for inputs in vectors:
            truth = self.oracle_run(program, inputs)
            for backend, report in zip(backends, reports):
                report.results.append(self.evaluate_input(program, name, inputs, backend, ro, truth))
        self.logger.info(f"{name}: {len(vectors)} input(s) under {len(backends)} backend(s)")
        return reports

    def run_corpus(self, backends: Sequence[BackendId], ro: bool = True,
                   count: Optional[int] = None,
                   names: Optional[Sequence[str]] = None) -> ReportManager:
        entries = [e for e in bundled_corpus() if not names or e.name in names]
        manager = ReportManager(self.emit_timing)

        def task(entry: CorpusEntry) -> List[EntryReport]:
            program = entry.load()
            return self.run(program, entry.name, self.default_inputs(program, entry, count),
                            backends, ro)

        with ThreadPoolExecutor(max_workers=self.config['corpus']['workers']) as pool:
            for reports in pool.map(task, entries):
                for report in reports:
                    manager.add(report)
        return manager

    def oracle_check(self, program: Program, vectors: Sequence[Sequence[float]],
                     precision: Optional[int] = None) -> List[Tuple[List[float], List[int]]]:
        """Inputs whose warning set changes between p and 2p bits, with the differing OpIds"""
        p = precision or self.config['oracle']['precision']
        unstable = []
        for inputs in vectors:
            _, low = self.oracle_run(program, inputs, p)
            _, high = self.oracle_run(program, inputs, min(2 * p, 4096))
            diff = sorted(set(low.warnings) ^ set(high.warnings))
            if diff:
                unstable.append((list(inputs), diff))
        return unstable

    def inspect(self, program: Program) -> Dict[str, Any]:
        return {
            'entry': program.entry,
            'params': list(program.params),
            'functions': {name: {'params': list(fn.params),
                                 'static_ops': static_op_count(program, name),
                                 'line': fn.pos[0]}
                          for name, fn in program.functions.items()},
            'call_graph': call_graph(program),
        }


# ---------------------------------------------------------------- command line

def _add_engine_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--warn-ulps', type=int, help='warning threshold exponent (default 45)')
    parser.add_argument('--cond-threshold', type=float, help='isZero condition threshold')
    parser.add_argument('--absorb-ulps', type=float, help='isAbsorbed ulp slack')
    parser.add_argument('--max-reexec', type=int, help='cap on executions per input')
    parser.add_argument('--state-dir', help='directory for persisted run states')
    parser.add_argument('--margin', type=float, help='exclude ops within 2^m of the threshold')
    parser.add_argument('--report', help='write a JSON report here (plus a .txt twin)')
    parser.add_argument('--emit-timing', action='store_true', default=None,
                        help='time hooks against the uninstrumented baseline')
    parser.add_argument('--strict', action='store_true',
                        help='exit with status 1 on any false report')


def _add_input_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('program', nargs='?', help='corpus entry name or .fpk file')
    parser.add_argument('--inputs', nargs='+', metavar='NAME=VALUE',
                        help='a single input vector')
    parser.add_argument('--input-file', help='one input vector per line')
    parser.add_argument('--seed', type=int, help='generate inputs from this seed')
    parser.add_argument('--count', type=int, help='number of generated inputs')
    parser.add_argument('--exp-min', type=int, default=-20)
    parser.add_argument('--exp-max', type=int, default=20)
    parser.add_argument('--sign', choices=[s.value for s in SignPolicy], default='positive')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='residue-debugger',
                                     description='Residue-based floating-point debugger')
    parser.add_argument('--config', help='JSON configuration file')
    parser.add_argument('--debug', action='store_true', help='enable debug logging')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='run a program under one backend')
    _add_input_flags(run)
    run.add_argument('--backend', default='repo')
    run.add_argument('--ro', choices=('on', 'off'), default='on')
    _add_engine_flags(run)

    compare = sub.add_parser('compare', help='score two backends on the same inputs')
    _add_input_flags(compare)
    compare.add_argument('--corpus', dest='corpus_entry', help='bundled entry to compare on')
    compare.add_argument('--a', dest='backend_a', default='eftsan-fixed')
    compare.add_argument('--b', dest='backend_b', default='repo')
    compare.add_argument('--ro', choices=('on', 'off'), default='on')
    _add_engine_flags(compare)

    corpus = sub.add_parser('corpus', help='run every bundled entry')
    corpus.add_argument('--backends', nargs='+', default=list(DEFAULT_BACKENDS))
    corpus.add_argument('--entries', nargs='+', help='restrict to these entries')
    corpus.add_argument('--count', type=int, help='seeded inputs per entry')
    corpus.add_argument('--ro', choices=('on', 'off'), default='on')
    _add_engine_flags(corpus)

    check = sub.add_parser('oracle-check', help='compare oracle warnings at p and 2p bits')
    _add_input_flags(check)
    check.add_argument('--precision', type=int)

    inspect = sub.add_parser('inspect', help='list functions, op counts and call graph')
    inspect.add_argument('program')
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        'engine.warn_ulps': getattr(args, 'warn_ulps', None),
        'engine.cond_threshold': getattr(args, 'cond_threshold', None),
        'engine.absorb_ulps': getattr(args, 'absorb_ulps', None),
        'orchestrator.max_reexec': getattr(args, 'max_reexec', None),
        'orchestrator.state_dir': getattr(args, 'state_dir', None),
        'reporting.score_margin': getattr(args, 'margin', None),
        'reporting.emit_timing': getattr(args, 'emit_timing', None),
    }


def _vectors(debugger: ResidueDebugger, args: argparse.Namespace, program: Program,
             entry: Optional[CorpusEntry]) -> List[List[float]]:
    if args.inputs:
        return [parse_assignments(args.inputs, program.params)]
    if args.input_file:
        return parse_input_file(args.input_file, program.arity)
    if args.seed is not None:
        count = args.count or debugger.config['corpus']['inputs_per_entry']
        rng = ParamRange(args.exp_min, args.exp_max, SignPolicy(args.sign))
        return generate_inputs(InputSpec(args.seed, count, tuple(rng for _ in program.params)))
    return debugger.default_inputs(program, entry, args.count)


def _finish(manager: ReportManager, args: argparse.Namespace) -> int:
    print(manager.render_text(), end='')
    if getattr(args, 'report', None) and not manager.write(args.report):
        return EXIT_ERROR
    if args.strict and any(manager.totals().values()):
        return EXIT_FALSE_REPORTS
    return EXIT_CLEAN


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        debugger = ResidueDebugger(args.config, _overrides(args), args.debug)

        if args.command == 'inspect':
            _, program, _ = debugger.load_program(args.program)
            info = debugger.inspect(program)
            print(f"entry {info['entry']}({', '.join(info['params'])})")
            for name, fn in info['functions'].items():
                callees = ', '.join(info['call_graph'][name]) or '-'
                print(f"  {name}({', '.join(fn['params'])}) line {fn['line']}: "
                      f"{fn['static_ops']} static op(s), calls {callees}")
            return EXIT_CLEAN

        if args.command == 'corpus':
            backends = [BackendId.parse(b) for b in args.backends]
            manager = debugger.run_corpus(backends, args.ro == 'on', args.count, args.entries)
            return _finish(manager, args)

        source = args.program or getattr(args, 'corpus_entry', None)
        if not source:
            parser.error(f"{args.command}: a program or corpus entry is required")
        name, program, entry = debugger.load_program(source)
        vectors = _vectors(debugger, args, program, entry)

        if args.command == 'oracle-check':
            unstable = debugger.oracle_check(program, vectors, args.precision)
            for inputs, ops in unstable:
                print(f"unstable {' '.join(repr(x) for x in inputs)}: ops {ops}")
            print(f"{len(vectors) - len(unstable)}/{len(vectors)} input(s) stable")
            return EXIT_FALSE_REPORTS if unstable else EXIT_CLEAN

        if args.command == 'run':
            backends = [BackendId.parse(args.backend)]
        else:
            backends = [BackendId.parse(args.backend_a), BackendId.parse(args.backend_b)]
        manager = ReportManager(debugger.emit_timing)
        for report in debugger.run(program, name, vectors, backends, args.ro == 'on'):
            manager.add(report)
        return _finish(manager, args)

    except (ResidueDebuggerError, InputSpecError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
