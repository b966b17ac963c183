"""
Residue Override Orchestrator
Drives the detect, silence, probe and override loop across re-executions
of one (program, input vector) pair.

A driver iteration is: a detection run with the permanent overrides
applied; admissible absorptions name contributors to silence and detecting
ops to probe; RESOLVE re-executes, starting each run with empty contributor
sets, until no new contributor appears; the probed residues become
permanent overrides; the per-phase sets are cleared.
Every execution counts against one global cap.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from backends import REPO, BackendId, ResidueBackend, create_hook

from .errors import NondeterminismError
from .input_generator import input_key
from .kernel_lang import Program, Trace, execute
from .residue_engine import NONE_OP, AbsorptionRecord, EngineConfig
from .state_store import RunState, StateStore
from .warning_scorer import DEFAULT_WARN_ULPS, WarningSet, ZeroUlpPolicy, compute_warnings

DEFAULT_MAX_REEXEC = 20


@dataclass
class RunOutcome:
    trace: Trace
    absorptions: List[AbsorptionRecord]
    temp_res_override: Dict[int, float]
    warnings: WarningSet
    trick_sites: List[Tuple[int, int]] = field(default_factory=list)


@dataclass
class DriveResult:
    """Final run of the RO loop and how it got there"""
    outcome: RunOutcome
    executions: int
    iterations: int
    truncated: bool
    state: RunState

    @property
    def trace(self) -> Trace:
        return self.outcome.trace

    @property
    def warnings(self) -> WarningSet:
        return self.outcome.warnings


def _contributors(record: AbsorptionRecord) -> Tuple[set, set]:
    maxes = {op for op in (record.x_max, record.y_max) if op != NONE_OP}
    snds = {op for op in (record.x_snd, record.y_snd) if op != NONE_OP}
    return maxes, snds


def admit(record: AbsorptionRecord, state: RunState) -> bool:
    """Apply the set-intersection guard and, when it passes, record the absorption.

    Returns True if silentOps grew.
    """
    maxes, snds = _contributors(record)
    if not maxes:
        return False
    if maxes & state.snd_err_ops or snds & state.max_err_ops:
        return False
    # an op is never both silenced and probed
    if maxes & state.probe_ops or record.op_id in state.silent_ops:
        return False
    new = maxes - state.silent_ops
    state.silent_ops |= maxes
    state.max_err_ops |= maxes
    state.snd_err_ops |= snds
    state.probe_ops.add(record.op_id)
    return bool(new)


class ResidueOrchestrator:
    """RO driver for one program and one input vector"""

    def __init__(self, program: Program, inputs: Sequence[float], program_name: str = 'program',
                 backend: BackendId = REPO, config: Optional[EngineConfig] = None,
                 cap: int = DEFAULT_MAX_REEXEC, store: Optional[StateStore] = None,
                 zero_ulp_policy: ZeroUlpPolicy = ZeroUlpPolicy.INFINITE):
        if cap < 1:
            raise ValueError(f"re-execution cap must be at least 1, got {cap}")
        self.program = program
        self.inputs = list(inputs)
        self.program_name = program_name
        self.backend = backend
        self.config = config or EngineConfig()
        self.cap = cap
        self.store = store
        self.zero_ulp_policy = zero_ulp_policy
        self.executions = 0
        self.reference: Optional[Tuple] = None
        self.logger = logging.getLogger('ResidueDebugger.Orchestrator')

    @property
    def warn_ulps(self) -> int:
        return self.config.warn_ulps if self.config else DEFAULT_WARN_ULPS

    def new_state(self) -> RunState:
        return RunState(input_key=input_key(self.program_name, self.inputs))

    def execute_run(self, state: RunState) -> RunOutcome:
        """One execution under the state's silence, probe and override sets"""
        if self.store is not None:
            self.store.write(state)
        hook = create_hook(self.backend, self.config, state.silent_ops, state.probe_ops,
                           state.res_override)
        trace = execute(self.program, self.inputs, hook, self.config.max_dyn_ops)
        self.executions += 1
        state.run_count += 1

        signature = (trace.signature(), trace.output.hex())
        if self.reference is None:
            self.reference = signature
        elif signature != self.reference:
            raise NondeterminismError(f"run {state.run_count} of {state.input_key} diverged "
                                      f"from the first run ({len(trace)} ops)")

        absorptions: List[AbsorptionRecord] = []
        temp: Dict[int, float] = {}
        tricks: List[Tuple[int, int]] = []
        if isinstance(hook, ResidueBackend):
            absorptions = sorted(hook.absorptions, key=lambda r: r.op_id)
            temp = dict(hook.temp_res_override)
            tricks = list(hook.trick_sites)
        state.temp_res_override = dict(temp)
        warnings = compute_warnings(trace, self.warn_ulps, self.zero_ulp_policy)
        return RunOutcome(trace, absorptions, temp, warnings, tricks)

    def resolve(self, state: RunState, budget: int) -> Tuple[Dict[int, float], bool]:
        """Silenced re-executions until no new contributor shows up.

        Returns the probed residues and whether the budget cut the phase short.
        """
        temp: Dict[int, float] = {}
        runs = 0
        while True:
            if runs >= budget:
                self.logger.info(f"RESOLVE for {state.input_key} truncated after {runs} run(s)")
                return temp, True
            # the guard only compares against contributors admitted in this run
            state.max_err_ops.clear()
            state.snd_err_ops.clear()
            outcome = self.execute_run(state)
            runs += 1
            temp = outcome.temp_res_override
            still_cancel = False
            for record in outcome.absorptions:
                if record.op_id in state.probe_ops and admit(record, state):
                    still_cancel = True
            if not still_cancel:
                return temp, False

    def drive(self) -> DriveResult:
        state = self.new_state()
        iterations = 0
        truncated = False
        while True:
            outcome = self.execute_run(state)
            admitted = False
            for record in outcome.absorptions:
                admitted = admit(record, state) or admitted
            if not admitted:
                state.clear_phase()
                break
            budget = self.cap - self.executions - 1
            if budget < 1:
                truncated = True
                state.clear_phase()
                break
            iterations += 1
            temp, cut = self.resolve(state, budget)
            truncated = truncated or cut
            state.res_override.update(temp)
            state.clear_phase()
            self.logger.debug(f"{state.input_key}: iteration {iterations}, "
                              f"{len(state.res_override)} override(s)")

        if self.store is not None:
            self.store.write(state)
        return DriveResult(outcome, self.executions, iterations, truncated, state)


def execute_run(program: Program, inputs: Sequence[float], state: RunState,
                backend: BackendId = REPO, config: Optional[EngineConfig] = None) -> RunOutcome:
    return ResidueOrchestrator(program, inputs, backend=backend, config=config).execute_run(state)


def resolve(program: Program, inputs: Sequence[float], state: RunState,
            config: Optional[EngineConfig] = None,
            budget: int = DEFAULT_MAX_REEXEC - 1) -> Tuple[Dict[int, float], bool]:
    return ResidueOrchestrator(program, inputs, config=config).resolve(state, budget)


def repo_drive(program: Program, inputs: Sequence[float], cap: int = DEFAULT_MAX_REEXEC,
               config: Optional[EngineConfig] = None, program_name: str = 'program',
               store: Optional[StateStore] = None, backend: BackendId = REPO) -> DriveResult:
    orchestrator = ResidueOrchestrator(program, inputs, program_name, backend, config, cap, store)
    return orchestrator.drive()
