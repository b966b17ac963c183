"""
State Store for the residue debugger
Versioned line-oriented persistence of RunState between re-executions.

File layout (UTF-8, one record per line):
    RESIDUE-STATE v1
    key <inputKey>
    runs <runCount>
    silent <opId>
    probe <opId>
    temp <opId> <16 hex digits>
    override <opId> <16 hex digits>
    maxerr <opId>
    snderr <opId>
Records appear in the order above, each section sorted by ascending OpId.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

from .errors import StateFormatError
from .input_generator import float_to_hex, hex_to_float

STATE_MAGIC = "RESIDUE-STATE"
STATE_VERSION = "v1"
STATE_SUFFIX = "." + STATE_VERSION

logger = logging.getLogger('ResidueDebugger.StateStore')


@dataclass
class RunState:
    """Re-execution controls of one (program, input vector) pair"""
    input_key: str = ""
    silent_ops: Set[int] = field(default_factory=set)
    probe_ops: Set[int] = field(default_factory=set)
    temp_res_override: Dict[int, float] = field(default_factory=dict)
    res_override: Dict[int, float] = field(default_factory=dict)
    max_err_ops: Set[int] = field(default_factory=set)
    snd_err_ops: Set[int] = field(default_factory=set)
    run_count: int = 0

    def clear_phase(self) -> None:
        """Forget the per-phase sets; resOverride survives"""
        self.silent_ops.clear()
        self.probe_ops.clear()
        self.temp_res_override.clear()
        self.max_err_ops.clear()
        self.snd_err_ops.clear()


def _check_op_id(text: str, lineno: int) -> int:
    if not text.isdigit():
        raise StateFormatError(f"line {lineno}: invalid OpId '{text}'")
    return int(text)


def save_state(state: RunState) -> bytes:
    lines = [f"{STATE_MAGIC} {STATE_VERSION}", f"key {state.input_key}", f"runs {state.run_count}"]
    lines += [f"silent {op}" for op in sorted(state.silent_ops)]
    lines += [f"probe {op}" for op in sorted(state.probe_ops)]
    lines += [f"temp {op} {float_to_hex(v)}" for op, v in sorted(state.temp_res_override.items())]
    lines += [f"override {op} {float_to_hex(v)}" for op, v in sorted(state.res_override.items())]
    lines += [f"maxerr {op}" for op in sorted(state.max_err_ops)]
    lines += [f"snderr {op}" for op in sorted(state.snd_err_ops)]
    return ("\n".join(lines) + "\n").encode('utf-8')


def load_state(data: bytes) -> RunState:
    try:
        text = data.decode('utf-8')
    except UnicodeDecodeError as e:
        raise StateFormatError(f"state is not UTF-8: {e}") from e
    lines = text.splitlines()
    if not lines or not lines[0].startswith(STATE_MAGIC):
        raise StateFormatError("missing state header")
    version = lines[0][len(STATE_MAGIC):].strip()
    if version != STATE_VERSION:
        raise StateFormatError(f"unsupported state version '{version}'")

    state = RunState()
    sets = {'silent': state.silent_ops, 'probe': state.probe_ops,
            'maxerr': state.max_err_ops, 'snderr': state.snd_err_ops}
    maps = {'temp': state.temp_res_override, 'override': state.res_override}
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split()
        if not parts:
            continue
        tag, args = parts[0], parts[1:]
        if tag == 'key' and len(args) <= 1:
            state.input_key = args[0] if args else ""
        elif tag == 'runs' and len(args) == 1:
            state.run_count = _check_op_id(args[0], lineno)
        elif tag in sets and len(args) == 1:
            sets[tag].add(_check_op_id(args[0], lineno))
        elif tag in maps and len(args) == 2:
            try:
                maps[tag][_check_op_id(args[0], lineno)] = hex_to_float(args[1])
            except StateFormatError:
                raise
            except Exception as e:
                raise StateFormatError(f"line {lineno}: {e}") from e
        else:
            raise StateFormatError(f"line {lineno}: unrecognised record '{line}'")
    return state


def state_path(state_dir: str, program_name: str, input_key: str) -> str:
    return os.path.join(state_dir, program_name, input_key + STATE_SUFFIX)


class StateStore:
    """On-disk RunState files under ``<state-dir>/<program>/<inputKey>.v1``"""

    def __init__(self, state_dir: str, program_name: str):
        self.state_dir = state_dir
        self.program_name = program_name
        self.logger = logging.getLogger('ResidueDebugger.StateStore')

    def path(self, input_key: str) -> str:
        return state_path(self.state_dir, self.program_name, input_key)

    def write(self, state: RunState) -> bool:
        try:
            path = self.path(state.input_key)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, 'wb') as f:
                f.write(save_state(state))
            return True
        except OSError as e:
            self.logger.error(f"Error writing state for {state.input_key}: {e}")
            return False

    def read(self, input_key: str) -> Optional[RunState]:
        path = self.path(input_key)
        if not os.path.exists(path):
            return None
        try:
            with open(path, 'rb') as f:
                return load_state(f.read())
        except (OSError, StateFormatError) as e:
            self.logger.error(f"Error reading state {path}: {e}")
            return None

    def list_keys(self) -> List[str]:
        directory = os.path.join(self.state_dir, self.program_name)
        if not os.path.isdir(directory):
            return []
        return sorted(name[:-len(STATE_SUFFIX)] for name in os.listdir(directory)
                      if name.endswith(STATE_SUFFIX))
