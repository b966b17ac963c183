"""Shared fixtures for the residue debugger test suite"""

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.kernel_lang import Program, parse_program  # noqa: E402
from corpus import find_entry  # noqa: E402

# x large enough that sqrt(x + 1) and sqrt(x) round to the same double
BIG_X = 1e99


def load_entry(name: str) -> Program:
    return find_entry(name).load()


@pytest.fixture
def diff_roots() -> Program:
    return load_entry('diff-roots')


@pytest.fixture
def sin_reduce() -> Program:
    return load_entry('sin-reduce')


@pytest.fixture
def kernel():
    """Parse a one-off kernel program from source text"""
    return parse_program


@pytest.fixture
def debugger(tmp_path):
    from residue_debugger import ResidueDebugger
    return ResidueDebugger(overrides={'orchestrator.state_dir': str(tmp_path / 'state'),
                                      'orchestrator.persist_state': False})
