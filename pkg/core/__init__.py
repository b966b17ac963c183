"""
Residue Debugger Core Components
Kernel language, EFTs, residue engine, RO orchestration, state and scoring

Submodules are imported directly (``from core.orchestrator import ...``);
the orchestrator depends on ``backends`` which in turn depends on core.
"""

from .config_manager import ConfigManager
from .errors import ResidueDebuggerError

__all__ = [
    'ConfigManager',
    'ResidueDebuggerError',
]
