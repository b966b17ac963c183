"""
Exception hierarchy for the residue debugger
"""

from typing import Optional


class ResidueDebuggerError(Exception):
    """Base class for every error raised by the debugger"""


class KernelSyntaxError(ResidueDebuggerError):
    """Malformed kernel source, reported with a 1-based position"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.message = message
        self.line = line
        self.column = column
        if line is not None:
            super().__init__(f"{line}:{column}: {message}")
        else:
            super().__init__(message)


class UnboundVariableError(KernelSyntaxError):
    """Reference to a name that no parameter or let binds"""


class UnknownOperatorError(KernelSyntaxError):
    """Call of something that is neither an operator nor a defined function"""


class ArityError(KernelSyntaxError):
    """Operator or function applied to the wrong number of arguments"""


class RecursionCycleError(KernelSyntaxError):
    """The call graph contains a cycle"""


class KernelRuntimeError(ResidueDebuggerError):
    """Execution-time failure of a validated program"""


class OpLimitExceeded(KernelRuntimeError):
    """Dynamic op budget exhausted (nontermination guard)"""


class InputSpecError(ResidueDebuggerError):
    """Invalid input specification or malformed input file"""


class NondeterminismError(ResidueDebuggerError):
    """A re-execution diverged from the reference trace"""


class StateFormatError(ResidueDebuggerError):
    """Persisted RunState is corrupt or has an unsupported version"""


class BackendError(ResidueDebuggerError):
    """Unknown backend identifier or invalid backend parameters"""


class TraceMismatchError(ResidueDebuggerError):
    """Two traces that must share an OpId space do not"""
