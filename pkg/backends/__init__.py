"""
Residue Debugger Backends
Interchangeable shadow hooks behind one interface, selected by identifier:
repo, eftsan-fixed, eftsan-buggy, oracle[:bits], dd and plain.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional

from core.errors import BackendError
from core.kernel_lang import ShadowHook
from core.residue_engine import (EFTSAN_BUGGY_MODE, EFTSAN_FIXED_MODE, REPO_MODE, EngineConfig,
                                 EngineMode)

from .bigfloat_oracle import DEFAULT_PRECISION, MAX_PRECISION, MIN_PRECISION, OracleBackend
from .double_double import DDBackend, DoubleDouble
from .residue_backend import ResidueBackend, ResidueShadow


class BackendKind(Enum):
    REPO = "repo"
    EFTSAN_FIXED = "eftsan-fixed"
    EFTSAN_BUGGY = "eftsan-buggy"
    ORACLE = "oracle"
    DOUBLE_DOUBLE = "dd"
    PLAIN = "plain"


ENGINE_MODES = {
    BackendKind.REPO: REPO_MODE,
    BackendKind.EFTSAN_FIXED: EFTSAN_FIXED_MODE,
    BackendKind.EFTSAN_BUGGY: EFTSAN_BUGGY_MODE,
}


@dataclass(frozen=True)
class BackendId:
    kind: BackendKind
    precision: Optional[int] = None

    def __post_init__(self):
        if self.kind is BackendKind.ORACLE:
            precision = DEFAULT_PRECISION if self.precision is None else self.precision
            if not MIN_PRECISION <= precision <= MAX_PRECISION:
                raise BackendError(f"oracle precision must lie in [{MIN_PRECISION}, "
                                   f"{MAX_PRECISION}], got {precision}")
            object.__setattr__(self, 'precision', precision)
        elif self.precision is not None:
            raise BackendError(f"backend '{self.kind.value}' takes no precision")

    @property
    def engine_mode(self) -> Optional[EngineMode]:
        return ENGINE_MODES.get(self.kind)

    @property
    def uses_engine(self) -> bool:
        return self.kind in ENGINE_MODES

    def __str__(self) -> str:
        if self.kind is BackendKind.ORACLE:
            return f"oracle:{self.precision}"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> 'BackendId':
        """'repo', 'eftsan-fixed', 'eftsan-buggy', 'oracle', 'oracle:1024', 'dd' or 'plain'"""
        name, _, bits = text.strip().lower().partition(':')
        aliases = {'double-double': 'dd', 'eftsan': 'eftsan-fixed'}
        name = aliases.get(name, name)
        try:
            kind = BackendKind(name)
        except ValueError:
            raise BackendError(f"unknown backend '{text}'") from None
        if bits and kind is not BackendKind.ORACLE:
            raise BackendError(f"backend '{name}' takes no precision")
        try:
            precision = int(bits) if bits else None
        except ValueError:
            raise BackendError(f"invalid oracle precision '{bits}'") from None
        return cls(kind, precision)


ORACLE = BackendId(BackendKind.ORACLE)
REPO = BackendId(BackendKind.REPO)


class PlainBackend(ShadowHook):
    """Uninstrumented baseline: exact zero residues, no EFT work"""
    name = 'plain'


def create_hook(backend: BackendId, config: Optional[EngineConfig] = None,
                silent_ops: Iterable[int] = (), probe_ops: Iterable[int] = (),
                res_override: Optional[Mapping[int, float]] = None,
                oracle_round_trick: bool = True) -> ShadowHook:
    """A fresh hook for one execution"""
    if backend.uses_engine:
        return ResidueBackend(backend.engine_mode, config, silent_ops, probe_ops, res_override)
    if backend.kind is BackendKind.ORACLE:
        return OracleBackend(backend.precision, oracle_round_trick)
    if backend.kind is BackendKind.DOUBLE_DOUBLE:
        return DDBackend()
    return PlainBackend()


__all__ = [
    'BackendId',
    'BackendKind',
    'DDBackend',
    'DoubleDouble',
    'ORACLE',
    'OracleBackend',
    'PlainBackend',
    'REPO',
    'ResidueBackend',
    'ResidueShadow',
    'create_hook',
]
