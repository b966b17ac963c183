"""
Residue backends (RePo, EFTSan-Fixed, EFTSan-Buggy)
Shadow hook that estimates every residue with error-free transformations and
the residue engine, applying the re-execution controls of the current run:
silenced ops, probed ops and overridden residues.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from core import eft
from core.kernel_lang import OpEvent, ShadowHook, Trace
from core.ops import Operator
from core.residue_engine import (EXACT, AbsorptionRecord, EngineConfig, EngineMode, REPO_MODE,
                                 Residue, ResidueEngine, detect_absorption)


@dataclass(frozen=True)
class ResidueShadow:
    """Shadow of one value; ``alt`` is the residue a trick setup op has when its mu is dropped"""
    residue: Residue
    alt: Optional[Residue] = None


_EXACT_SHADOW = ResidueShadow(EXACT)


def rounding_error(operator: Operator, operands: Tuple[float, ...], result: float) -> float:
    """mu as consumed by the residue engine for one executed operator"""
    x = operands[0]
    if operator is Operator.ADD:
        return eft.two_sum(x, operands[1]).mu
    if operator is Operator.SUB:
        return eft.two_sum(x, -operands[1]).mu
    if operator is Operator.MUL:
        return eft.two_prod(x, operands[1]).mu
    if operator is Operator.DIV:
        return eft.product_remainder(x, operands[1], result)
    if operator is Operator.SQRT:
        return eft.radicand_remainder(x, result)
    if operator is Operator.CAST64TO32:
        return eft.cast_err_64to32(x)[1]
    return 0.0


class ResidueBackend(ShadowHook):
    """EFT residue hook for one engine mode and one run's RO controls"""

    def __init__(self, mode: EngineMode = REPO_MODE, config: Optional[EngineConfig] = None,
                 silent_ops: Iterable[int] = (), probe_ops: Iterable[int] = (),
                 res_override: Optional[Mapping[int, float]] = None):
        self.mode = mode
        self.name = mode.name
        self.config = config or EngineConfig()
        self.engine = ResidueEngine(self.config, mode)
        self.silent_ops = frozenset(silent_ops)
        self.probe_ops = frozenset(probe_ops)
        self.res_override: Dict[int, float] = dict(res_override or {})
        self.trick_enabled = mode.round_trick and self.config.round_trick_detection

        self.absorptions: List[AbsorptionRecord] = []
        self.temp_res_override: Dict[int, float] = {}
        self.trick_sites: List[Tuple[int, int]] = []
        self.trace: Optional[Trace] = None
        self.logger = logging.getLogger('ResidueDebugger.ResidueBackend')

    def begin(self, trace: Trace) -> None:
        self.trace = trace
        self.absorptions = []
        self.temp_res_override = {}
        self.trick_sites = []

    def lift(self, actual: float, literal: bool) -> ResidueShadow:
        return _EXACT_SHADOW

    def _residue(self, event: OpEvent, mu: float, e_x: Residue, e_y: Residue) -> Residue:
        op, cur = event.operator, event.op_id
        x = event.operands[0]
        z = event.result
        if op is Operator.ADD:
            return self.engine.residue_add(x, event.operands[1], mu, e_x, e_y, cur)
        if op is Operator.SUB:
            return self.engine.residue_sub(x, event.operands[1], mu, e_x, e_y, cur)
        if op is Operator.MUL:
            return self.engine.residue_mul(x, event.operands[1], mu, e_x, e_y, cur)
        if op is Operator.DIV:
            return self.engine.residue_div(x, event.operands[1], z, mu, e_x, e_y, cur)
        if op is Operator.SQRT:
            return self.engine.residue_sqrt(x, z, mu, e_x, cur)
        if op is Operator.FABS:
            return self.engine.residue_abs(x, e_x, cur)
        if op is Operator.NEG:
            return self.engine.residue_neg(e_x, cur)
        return self.engine.residue_cast(mu, e_x, cur)

    def on_op(self, event: OpEvent) -> Tuple[ResidueShadow, Residue]:
        cur = event.op_id
        shadows = [s if isinstance(s, ResidueShadow) else _EXACT_SHADOW for s in event.shadows]
        e_x = shadows[0].residue
        e_y = shadows[1].residue if len(shadows) > 1 else EXACT

        mu = rounding_error(event.operator, event.operands, event.result)
        if cur in self.silent_ops:
            mu = 0.0

        alt = None
        if self.trick_enabled:
            left = event.operand_provenance[0]
            if eft.detect_round_trick(event.provenance, left) and shadows[0].alt is not None:
                e_x, mu = shadows[0].alt, 0.0
                self._patch_setup(left.op_id, shadows[0].alt)
                self.trick_sites.append((left.op_id, cur))
            elif eft.is_trick_setup(event.provenance):
                alt = self._residue(event, 0.0, e_x, e_y)

        if not math.isfinite(event.result):
            residue = Residue.poison()
        elif cur in self.res_override:
            residue = self.engine.overridden(self.res_override[cur], cur)
        else:
            residue = self._residue(event, mu, e_x, e_y)

        if cur in self.probe_ops:
            self.temp_res_override[cur] = residue.value

        record = detect_absorption(cur, residue, e_x, e_y)
        if record is not None:
            self.absorptions.append(record)
        return ResidueShadow(residue, alt), residue

    def _patch_setup(self, op_id: int, residue: Residue) -> None:
        if self.trace is not None and op_id < len(self.trace.records):
            self.trace.records[op_id].residue = residue
            self.logger.debug(f"rounding trick: setup op {op_id} residue replaced")
