"""
Bundled corpus of kernel programs
Desk-scale numerical kernels with the input ranges they are evaluated on.
"""

import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from core.input_generator import InputSpec, ParamRange, SignPolicy, generate_inputs
from core.kernel_lang import Program, parse_program

CORPUS_DIR = os.path.dirname(os.path.abspath(__file__))
DEFAULT_INPUTS_PER_ENTRY = 100


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    program_file: str
    input_spec: InputSpec
    notes: str = ""
    pinned_inputs: Tuple[Tuple[float, ...], ...] = field(default_factory=tuple)
    entry: Optional[str] = None

    @property
    def path(self) -> str:
        return os.path.join(CORPUS_DIR, self.program_file)

    def load(self) -> Program:
        with open(self.path, 'r', encoding='utf-8') as f:
            return parse_program(f.read(), self.entry)

    def inputs(self, count: Optional[int] = None) -> List[List[float]]:
        """Pinned inputs first, then the seeded ones"""
        spec = self.input_spec if count is None else replace(self.input_spec, count=count)
        return [list(v) for v in self.pinned_inputs] + generate_inputs(spec)

    def to_dict(self) -> Dict:
        return {
            'name': self.name,
            'program_file': self.program_file,
            'input_spec': self.input_spec.to_dict(),
            'pinned_inputs': [list(v) for v in self.pinned_inputs],
            'notes': self.notes,
        }


def _spec(seed: int, e_min: int, e_max: int, sign: SignPolicy = SignPolicy.POSITIVE) -> InputSpec:
    return InputSpec(seed, DEFAULT_INPUTS_PER_ENTRY, (ParamRange(e_min, e_max, sign),))


def bundled_corpus() -> List[CorpusEntry]:
    return [
        CorpusEntry('diff-roots', 'diff-roots.fpk', _spec(1, 64, 200),
                    "sqrt(x+1) - sqrt(x) squared; the difference is lost to absorption "
                    "for large x", pinned_inputs=((1e99,),)),
        CorpusEntry('cancel-mul', 'cancel-mul.fpk', _spec(2, 64, 200),
                    "product of two cancelled differences; needs the e_x*e_y term of mul"),
        CorpusEntry('poly-expand', 'poly-expand.fpk', _spec(3, -80, -56, SignPolicy.MIXED),
                    "(x-1)^6 as products of u = x - 1 where x rounds to 1; only the "
                    "e_x*e_y term of mul sees the powers of t",
                    pinned_inputs=((2.0 ** -60,),)),
        CorpusEntry('sin-reduce', 'sin-reduce.fpk', _spec(4, 1, 20),
                    "argument reduction with the 1.5*2^52 rounding trick plus a short "
                    "polynomial"),
        CorpusEntry('harmonic-acc', 'harmonic-acc.fpk', _spec(5, -4, 4),
                    "loop accumulation of x/i"),
        CorpusEntry('cast-chain', 'cast-chain.fpk', _spec(6, -10, 10),
                    "binary64 -> binary32 -> binary64 round trips",
                    pinned_inputs=((1.0 + 2.0 ** -24,),)),
    ]


def find_entry(name: str, entries: Optional[Sequence[CorpusEntry]] = None) -> Optional[CorpusEntry]:
    for entry in entries or bundled_corpus():
        if entry.name == name:
            return entry
    return None
