"""
Kernel Language for the residue debugger
Parser, static checker and deterministic interpreter for the s-expression
kernel language. Every executed floating-point operator gets the next OpId
and exactly one shadow-hook call.

Grammar (FPCore-like subset):
    program  := (define (name param...) expr)+
    expr     := number | TRUE | FALSE | name
              | (op expr...)                 ; + - * / sqrt fabs neg cast64to32 cast32to64
              | (< | <= | > | >= | == | != expr expr)
              | (and expr...) | (or expr...) | (not expr)
              | (let ((name expr)...) expr)  ; parallel binding
              | (let* ((name expr)...) expr) ; sequential binding
              | (if expr expr expr)
              | (while expr ((name init update)...) expr)
              | (name expr...)               ; call of a defined function, inlined
"""

import logging
import math
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .eft import narrow_to_binary32
from .errors import (ArityError, KernelRuntimeError, KernelSyntaxError, OpLimitExceeded,
                     RecursionCycleError, UnboundVariableError, UnknownOperatorError)
from .ops import OPERATOR_SYMBOLS, Operator, OpProvenance
from .residue_engine import EXACT, Residue

logger = logging.getLogger('ResidueDebugger.Kernel')

Position = Tuple[int, int]

DEFAULT_MAX_DYN_OPS = 10_000_000

_TOKEN_RE = re.compile(r"\s+|;[^\n]*|[()\[\]]|[^\s()\[\];]+")
_NUMBER_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_HEX_NUMBER_RE = re.compile(r"[+-]?0[xX][0-9a-fA-F]*\.?[0-9a-fA-F]*[pP][+-]?\d+$")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-*!?]*$")

COMPARISONS = {
    '<': lambda a, b: a < b,
    '<=': lambda a, b: a <= b,
    '>': lambda a, b: a > b,
    '>=': lambda a, b: a >= b,
    '==': lambda a, b: a == b,
    '!=': lambda a, b: a != b,
}
LOGIC_WORDS = ('and', 'or', 'not')
KEYWORDS = frozenset({'define', 'let', 'let*', 'if', 'while', 'TRUE', 'FALSE'}) | frozenset(LOGIC_WORDS)


class ValueType(Enum):
    F64 = "binary64"
    F32 = "binary32"
    BOOL = "bool"


# ---------------------------------------------------------------- syntax tree

@dataclass(frozen=True)
class Num:
    value: float
    pos: Position


@dataclass(frozen=True)
class BoolLit:
    value: bool
    pos: Position


@dataclass(frozen=True)
class Var:
    name: str
    pos: Position


@dataclass(frozen=True)
class OpNode:
    operator: Operator
    args: Tuple['Expr', ...]
    pos: Position


@dataclass(frozen=True)
class Compare:
    symbol: str
    left: 'Expr'
    right: 'Expr'
    pos: Position


@dataclass(frozen=True)
class Logic:
    word: str
    args: Tuple['Expr', ...]
    pos: Position


@dataclass(frozen=True)
class Let:
    bindings: Tuple[Tuple[str, 'Expr'], ...]
    body: 'Expr'
    sequential: bool
    pos: Position


@dataclass(frozen=True)
class If:
    cond: 'Expr'
    then: 'Expr'
    orelse: 'Expr'
    pos: Position


@dataclass(frozen=True)
class While:
    cond: 'Expr'
    loop_vars: Tuple[Tuple[str, 'Expr', 'Expr'], ...]
    body: 'Expr'
    pos: Position


@dataclass(frozen=True)
class Call:
    function: str
    args: Tuple['Expr', ...]
    pos: Position


Expr = Union[Num, BoolLit, Var, OpNode, Compare, Logic, Let, If, While, Call]


@dataclass(frozen=True)
class Function:
    name: str
    params: Tuple[str, ...]
    body: Expr
    pos: Position


@dataclass
class Program:
    """A validated kernel program"""
    functions: Dict[str, Function]
    entry: str
    source: str = ""

    @property
    def params(self) -> Tuple[str, ...]:
        return self.functions[self.entry].params

    @property
    def arity(self) -> int:
        return len(self.params)


# ---------------------------------------------------------------- reader

@dataclass
class _Atom:
    text: str
    pos: Position


@dataclass
class _List:
    items: List[Union['_List', _Atom]]
    pos: Position


def _tokenize(text: str) -> List[Tuple[str, Position]]:
    tokens = []
    line, col = 1, 1
    for match in _TOKEN_RE.finditer(text):
        tok = match.group(0)
        if not tok.isspace() and not tok.startswith(';'):
            tokens.append((tok, (line, col)))
        newlines = tok.count('\n')
        if newlines:
            line += newlines
            col = len(tok) - tok.rfind('\n')
        else:
            col += len(tok)
    return tokens


def _read(tokens: List[Tuple[str, Position]]) -> List[_List]:
    closing = {'(': ')', '[': ']'}
    stack: List[Tuple[_List, str]] = []
    top: List[Union[_List, _Atom]] = []
    for tok, pos in tokens:
        if tok in closing:
            stack.append((_List([], pos), closing[tok]))
        elif tok in (')', ']'):
            if not stack:
                raise KernelSyntaxError(f"unexpected '{tok}'", *pos)
            node, expected = stack.pop()
            if tok != expected:
                raise KernelSyntaxError(f"expected '{expected}' but found '{tok}'", *pos)
            (stack[-1][0].items if stack else top).append(node)
        else:
            (stack[-1][0].items if stack else top).append(_Atom(tok, pos))
    if stack:
        raise KernelSyntaxError("unclosed parenthesis", *stack[-1][0].pos)
    for item in top:
        if isinstance(item, _Atom):
            raise KernelSyntaxError(f"unexpected top-level atom '{item.text}'", *item.pos)
    return top  # type: ignore[return-value]


def parse_number(text: str) -> Optional[float]:
    """Decimal or C99 hex-float literal, None for anything else"""
    if _NUMBER_RE.match(text):
        return float(text)
    if _HEX_NUMBER_RE.match(text):
        return float.fromhex(text)
    return None


# ---------------------------------------------------------------- checker

class _Checker:
    """Builds the typed syntax tree and enforces the static rules"""

    def __init__(self, signatures: Dict[str, int]):
        self.signatures = signatures
        self.calls: Dict[str, set] = {name: set() for name in signatures}
        self.current = ''

    def function(self, form: _List) -> Function:
        items = form.items
        if len(items) != 3 or not isinstance(items[1], _List) or not items[1].items:
            raise KernelSyntaxError("expected (define (name param...) body)", *form.pos)
        header = items[1].items
        name = self._name(header[0])
        params = tuple(self._name(p) for p in header[1:])
        if len(set(params)) != len(params):
            raise KernelSyntaxError(f"duplicate parameter in '{name}'", *items[1].pos)
        self.current = name
        scope = {p: ValueType.F64 for p in params}
        body, kind = self.expr(items[2], scope)
        if kind is not ValueType.F64:
            raise KernelSyntaxError(f"function '{name}' must return a binary64 value", *form.pos)
        return Function(name, params, body, form.pos)

    @staticmethod
    def _name(node) -> str:
        if not isinstance(node, _Atom) or not _NAME_RE.match(node.text) or node.text in KEYWORDS:
            pos = node.pos
            raise KernelSyntaxError(f"invalid name '{getattr(node, 'text', '(...)')}'", *pos)
        return node.text

    @staticmethod
    def _expect(kind: ValueType, wanted: ValueType, what: str, pos: Position):
        if kind is not wanted:
            raise KernelSyntaxError(f"{what} expects {wanted.value}, got {kind.value}", *pos)

    def expr(self, node, scope: Dict[str, ValueType]) -> Tuple[Expr, ValueType]:
        if isinstance(node, _Atom):
            return self._atom(node, scope)
        if not node.items:
            raise KernelSyntaxError("empty expression", *node.pos)
        head = node.items[0]
        if not isinstance(head, _Atom):
            raise KernelSyntaxError("expression head must be a name", *node.pos)
        word, args = head.text, node.items[1:]

        if word in ('let', 'let*'):
            return self._let(node, args, scope, word == 'let*')
        if word == 'if':
            return self._if(node, args, scope)
        if word == 'while':
            return self._while(node, args, scope)
        if word in COMPARISONS:
            if len(args) != 2:
                raise ArityError(f"'{word}' takes 2 arguments, got {len(args)}", *node.pos)
            left, lk = self.expr(args[0], scope)
            right, rk = self.expr(args[1], scope)
            self._expect(lk, ValueType.F64, word, node.pos)
            self._expect(rk, ValueType.F64, word, node.pos)
            return Compare(word, left, right, node.pos), ValueType.BOOL
        if word in LOGIC_WORDS:
            if (word == 'not' and len(args) != 1) or (word != 'not' and not args):
                raise ArityError(f"wrong number of arguments to '{word}'", *node.pos)
            parts = []
            for a in args:
                sub, kind = self.expr(a, scope)
                self._expect(kind, ValueType.BOOL, word, node.pos)
                parts.append(sub)
            return Logic(word, tuple(parts), node.pos), ValueType.BOOL
        if word in OPERATOR_SYMBOLS:
            return self._operator(node, word, args, scope)
        if word in self.signatures:
            if len(args) != self.signatures[word]:
                raise ArityError(f"'{word}' takes {self.signatures[word]} arguments, got {len(args)}",
                                 *node.pos)
            parts = []
            for a in args:
                sub, kind = self.expr(a, scope)
                self._expect(kind, ValueType.F64, f"argument of '{word}'", node.pos)
                parts.append(sub)
            self.calls[self.current].add(word)
            return Call(word, tuple(parts), node.pos), ValueType.F64
        raise UnknownOperatorError(f"unknown operator or function '{word}'", *head.pos)

    def _atom(self, node: _Atom, scope) -> Tuple[Expr, ValueType]:
        if node.text in ('TRUE', 'FALSE'):
            return BoolLit(node.text == 'TRUE', node.pos), ValueType.BOOL
        number = parse_number(node.text)
        if number is not None:
            return Num(number, node.pos), ValueType.F64
        if node.text in scope:
            return Var(node.text, node.pos), scope[node.text]
        if _NAME_RE.match(node.text):
            raise UnboundVariableError(f"unbound variable '{node.text}'", *node.pos)
        raise KernelSyntaxError(f"malformed token '{node.text}'", *node.pos)

    def _operator(self, node: _List, word: str, args, scope) -> Tuple[Expr, ValueType]:
        operator = OPERATOR_SYMBOLS[word]
        if word == '-' and len(args) == 1:
            operator = Operator.NEG
        if len(args) != operator.arity:
            raise ArityError(f"'{word}' takes {operator.arity} arguments, got {len(args)}", *node.pos)
        wanted = ValueType.F32 if operator is Operator.CAST32TO64 else ValueType.F64
        parts = []
        for a in args:
            sub, kind = self.expr(a, scope)
            self._expect(kind, wanted, f"'{word}'", node.pos)
            parts.append(sub)
        result = ValueType.F32 if operator is Operator.CAST64TO32 else ValueType.F64
        return OpNode(operator, tuple(parts), node.pos), result

    def _bindings(self, node, form_name: str) -> List[_List]:
        if not isinstance(node, _List):
            raise KernelSyntaxError(f"malformed {form_name} bindings", *node.pos)
        return node.items  # type: ignore[return-value]

    def _let(self, node: _List, args, scope, sequential: bool):
        if len(args) != 2:
            raise KernelSyntaxError("expected (let ((name expr)...) body)", *node.pos)
        inner = dict(scope)
        bindings = []
        for binding in self._bindings(args[0], 'let'):
            if not isinstance(binding, _List) or len(binding.items) != 2:
                raise KernelSyntaxError("malformed let binding", *binding.pos)
            name = self._name(binding.items[0])
            value, kind = self.expr(binding.items[1], inner if sequential else scope)
            if kind is ValueType.BOOL:
                raise KernelSyntaxError(f"cannot bind boolean to '{name}'", *binding.pos)
            inner[name] = kind
            bindings.append((name, value))
        body, kind = self.expr(args[1], inner)
        return Let(tuple(bindings), body, sequential, node.pos), kind

    def _if(self, node: _List, args, scope):
        if len(args) != 3:
            raise ArityError("'if' takes a condition and two branches", *node.pos)
        cond, ck = self.expr(args[0], scope)
        self._expect(ck, ValueType.BOOL, 'if', node.pos)
        then, tk = self.expr(args[1], scope)
        orelse, ek = self.expr(args[2], scope)
        if tk is not ek:
            raise KernelSyntaxError("if branches have different types", *node.pos)
        return If(cond, then, orelse, node.pos), tk

    def _while(self, node: _List, args, scope):
        if len(args) != 3:
            raise KernelSyntaxError("expected (while cond ((name init update)...) body)", *node.pos)
        inner = dict(scope)
        pending = []
        for spec in self._bindings(args[1], 'while'):
            if not isinstance(spec, _List) or len(spec.items) != 3:
                raise KernelSyntaxError("malformed loop variable", *spec.pos)
            name = self._name(spec.items[0])
            init, kind = self.expr(spec.items[1], scope)
            if kind is ValueType.BOOL:
                raise KernelSyntaxError(f"cannot bind boolean to '{name}'", *spec.pos)
            inner[name] = kind
            pending.append((name, init, spec))
        cond, ck = self.expr(args[0], inner)
        self._expect(ck, ValueType.BOOL, 'while', node.pos)
        loop_vars = []
        for name, init, spec in pending:
            update, kind = self.expr(spec.items[2], inner)
            if kind is not inner[name]:
                raise KernelSyntaxError(f"update of '{name}' changes its type", *spec.pos)
            loop_vars.append((name, init, update))
        body, kind = self.expr(args[2], inner)
        return While(cond, tuple(loop_vars), body, node.pos), kind


def _check_acyclic(calls: Dict[str, set], functions: Dict[str, Function]) -> None:
    state: Dict[str, int] = {}

    def visit(name: str, path: List[str]):
        state[name] = 1
        for callee in sorted(calls[name]):
            if state.get(callee) == 1:
                cycle = ' -> '.join(path[path.index(callee):] + [callee]) if callee in path \
                    else f"{name} -> {callee}"
                raise RecursionCycleError(f"recursive call cycle: {cycle}", *functions[callee].pos)
            if callee not in state:
                visit(callee, path + [callee])
        state[name] = 2

    for name in functions:
        if name not in state:
            visit(name, [name])


def parse_program(text: str, entry: Optional[str] = None) -> Program:
    """Parse and validate kernel source; the entry defaults to the last definition"""
    forms = _read(_tokenize(text))
    if not forms:
        raise KernelSyntaxError("program defines no function", 1, 1)

    signatures: Dict[str, int] = {}
    for form in forms:
        items = form.items
        if not items or not isinstance(items[0], _Atom) or items[0].text != 'define':
            raise KernelSyntaxError("expected a (define ...) form", *form.pos)
        if len(items) < 2 or not isinstance(items[1], _List) or not items[1].items:
            raise KernelSyntaxError("expected (define (name param...) body)", *form.pos)
        name = _Checker._name(items[1].items[0])
        if name in signatures:
            raise KernelSyntaxError(f"function '{name}' defined twice", *form.pos)
        signatures[name] = len(items[1].items) - 1

    checker = _Checker(signatures)
    functions = {}
    for form in forms:
        fn = checker.function(form)
        functions[fn.name] = fn
    _check_acyclic(checker.calls, functions)

    entry = entry or list(functions)[-1]
    if entry not in functions:
        raise UnknownOperatorError(f"entry function '{entry}' is not defined")
    logger.debug(f"parsed {len(functions)} function(s), entry '{entry}'")
    return Program(functions, entry, text)


def call_graph(program: Program) -> Dict[str, List[str]]:
    graph: Dict[str, List[str]] = {}

    def walk(node, out: set):
        if isinstance(node, Call):
            out.add(node.function)
        for child in _children(node):
            walk(child, out)

    for name, fn in program.functions.items():
        callees: set = set()
        walk(fn.body, callees)
        graph[name] = sorted(callees)
    return graph


def _children(node) -> Sequence:
    if isinstance(node, (OpNode, Logic, Call)):
        return node.args
    if isinstance(node, Compare):
        return (node.left, node.right)
    if isinstance(node, Let):
        return tuple(e for _, e in node.bindings) + (node.body,)
    if isinstance(node, If):
        return (node.cond, node.then, node.orelse)
    if isinstance(node, While):
        parts: List = [node.cond]
        for _, init, update in node.loop_vars:
            parts.extend((init, update))
        parts.append(node.body)
        return tuple(parts)
    return ()


def static_op_count(program: Program, function: Optional[str] = None) -> int:
    """Operators in a function body with calls expanded; loop bodies count once"""
    def count(node) -> int:
        own = 1 if isinstance(node, OpNode) else 0
        if isinstance(node, Call):
            own = count(program.functions[node.function].body)
        return own + sum(count(child) for child in _children(node))

    return count(program.functions[function or program.entry].body)


# ---------------------------------------------------------------- execution

@dataclass
class Value:
    """A runtime value: actual binary64 bits plus the backend's shadow"""
    actual: float
    shadow: Any = None
    provenance: Optional[OpProvenance] = None
    literal: Optional[float] = None


@dataclass(frozen=True)
class OpEvent:
    """Everything a shadow hook sees about one executed operator"""
    op_id: int
    operator: Operator
    operands: Tuple[float, ...]
    shadows: Tuple[Any, ...]
    operand_provenance: Tuple[Optional[OpProvenance], ...]
    result: float
    provenance: OpProvenance
    position: Position


@dataclass
class TraceRecord:
    op_id: int
    operator: Operator
    operands: Tuple[float, ...]
    result: float
    residue: Residue
    position: Position = (0, 0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'op_id': self.op_id,
            'operator': self.operator.value,
            'operands': list(self.operands),
            'result': self.result,
            'residue': self.residue.to_dict(),
            'position': list(self.position),
        }


@dataclass
class Trace:
    records: List[TraceRecord] = field(default_factory=list)
    output: float = math.nan
    hook_seconds: float = 0.0

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, op_id: int) -> TraceRecord:
        return self.records[op_id]

    def residues(self) -> List[float]:
        return [r.residue.value for r in self.records]

    def signature(self) -> Tuple[Tuple[str, int], ...]:
        """OpId-ordered (operator, result bits) pairs, the determinism fingerprint"""
        return tuple((r.operator.value, _bits(r.result)) for r in self.records)


def _bits(x: float) -> int:
    return int(np.float64(x).view(np.uint64))


class ShadowHook:
    """Interface between the interpreter and a residue backend.

    ``lift`` creates the shadow of an input or a literal, ``on_op`` returns
    the shadow and residue of an executed operator. The default hook does
    no shadow work at all.
    """
    name = 'plain'

    def begin(self, trace: Trace) -> None:
        self.trace = trace

    def lift(self, actual: float, literal: bool) -> Any:
        return None

    def on_op(self, event: OpEvent) -> Tuple[Any, Residue]:
        return None, EXACT


def _machine_op(operator: Operator, operands: Sequence[float]) -> float:
    if operator is Operator.ADD:
        return operands[0] + operands[1]
    if operator is Operator.SUB:
        return operands[0] - operands[1]
    if operator is Operator.MUL:
        return operands[0] * operands[1]
    if operator is Operator.DIV:
        with np.errstate(all='ignore'):
            return float(np.float64(operands[0]) / np.float64(operands[1]))
    if operator is Operator.SQRT:
        with np.errstate(all='ignore'):
            return float(np.sqrt(np.float64(operands[0])))
    if operator is Operator.FABS:
        return abs(operands[0])
    if operator is Operator.NEG:
        return -operands[0]
    if operator is Operator.CAST64TO32:
        return float(narrow_to_binary32(operands[0]))
    return operands[0]


class Interpreter:
    """Executes one program run; never reads shadow state for control flow"""

    def __init__(self, program: Program, hook: Optional[ShadowHook] = None,
                 max_ops: int = DEFAULT_MAX_DYN_OPS):
        self.program = program
        self.hook = hook or ShadowHook()
        self.max_ops = max_ops
        self.trace = Trace()
        self.next_op = 0
        self.loop_steps = 0

    def run(self, inputs: Sequence[float]) -> Trace:
        if len(inputs) != self.program.arity:
            raise KernelRuntimeError(
                f"'{self.program.entry}' takes {self.program.arity} inputs, got {len(inputs)}")
        self.hook.begin(self.trace)
        env = {}
        for name, x in zip(self.program.params, inputs):
            x = float(x)
            env[name] = Value(x, self._lift(x, False))
        result = self._eval(self.program.functions[self.program.entry].body, env)
        self.trace.output = result.actual
        return self.trace

    def _lift(self, actual: float, literal: bool) -> Any:
        start = time.perf_counter()
        shadow = self.hook.lift(actual, literal)
        self.trace.hook_seconds += time.perf_counter() - start
        return shadow

    def _apply(self, node: OpNode, args: List[Value]) -> Value:
        op_id = self.next_op
        if op_id >= self.max_ops:
            raise OpLimitExceeded(f"dynamic op limit of {self.max_ops} exceeded at "
                                  f"{node.pos[0]}:{node.pos[1]}")
        self.next_op += 1

        operands = tuple(a.actual for a in args)
        result = _machine_op(node.operator, operands)
        constant, on_left = None, False
        if len(args) == 2:
            if args[1].literal is not None:
                constant = args[1].literal
            elif args[0].literal is not None:
                constant, on_left = args[0].literal, True
        provenance = OpProvenance(node.operator, op_id, constant, on_left)
        event = OpEvent(op_id, node.operator, operands, tuple(a.shadow for a in args),
                        tuple(a.provenance for a in args), result, provenance, node.pos)

        start = time.perf_counter()
        shadow, residue = self.hook.on_op(event)
        self.trace.hook_seconds += time.perf_counter() - start

        self.trace.records.append(TraceRecord(op_id, node.operator, operands, result,
                                              residue, node.pos))
        return Value(result, shadow, provenance)

    def _step(self, node: While) -> None:
        # loops without FP ops in their updates are bounded by the same limit
        self.loop_steps += 1
        if self.loop_steps > self.max_ops:
            raise OpLimitExceeded(f"dynamic op limit of {self.max_ops} exceeded by the loop at "
                                  f"{node.pos[0]}:{node.pos[1]}")

    def _eval(self, node, env: Dict[str, Value]):
        if isinstance(node, Num):
            return Value(node.value, self._lift(node.value, True), None, node.value)
        if isinstance(node, Var):
            return env[node.name]
        if isinstance(node, OpNode):
            args = [self._eval(a, env) for a in node.args]
            return self._apply(node, args)
        if isinstance(node, BoolLit):
            return node.value
        if isinstance(node, Compare):
            left = self._eval(node.left, env).actual
            right = self._eval(node.right, env).actual
            return COMPARISONS[node.symbol](left, right)
        if isinstance(node, Logic):
            if node.word == 'not':
                return not self._eval(node.args[0], env)
            for arg in node.args:
                value = self._eval(arg, env)
                if node.word == 'and' and not value:
                    return False
                if node.word == 'or' and value:
                    return True
            return node.word == 'and'
        if isinstance(node, Let):
            inner = dict(env)
            for name, expr in node.bindings:
                inner[name] = self._eval(expr, inner if node.sequential else env)
            return self._eval(node.body, inner)
        if isinstance(node, If):
            branch = node.then if self._eval(node.cond, env) else node.orelse
            return self._eval(branch, env)
        if isinstance(node, While):
            inner = dict(env)
            inner.update({name: self._eval(init, env) for name, init, _ in node.loop_vars})
            while self._eval(node.cond, inner):
                self._step(node)
                updated = {name: self._eval(update, inner) for name, _, update in node.loop_vars}
                inner.update(updated)
            return self._eval(node.body, inner)
        if isinstance(node, Call):
            callee = self.program.functions[node.function]
            args = [self._eval(a, env) for a in node.args]
            return self._eval(callee.body, dict(zip(callee.params, args)))
        raise KernelRuntimeError(f"cannot evaluate {type(node).__name__}")


def execute(program: Program, inputs: Sequence[float], hook: Optional[ShadowHook] = None,
            max_ops: int = DEFAULT_MAX_DYN_OPS) -> Trace:
    """Run the entry function once; the trace holds the output and one record per op"""
    return Interpreter(program, hook, max_ops).run(inputs)
