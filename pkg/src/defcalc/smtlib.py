"""SMT-LIB v2 emission and the external solver protocol.

Queries are printed as standard SMT-LIB: booleans as Bool, ints and money
(cents) as Int, rationals as Real, enum tags as payload-free declared
datatypes; struct inputs and enum payloads are already flattened to leaf
constants by the time a query exists, and leaf names are emitted as quoted
symbols (``|h.income|``).  Rounding is the function

    round(q) = if q >= 0 then floor(q + 1/2) else -floor(-q + 1/2)

with floor via the Real-to-Int conversion, defined in the preamble whenever
a query mentions it.

The external backend spawns a user-configured command per check, writes the
query to its stdin, and parses ``sat``/``unsat``/``unknown`` plus the
``(get-model)`` S-expression reply.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .lang import (
    BOOL, INT, MONEY, RAT,
    EnumT, Value, VBool, VEnum, VInt, VMoney, VRat,
)
from .solver import Query, Sat, SolverFailure, Unknown, UNSAT
from .symbolic import (
    SymBin, SymConst, SymExpr, SymFloor, SymIsVariant, SymNot, SymRound,
    SymVar, default_value,
)

_ROUND_DEF = (
    "(define-fun dfc_round ((q Real)) Int"
    " (ite (>= q 0.0) (to_int (+ q (/ 1 2))) (- (to_int (+ (- q) (/ 1 2))))))"
)


def _symname(name: str) -> str:
    if name.isidentifier():
        return name
    return f"|{name}|"


def _sort_of_leaf(ty) -> str:
    if ty == BOOL:
        return "Bool"
    if ty in (INT, MONEY):
        return "Int"
    if ty == RAT:
        return "Real"
    assert isinstance(ty, EnumT)
    return ty.name


@dataclass
class _Emitter:
    query: Query

    def __post_init__(self):
        self.sorts = {l.name: l.ty for l in self.query.decls}

    def term_sort(self, e: SymExpr) -> str:
        match e:
            case SymVar(_, ty):
                return "Int" if ty in (INT, MONEY) else (
                    "Real" if ty == RAT else ("Bool" if ty == BOOL else "Enum"))
            case SymConst(v):
                match v:
                    case VInt() | VMoney():
                        return "Int"
                    case VRat():
                        return "Real"
                    case VBool():
                        return "Bool"
                    case VEnum():
                        return "Enum"
            case SymBin(op, a, b):
                if op in ("&&", "||", "=", "<", "<=", ">", ">="):
                    return "Bool"
                if op == "/":
                    return "Real"
                sa, sb = self.term_sort(a), self.term_sort(b)
                return "Real" if "Real" in (sa, sb) else "Int"
            case SymNot(_) | SymIsVariant(_, _):
                return "Bool"
            case SymRound(_) | SymFloor(_):
                return "Int"
        raise TypeError(f"no sort for {e!r}")

    def emit(self, e: SymExpr, want: Optional[str] = None) -> str:
        s = self._emit(e)
        if want == "Real" and self.term_sort(e) == "Int":
            return f"(to_real {s})"
        return s

    def _emit(self, e: SymExpr) -> str:
        match e:
            case SymVar(name, _):
                return _symname(name)
            case SymConst(v):
                return _const(v)
            case SymBin(op, a, b):
                smt_op = {"&&": "and", "||": "or", "=": "=", "<": "<",
                          "<=": "<=", ">": ">", ">=": ">=", "+": "+",
                          "-": "-", "*": "*", "/": "/"}[op]
                if op == "/":
                    return f"({smt_op} {self.emit(a, 'Real')} {self.emit(b, 'Real')})"
                sa, sb = self.term_sort(a), self.term_sort(b)
                want = "Real" if "Real" in (sa, sb) else None
                return f"({smt_op} {self.emit(a, want)} {self.emit(b, want)})"
            case SymNot(a):
                return f"(not {self.emit(a)})"
            case SymRound(a):
                return f"(dfc_round {self.emit(a, 'Real')})"
            case SymFloor(a):
                return f"(to_int {self.emit(a, 'Real')})"
            case SymIsVariant(a, v):
                return f"((_ is {v}) {self.emit(a)})"
        raise TypeError(f"cannot emit {e!r}")


def _const(v: Value) -> str:
    match v:
        case VBool(b):
            return "true" if b else "false"
        case VInt(i) | VMoney(i):
            return str(i) if i >= 0 else f"(- {-i})"
        case VRat(q):
            num = f"(/ {abs(q.numerator)} {q.denominator})" \
                if q.denominator != 1 else str(abs(q.numerator))
            return num if q >= 0 else f"(- {num})"
        case VEnum(_, variant, _):
            return variant
    raise TypeError(f"cannot emit constant {v!r}")


def _mentions_round(e: SymExpr) -> bool:
    from .symbolic import sym_children
    if isinstance(e, SymRound):
        return True
    return any(_mentions_round(c) for c in sym_children(e))


def emit_smtlib(query: Query) -> str:
    """Render a query as solver-ready SMT-LIB v2 text."""
    em = _Emitter(query)
    lines = ["(set-logic ALL)", "(set-option :produce-models true)"]
    seen_enums = []
    for leaf in query.decls:
        if isinstance(leaf.ty, EnumT) and leaf.ty.name not in [e.name for e in seen_enums]:
            seen_enums.append(leaf.ty)
    for et in seen_enums:
        ctors = " ".join(f"({v})" for v in et.variant_names())
        lines.append(f"(declare-datatypes (({et.name} 0)) (({ctors})))")
    if any(_mentions_round(l) for l in query.literals):
        lines.append(_ROUND_DEF)
    for leaf in query.decls:
        lines.append(f"(declare-const {_symname(leaf.name)} {_sort_of_leaf(leaf.ty)})")
    for lit in query.literals:
        lines.append(f"(assert {em.emit(lit)})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# S-expression reader for (get-model) replies


def _tokenize_sexpr(text: str):
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            yield c
            i += 1
        elif c == "|":
            j = text.index("|", i + 1)
            yield text[i:j + 1]
            i = j + 1
        elif c == '"':
            j = text.index('"', i + 1)
            yield text[i:j + 1]
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            yield text[i:j]
            i = j


def parse_sexprs(text: str) -> list:
    stack: list = [[]]
    for tok in _tokenize_sexpr(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            done = stack.pop()
            if not stack:
                raise SolverFailure("unbalanced parenthesis in solver reply")
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise SolverFailure("unbalanced parenthesis in solver reply")
    return stack[0]


def _atom_value(node, ty) -> Value:
    def frac(x) -> Fraction:
        if isinstance(x, list):
            if len(x) == 2 and x[0] == "-":
                return -frac(x[1])
            if len(x) == 3 and x[0] == "/":
                return frac(x[1]) / frac(x[2])
            raise SolverFailure(f"cannot read numeral {x!r}")
        return Fraction(x)

    if ty == BOOL:
        return VBool(node == "true")
    if ty == INT:
        f = frac(node)
        return VInt(f.numerator)
    if ty == MONEY:
        f = frac(node)
        return VMoney(f.numerator)
    if ty == RAT:
        return VRat(frac(node))
    if isinstance(ty, EnumT):
        name = node[0] if isinstance(node, list) else node
        name = name.strip("|")
        if name not in ty.variant_names():
            raise SolverFailure(f"unknown variant {name!r} for enum {ty.name}")
        return VEnum(ty.name, name)
    raise SolverFailure(f"cannot read model value of type {ty}")


def parse_model(reply: str, query: Query) -> dict:
    """Extract a leaf model from a get-model reply; missing leaves get their
    type default (solvers omit don't-care constants)."""
    sexprs = parse_sexprs(reply)
    assignments: dict = {}
    for node in sexprs:
        if not isinstance(node, list):
            continue
        entries = node
        if entries and entries[0] == "model":
            entries = entries[1:]
        for entry in entries:
            if (isinstance(entry, list) and len(entry) >= 5
                    and entry[0] == "define-fun"):
                name = entry[1].strip("|")
                body = entry[4]
                assignments[name] = body
    model = {}
    for leaf in query.decls:
        if leaf.name in assignments:
            model[leaf.name] = _atom_value(assignments[leaf.name], leaf.ty)
        else:
            dv = default_value(leaf.ty)
            if isinstance(dv, VEnum):
                dv = VEnum(dv.enum, dv.variant)
            model[leaf.name] = dv
    return model


class ExternalSolver:
    """Backend speaking SMT-LIB over a subprocess, one process per check."""

    def __init__(self, command: str, timeout: float = 30.0):
        self.argv = shlex.split(command)
        self.timeout = timeout

    def check(self, query: Query):
        text = emit_smtlib(query)
        try:
            proc = subprocess.run(
                self.argv, input=text, capture_output=True, text=True,
                timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as e:
            raise SolverFailure(f"external solver failed: {e}")
        words = proc.stdout.split()
        if not words:
            raise SolverFailure(
                f"external solver produced no output (stderr: {proc.stderr[:200]})")
        verdict = words[0]
        if verdict == "unsat":
            return UNSAT
        if verdict == "unknown":
            return Unknown("external solver returned unknown")
        if verdict != "sat":
            raise SolverFailure(f"unexpected solver reply {verdict!r}")
        body = proc.stdout[proc.stdout.index("sat") + 3:]
        return Sat(parse_model(body, query))


class SmtlibEmitter:
    """Writes one numbered .smt2 file per query (the --emit-smtlib option)."""

    def __init__(self, directory):
        import os
        self.dir = directory
        self.count = 0
        os.makedirs(directory, exist_ok=True)

    def __call__(self, query: Query) -> None:
        import os
        path = os.path.join(self.dir, f"q{self.count:06d}.smt2")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(emit_smtlib(query))
        self.count += 1
