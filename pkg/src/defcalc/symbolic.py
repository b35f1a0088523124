"""Symbolic terms over scope inputs.

Scope inputs are flattened into scalar *leaves* before instrumentation:
a struct input ``h`` contributes ``h.income``, ``h.kids``, ...; an enum input
``z`` contributes a tag leaf ``z`` plus one payload leaf ``z::Variant`` per
payload-carrying variant.  Symbolic terms mention only leaves, which keeps
the solver first-order: booleans, integers (ints and money in cents), exact
rationals, and finite enum tags, combined by linear arithmetic, comparisons,
connectives, and the rounding operators.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .lang import (
    BOOL, INT, MONEY, RAT,
    EnumT, SemType, StructT, Value, VBool, VEnum, VInt, VMoney, VRat,
)
from .interp import round_rat
from .parser import print_value


@dataclass(frozen=True)
class SymVar:
    name: str
    ty: SemType  # BOOL | INT | RAT | MONEY | EnumT (tag leaf)


@dataclass(frozen=True)
class SymConst:
    value: Value


@dataclass(frozen=True)
class SymBin:
    op: str  # + - * / = < <= > >= && ||
    lhs: "SymExpr"
    rhs: "SymExpr"


@dataclass(frozen=True)
class SymNot:
    arg: "SymExpr"


@dataclass(frozen=True)
class SymRound:
    """Round-to-nearest, ties away from zero; rational in, integer out."""
    arg: "SymExpr"


@dataclass(frozen=True)
class SymFloor:
    arg: "SymExpr"


@dataclass(frozen=True)
class SymIsVariant:
    arg: "SymExpr"  # an enum tag leaf
    variant: str


SymExpr = Union[SymVar, SymConst, SymBin, SymNot, SymRound, SymFloor, SymIsVariant]

TRUE = SymConst(VBool(True))
FALSE = SymConst(VBool(False))


def sym_not(e: SymExpr) -> SymExpr:
    """Negate, normalizing double negation away."""
    if isinstance(e, SymNot):
        return e.arg
    if e == TRUE:
        return FALSE
    if e == FALSE:
        return TRUE
    return SymNot(e)


def sym_children(e: SymExpr) -> tuple:
    match e:
        case SymVar() | SymConst():
            return ()
        case SymBin(_, lhs, rhs):
            return (lhs, rhs)
        case SymNot(a) | SymRound(a) | SymFloor(a):
            return (a,)
        case SymIsVariant(a, _):
            return (a,)
    raise TypeError(f"not a symbolic term: {e!r}")


def sym_free_vars(e: SymExpr) -> frozenset:
    match e:
        case SymVar(name, _):
            return frozenset((name,))
        case SymConst():
            return frozenset()
        case _:
            out: frozenset = frozenset()
            for c in sym_children(e):
                out |= sym_free_vars(c)
            return out


def render(e: SymExpr) -> str:
    """Deterministic rendering used for display, fingerprints, and the
    negation-of-earlier check."""
    match e:
        case SymVar(name, _):
            return name
        case SymConst(v):
            return print_value(v)
        case SymBin(op, lhs, rhs):
            return f"({render(lhs)} {op} {render(rhs)})"
        case SymNot(a):
            return f"!{render(a)}"
        case SymRound(a):
            return f"round({render(a)})"
        case SymFloor(a):
            return f"floor({render(a)})"
        case SymIsVariant(a, v):
            return f"({render(a)} is {v})"
    raise TypeError(f"not a symbolic term: {e!r}")


def sym_eval(e: SymExpr, env: dict):
    """Evaluate a symbolic term under a leaf environment.

    Symbolic arithmetic is exact rational arithmetic with money read as its
    cent count; rounding is explicit via the Round/Floor nodes (round_rat is
    the same function the interpreter rounds with).  Returns a bool, a
    Fraction, or a VEnum tag.  Raises ZeroDivisionError on division by zero,
    which callers treat as an unsatisfied term.
    """
    match e:
        case SymVar(name, _):
            return _ground(env[name])
        case SymConst(v):
            return _ground(v)
        case SymBin(op, lhs, rhs):
            a = sym_eval(lhs, env)
            b = sym_eval(rhs, env)
            match op:
                case "&&":
                    return a and b
                case "||":
                    return a or b
                case "=":
                    if isinstance(a, VEnum) or isinstance(b, VEnum):
                        return a.variant == b.variant
                    return a == b
                case "<":
                    return a < b
                case "<=":
                    return a <= b
                case ">":
                    return a > b
                case ">=":
                    return a >= b
                case "+":
                    return a + b
                case "-":
                    return a - b
                case "*":
                    return a * b
                case "/":
                    return a / b
            raise TypeError(f"unknown operator {op}")
        case SymNot(a):
            return not sym_eval(a, env)
        case SymRound(a):
            return Fraction(round_rat(sym_eval(a, env)))
        case SymFloor(a):
            return Fraction(int(sym_eval(a, env).__floor__()))
        case SymIsVariant(a, variant):
            v = sym_eval(a, env)
            assert isinstance(v, VEnum)
            return v.variant == variant
    raise TypeError(f"not a symbolic term: {e!r}")


def sym_eval_bool(e: SymExpr, env: dict) -> bool:
    v = sym_eval(e, env)
    assert isinstance(v, bool), f"literal {render(e)} is not boolean"
    return v


def _ground(v: Value):
    match v:
        case VBool(b):
            return b
        case VInt(i):
            return Fraction(i)
        case VRat(q):
            return q
        case VMoney(c):
            return Fraction(c)
        case VEnum():
            return v
    raise TypeError(f"not a scalar value: {v!r}")


# ---------------------------------------------------------------------------
# Input flattening


@dataclass(frozen=True)
class Leaf:
    """One scalar solver variable derived from a scope input."""
    name: str
    ty: SemType  # BOOL | INT | RAT | MONEY | EnumT


def flatten_type(name: str, ty: SemType) -> list:
    """All leaves contributed by one declared input, depth first, in
    declaration order."""
    match ty:
        case StructT(_, fields):
            out = []
            for f, fty in fields:
                out.extend(flatten_type(f"{name}.{f}", fty))
            return out
        case EnumT(_, variants):
            out = [Leaf(name, ty)]
            for v, pty in variants:
                if pty is not None:
                    out.extend(flatten_type(f"{name}::{v}", pty))
            return out
        case _:
            return [Leaf(name, ty)]


def scope_leaves(scope) -> list:
    out = []
    for n, ty in scope.inputs:
        out.extend(flatten_type(n, ty))
    return out


def default_value(ty: SemType) -> Value:
    """Deterministic initial value per type: false, 0, 0/1, $0.00, first
    declared enum variant with a defaulted payload."""
    from .lang import BoolT, IntT, MoneyT, RatT, VStruct
    match ty:
        case BoolT():
            return VBool(False)
        case IntT():
            return VInt(0)
        case RatT():
            return VRat(Fraction(0, 1))
        case MoneyT():
            return VMoney(0)
        case EnumT(name, variants):
            v, pty = variants[0]
            return VEnum(name, v, default_value(pty) if pty is not None else None)
        case StructT(name, fields):
            return VStruct(name, tuple((f, default_value(t)) for f, t in fields))
    raise TypeError(f"no default for type {ty}")


def leaf_env_of_inputs(scope, inputs: dict) -> dict:
    """Flatten a concrete input environment to leaf values.  Payload leaves
    of non-selected enum variants get type defaults so the leaf environment
    is total."""
    env: dict = {}

    def go(name: str, ty: SemType, v: Value):
        match ty:
            case StructT(_, fields):
                for f, fty in fields:
                    go(f"{name}.{f}", fty, v.field(f))
            case EnumT(_, variants):
                env[name] = VEnum(ty.name, v.variant)
                for variant, pty in variants:
                    if pty is not None:
                        if variant == v.variant and v.payload is not None:
                            go(f"{name}::{variant}", pty, v.payload)
                        else:
                            go(f"{name}::{variant}", pty, default_value(pty))
            case _:
                env[name] = v

    for n, ty in scope.inputs:
        go(n, ty, inputs[n])
    return env


def inputs_of_leaf_env(scope, leaf_env: dict) -> dict:
    """Rebuild the nested input environment from leaf values (the inverse of
    leaf_env_of_inputs up to unused payload leaves)."""

    def go(name: str, ty: SemType) -> Value:
        match ty:
            case StructT(sname, fields):
                from .lang import VStruct
                return VStruct(sname, tuple((f, go(f"{name}.{f}", fty)) for f, fty in fields))
            case EnumT(ename, variants):
                tag = leaf_env[name]
                assert isinstance(tag, VEnum)
                pty = ty.payload_of(tag.variant)
                payload = go(f"{name}::{tag.variant}", pty) if pty is not None else None
                return VEnum(ename, tag.variant, payload)
            case _:
                return leaf_env[name]

    return {n: go(n, ty) for n, ty in scope.inputs}
