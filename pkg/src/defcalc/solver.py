"""Satisfiability backend for path queries.

The builtin procedure decides conjunctions of quantifier-free constraints
over exact rationals, integers, money (integer cents), booleans, and finite
enum tags, with Round/Floor occurrences.  The pipeline is:

1. simplify each literal (ground folding, double negation, linear-difference
   folding);
2. lazily enumerate case-split branches (disjunctions, disequalities, bool
   and enum equalities, and one sign split per Round occurrence), in a fixed
   deterministic order;
3. per branch, replace Round/Floor terms with integer auxiliaries and their
   defining inequalities, linearize, and solve the linear core by
   Fourier-Motzkin elimination with branch-and-bound over the integers.

Model selection is deterministic: variables are assigned in declaration
order with the smallest feasible absolute value (ties toward nonnegative);
variables not mentioned by any literal keep their retained value (the
session holds the exploration's initial input for this), so models stay
close to the user's starting point.  A case-split/candidate budget bounds
the search; when it runs out the answer is Unknown, never a wrong model.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

from .lang import (
    BOOL, INT, MONEY,
    EnumT, Value, VBool, VEnum, VInt, VMoney, VRat,
)
from .symbolic import (
    FALSE, Leaf, SymBin, SymConst, SymExpr, SymFloor, SymIsVariant, SymNot,
    SymRound, SymVar, TRUE, default_value, render, sym_eval, sym_eval_bool,
    sym_free_vars, sym_not,
)

DEFAULT_BUDGET = 1 << 16
_BRANCH_CAP = 4096


class SolverUsageError(Exception):
    pass


class SolverFailure(Exception):
    """External backend failed (process error, unparsable reply)."""


@dataclass(frozen=True)
class Sat:
    model: dict  # leaf name -> Value, total over declarations
    tier: Optional[str] = None


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class Unknown:
    reason: str = ""


UNSAT = Unsat()


@dataclass
class SolverStats:
    checks: int = 0
    sat: int = 0
    unsat: int = 0
    unknown: int = 0
    pushes: int = 0
    pops: int = 0


@dataclass(frozen=True)
class Query:
    """One self-contained satisfiability question."""
    decls: tuple  # tuple[Leaf, ...]
    literals: tuple  # tuple[SymExpr, ...] conjunction

    def __post_init__(self):
        declared = {l.name for l in self.decls}
        for lit in self.literals:
            undeclared = sym_free_vars(lit) - declared
            if undeclared:
                raise SolverUsageError(f"undeclared variables {sorted(undeclared)}")


# ---------------------------------------------------------------------------
# Literal simplification


class NonLinear(Exception):
    pass


def linearize(e: SymExpr) -> tuple:
    """Linear normal form of a numeric term: (coeffs, const) meaning
    sum(coeffs[v]*v) + const.  Raises NonLinear on products of variables,
    division by a non-ground term, or leftover Round/Floor nodes."""
    match e:
        case SymVar(name, ty):
            if ty == BOOL or isinstance(ty, EnumT):
                raise NonLinear("boolean/enum term in numeric position")
            return {name: Fraction(1)}, Fraction(0)
        case SymConst(v):
            match v:
                case VInt(i):
                    return {}, Fraction(i)
                case VRat(q):
                    return {}, q
                case VMoney(c):
                    return {}, Fraction(c)
            raise NonLinear(f"non-numeric constant {v!r}")
        case SymBin("+" | "-" as op, lhs, rhs):
            c1, k1 = linearize(lhs)
            c2, k2 = linearize(rhs)
            sign = 1 if op == "+" else -1
            out = dict(c1)
            for n, c in c2.items():
                out[n] = out.get(n, Fraction(0)) + sign * c
                if out[n] == 0:
                    del out[n]
            return out, k1 + sign * k2
        case SymBin("*", lhs, rhs):
            c1, k1 = linearize(lhs)
            c2, k2 = linearize(rhs)
            if not c1:
                return {n: k1 * c for n, c in c2.items() if k1 * c != 0}, k1 * k2
            if not c2:
                return {n: k2 * c for n, c in c1.items() if k2 * c != 0}, k2 * k1
            raise NonLinear("product of two non-ground terms")
        case SymBin("/", lhs, rhs):
            c2, k2 = linearize(rhs)
            if c2 or k2 == 0:
                raise NonLinear("division by a non-ground or zero term")
            c1, k1 = linearize(lhs)
            return {n: c / k2 for n, c in c1.items()}, k1 / k2
    raise NonLinear(f"not linear: {render(e)}")


def simplify(e: SymExpr) -> SymExpr:
    """Sound rewriting: constant folding, double negation, ground-term
    evaluation, and linear-difference folding for comparisons (so that
    ``x + 0 = x`` becomes true).  The result is equivalent to the input
    under every assignment."""
    if not sym_free_vars(e):
        try:
            v = sym_eval(e, {})
        except (ZeroDivisionError, AssertionError, TypeError):
            return e
        if isinstance(v, bool):
            return TRUE if v else FALSE
        if isinstance(v, Fraction):
            if v.denominator == 1:
                return SymConst(VInt(v.numerator))
            return SymConst(VRat(v))
        return e
    match e:
        case SymNot(a):
            sa = simplify(a)
            if sa == TRUE:
                return FALSE
            if sa == FALSE:
                return TRUE
            return sym_not(sa)
        case SymBin("&&", a, b):
            sa, sb = simplify(a), simplify(b)
            if sa == FALSE or sb == FALSE:
                return FALSE
            if sa == TRUE:
                return sb
            if sb == TRUE:
                return sa
            return SymBin("&&", sa, sb)
        case SymBin("||", a, b):
            sa, sb = simplify(a), simplify(b)
            if sa == TRUE or sb == TRUE:
                return TRUE
            if sa == FALSE:
                return sb
            if sb == FALSE:
                return sa
            return SymBin("||", sa, sb)
        case SymBin(op, a, b) if op in ("=", "<", "<=", ">", ">=") and \
                _sort_of(a) == "num":
            sa, sb = simplify(a), simplify(b)
            try:
                c1, k1 = linearize(sa)
                c2, k2 = linearize(sb)
            except NonLinear:
                return SymBin(op, sa, sb)
            diff = dict(c1)
            for n, c in c2.items():
                diff[n] = diff.get(n, Fraction(0)) - c
                if diff[n] == 0:
                    del diff[n]
            if not diff:
                k = k1 - k2  # lhs - rhs == k
                truth = {"=": k == 0, "<": k < 0, "<=": k <= 0,
                         ">": k > 0, ">=": k >= 0}[op]
                return TRUE if truth else FALSE
            return SymBin(op, sa, sb)
        case SymBin(op, a, b):
            return SymBin(op, simplify(a), simplify(b))
        case SymRound(a):
            return SymRound(simplify(a))
        case SymFloor(a):
            return SymFloor(simplify(a))
        case _:
            return e


def _sort_of(e: SymExpr) -> str:
    match e:
        case SymVar(_, ty):
            if ty == BOOL:
                return "bool"
            if isinstance(ty, EnumT):
                return "enum"
            return "num"
        case SymConst(v):
            if isinstance(v, VBool):
                return "bool"
            if isinstance(v, VEnum):
                return "enum"
            return "num"
        case SymBin(op, _, _):
            return "bool" if op in ("&&", "||", "=", "<", "<=", ">", ">=") else "num"
        case SymNot(_) | SymIsVariant(_, _):
            return "bool"
        case SymRound(_) | SymFloor(_):
            return "num"
    raise TypeError(f"not a symbolic term: {e!r}")


# ---------------------------------------------------------------------------
# Case-split branch enumeration

# Branch atoms:
#   ("bool", name, polarity)
#   ("variant", name, variant, polarity)
#   ("num", op, lhs_sym, rhs_sym)  with op in {"=", "<", "<="}


class _Budget:
    def __init__(self, limit: int):
        self.left = limit

    def spend(self, n: int = 1):
        self.left -= n
        if self.left < 0:
            raise _OutOfBudget()


class _OutOfBudget(Exception):
    pass


def _branches(e: SymExpr, pol: bool) -> Iterator[list]:
    match e:
        case SymConst(VBool(b)):
            if b == pol:
                yield []
            return
        case SymVar(name, ty) if ty == BOOL:
            yield [("bool", name, pol)]
            return
        case SymNot(a):
            yield from _branches(a, not pol)
            return
        case SymIsVariant(SymVar(name, _), variant):
            yield [("variant", name, variant, pol)]
            return
        case SymBin("&&", a, b):
            if pol:
                yield from _product(a, True, b, True)
            else:
                yield from itertools.chain(_branches(a, False), _branches(b, False))
            return
        case SymBin("||", a, b):
            if pol:
                yield from itertools.chain(_branches(a, True), _branches(b, True))
            else:
                yield from _product(a, False, b, False)
            return
        case SymBin("=", a, b) if _sort_of(a) == "bool" or _sort_of(b) == "bool":
            if pol:
                yield from itertools.chain(_product(a, True, b, True),
                                           _product(a, False, b, False))
            else:
                yield from itertools.chain(_product(a, True, b, False),
                                           _product(a, False, b, True))
            return
        case SymBin("=", a, b) if _sort_of(a) == "enum" or _sort_of(b) == "enum":
            expanded = _expand_enum_eq(a, b)
            yield from _branches(expanded, pol)
            return
        case SymBin(op, a, b) if op in ("=", "<", "<=", ">", ">="):
            if op == ">":
                op, a, b = "<", b, a
            elif op == ">=":
                op, a, b = "<=", b, a
            if pol:
                yield [("num", op, a, b)]
            else:
                if op == "=":
                    yield [("num", "<", a, b)]
                    yield [("num", "<", b, a)]
                elif op == "<":
                    yield [("num", "<=", b, a)]
                else:
                    yield [("num", "<", b, a)]
            return
    raise NonLinear(f"not a boolean term: {render(e)}")


def _product(a: SymExpr, pa: bool, b: SymExpr, pb: bool) -> Iterator[list]:
    for left in _branches(a, pa):
        for right in _branches(b, pb):
            yield left + right


def _expand_enum_eq(a: SymExpr, b: SymExpr) -> SymExpr:
    ety = None
    for side in (a, b):
        if isinstance(side, SymVar) and isinstance(side.ty, EnumT):
            ety = side.ty
    if ety is None:
        # Both sides constant tags.
        va = a.value.variant if isinstance(a, SymConst) else None
        vb = b.value.variant if isinstance(b, SymConst) else None
        return TRUE if va == vb else FALSE

    def is_v(side: SymExpr, v: str) -> SymExpr:
        if isinstance(side, SymVar):
            return SymIsVariant(side, v)
        assert isinstance(side, SymConst) and isinstance(side.value, VEnum)
        return TRUE if side.value.variant == v else FALSE

    out: Optional[SymExpr] = None
    for v in ety.variant_names():
        both = SymBin("&&", is_v(a, v), is_v(b, v))
        out = both if out is None else SymBin("||", out, both)
    assert out is not None
    return out


# ---------------------------------------------------------------------------
# Round/Floor elimination


def _strip_rounds(atoms: list) -> tuple:
    """Replace Round/Floor subterms across the branch's numeric atoms with
    integer auxiliaries.  Returns (rewritten atoms, specs) where each spec is
    (aux name, kind, argument term with deeper rounds already stripped)."""
    table: dict = {}
    specs: list = []

    def rewrite(e: SymExpr) -> SymExpr:
        match e:
            case SymRound(arg) | SymFloor(arg):
                kind = "round" if isinstance(e, SymRound) else "floor"
                inner = rewrite(arg)
                key = (kind, inner)
                if key not in table:
                    aux = f".{kind}{len(specs)}"
                    table[key] = SymVar(aux, INT)
                    specs.append((aux, kind, inner))
                return table[key]
            case SymBin(op, a, b):
                return SymBin(op, rewrite(a), rewrite(b))
            case _:
                return e

    out = []
    for atom in atoms:
        if atom[0] == "num":
            _, op, a, b = atom
            out.append(("num", op, rewrite(a), rewrite(b)))
        else:
            out.append(atom)
    return out, specs


_HALF = Fraction(1, 2)


def _round_cases(specs: list) -> Iterator[list]:
    """All sign-split assignments for the round specs, each yielding the
    defining linear atoms.  Floor needs no split."""
    per_spec = []
    for aux, kind, arg in specs:
        v = SymVar(aux, INT)
        if kind == "floor":
            per_spec.append([[
                ("num", "<=", v, arg),                      # aux <= t
                ("num", "<", arg, SymBin("+", v, SymConst(VInt(1)))),  # t < aux+1
            ]])
        else:
            half = SymConst(VRat(_HALF))
            nonneg = [
                ("num", "<=", SymConst(VInt(0)), arg),
                ("num", "<=", SymBin("-", v, half), arg),   # aux - 1/2 <= t
                ("num", "<", arg, SymBin("+", v, half)),     # t < aux + 1/2
            ]
            negative = [
                ("num", "<", arg, SymConst(VInt(0))),
                ("num", "<", SymBin("-", v, half), arg),     # aux - 1/2 < t
                ("num", "<=", arg, SymBin("+", v, half)),    # t <= aux + 1/2
            ]
            per_spec.append([nonneg, negative])
    for combo in itertools.product(*per_spec):
        yield [a for case in combo for a in case]


# ---------------------------------------------------------------------------
# Linear core: Fourier-Motzkin + branch-and-bound over the integers

# A linear atom is (coeffs: dict, const: Fraction, op: str) standing for
# sum(coeffs[v]*v) + const OP 0, op in {"=", "<=", "<"}.


class _Infeasible(Exception):
    pass


def _lin_atoms(atoms: list) -> list:
    out = []
    for _, op, a, b in atoms:
        c1, k1 = linearize(a)
        c2, k2 = linearize(b)
        coeffs = dict(c1)
        for n, c in c2.items():
            coeffs[n] = coeffs.get(n, Fraction(0)) - c
            if coeffs[n] == 0:
                del coeffs[n]
        out.append((coeffs, k1 - k2, op))
    return out


def _check_ground(coeffs: dict, const: Fraction, op: str) -> Optional[bool]:
    if coeffs:
        return None
    return {"=": const == 0, "<=": const <= 0, "<": const < 0}[op]


def _substitute(atoms: list, name: str, value: Fraction) -> list:
    out = []
    for coeffs, const, op in atoms:
        if name in coeffs:
            coeffs = dict(coeffs)
            const = const + coeffs.pop(name) * value
        g = _check_ground(coeffs, const, op)
        if g is False:
            raise _Infeasible()
        if g is True:
            continue
        out.append((coeffs, const, op))
    return out


def _eliminate(atoms: list, name: str) -> list:
    """Project `name` out of the system (exact FM; equalities substitute)."""
    for i, (coeffs, const, op) in enumerate(atoms):
        if op == "=" and name in coeffs:
            cv = coeffs[name]
            rest = {n: -c / cv for n, c in coeffs.items() if n != name}
            rconst = -const / cv
            out = []
            for j, (c2, k2, op2) in enumerate(atoms):
                if j == i:
                    continue
                if name not in c2:
                    out.append((c2, k2, op2))
                    continue
                c = c2[name]
                merged = {n: v for n, v in c2.items() if n != name}
                for n, v in rest.items():
                    merged[n] = merged.get(n, Fraction(0)) + c * v
                    if merged[n] == 0:
                        del merged[n]
                k = k2 + c * rconst
                g = _check_ground(merged, k, op2)
                if g is False:
                    raise _Infeasible()
                if g is True:
                    continue
                out.append((merged, k, op2))
            return out
    uppers, lowers, rest = [], [], []
    for coeffs, const, op in atoms:
        c = coeffs.get(name, Fraction(0))
        if c > 0:
            uppers.append((coeffs, const, op))
        elif c < 0:
            lowers.append((coeffs, const, op))
        else:
            rest.append((coeffs, const, op))
    for (cu, ku, opu) in uppers:
        for (cl, kl, opl) in lowers:
            a, b = cu[name], -cl[name]  # a, b > 0
            merged: dict = {}
            for n, v in cu.items():
                if n != name:
                    merged[n] = merged.get(n, Fraction(0)) + b * v
            for n, v in cl.items():
                if n != name:
                    merged[n] = merged.get(n, Fraction(0)) + a * v
            merged = {n: v for n, v in merged.items() if v != 0}
            k = b * ku + a * kl
            op = "<" if "<" in (opu, opl) and (opu == "<" or opl == "<") else "<="
            g = _check_ground(merged, k, op)
            if g is False:
                raise _Infeasible()
            if g is True:
                continue
            rest.append((merged, k, op))
    return rest


def _bounds_of(atoms: list, name: str) -> tuple:
    """Project all other variables away and read off bounds for `name`:
    (lo, lo_strict, hi, hi_strict), None meaning unbounded."""
    sys = atoms
    others = sorted({n for coeffs, _, _ in atoms for n in coeffs} - {name})
    for v in others:
        sys = _eliminate(sys, v)
    lo, lo_strict, hi, hi_strict = None, False, None, False
    for coeffs, const, op in sys:
        if name not in coeffs:
            g = _check_ground(coeffs, const, op)
            if g is False:
                raise _Infeasible()
            continue
        c = coeffs[name]
        bound = -const / c
        if op == "=":
            if (lo is None or bound > lo or (bound == lo and not lo_strict)):
                lo, lo_strict = bound, False
            if (hi is None or bound < hi or (bound == hi and not hi_strict)):
                hi, hi_strict = bound, False
            continue
        strict = op == "<"
        if c > 0:  # name <= bound
            if hi is None or bound < hi or (bound == hi and strict):
                hi, hi_strict = bound, strict
        else:  # name >= bound
            if lo is None or bound > lo or (bound == lo and strict):
                lo, lo_strict = bound, strict
    if lo is not None and hi is not None:
        if lo > hi or (lo == hi and (lo_strict or hi_strict)):
            raise _Infeasible()
    return lo, lo_strict, hi, hi_strict


def _feasible(atoms: list) -> bool:
    sys = atoms
    try:
        for v in sorted({n for coeffs, _, _ in atoms for n in coeffs}):
            sys = _eliminate(sys, v)
        for coeffs, const, op in sys:
            if _check_ground(coeffs, const, op) is False:
                return False
        return True
    except _Infeasible:
        return False


def _int_window_empty(lo, lo_strict, hi, hi_strict) -> bool:
    if lo is None or hi is None:
        return False
    ilo = (lo.numerator + (1 if lo_strict else 0)) if lo.denominator == 1 \
        else int(lo.__ceil__())
    ihi = (hi.numerator - (1 if hi_strict else 0)) if hi.denominator == 1 \
        else int(hi.__floor__())
    return ilo > ihi


def _int_candidates(lo, lo_strict, hi, hi_strict, budget: _Budget) -> Iterator[int]:
    """Integers within the bounds in order of |x|, ties toward nonnegative."""
    if lo is None:
        ilo = None
    elif lo.denominator == 1:
        ilo = lo.numerator + 1 if lo_strict else lo.numerator
    else:
        ilo = int(lo.__ceil__())
    if hi is None:
        ihi = None
    elif hi.denominator == 1:
        ihi = hi.numerator - 1 if hi_strict else hi.numerator
    else:
        ihi = int(hi.__floor__())
    if ilo is not None and ihi is not None and ilo > ihi:
        return
    if ilo is not None and ilo > 0:
        k = ilo
        while ihi is None or k <= ihi:
            budget.spend()
            yield k
            k += 1
        return
    if ihi is not None and ihi < 0:
        k = ihi
        while ilo is None or k >= ilo:
            budget.spend()
            yield k
            k -= 1
        return
    k = 0
    while True:
        hit = False
        if (ihi is None or k <= ihi) and (ilo is None or k >= ilo):
            budget.spend()
            yield k
            hit = True
        if k > 0 and (ilo is None or -k >= ilo) and (ihi is None or -k <= ihi):
            budget.spend()
            yield -k
            hit = True
        if not hit and k > 0:
            return
        k += 1


def _pick_rational(lo, lo_strict, hi, hi_strict) -> Fraction:
    def inside(x: Fraction) -> bool:
        if lo is not None and (x < lo or (x == lo and lo_strict)):
            return False
        if hi is not None and (x > hi or (x == hi and hi_strict)):
            return False
        return True

    if inside(Fraction(0)):
        return Fraction(0)
    # Prefer the integer of least magnitude inside the interval.
    if lo is not None and (hi is None or lo >= 0):
        i = Fraction(int(lo.__ceil__()))
        if i == lo and lo_strict:
            i += 1
        if inside(i):
            return i
    if hi is not None and (lo is None or hi <= 0):
        i = Fraction(int(hi.__floor__()))
        if i == hi and hi_strict:
            i -= 1
        if inside(i):
            return i
    if lo is not None and hi is not None:
        return (lo + hi) / 2
    if lo is not None:
        return lo + 1
    assert hi is not None
    return hi - 1


def _solve_linear(atoms: list, order: list, budget: _Budget) -> Optional[dict]:
    """Assign the ordered variables; `order` is [(name, is_int), ...].
    Returns a partial model over mentioned variables, or None."""
    mentioned = {n for coeffs, _, _ in atoms for n in coeffs}
    for coeffs, const, op in atoms:
        if _check_ground(coeffs, const, op) is False:
            return None
    if not _feasible(atoms):
        return None
    todo = [(n, is_int) for n, is_int in order if n in mentioned]

    def go(system: list, pending: list, acc: dict) -> Optional[dict]:
        if not pending:
            return acc
        still = {n for coeffs, _, _ in system for n in coeffs}
        # Integral-emptiness pruning: if any pending integer variable's
        # projected window holds no integer, the branch is infeasible no
        # matter what the enumeration on earlier variables does.
        windows = {}
        for n, n_int in pending:
            if not n_int or n not in still:
                continue
            try:
                b = _bounds_of(system, n)
            except _Infeasible:
                return None
            windows[n] = b
            if _int_window_empty(*b):
                return None
        name, is_int = pending[0]
        if name not in still:
            # Dropped by simplification along the way; value is free.
            return go(system, pending[1:], acc)
        try:
            lo, los, hi, his = windows.get(name) or _bounds_of(system, name)
        except _Infeasible:
            return None
        if is_int:
            for c in _int_candidates(lo, los, hi, his, budget):
                try:
                    nxt = _substitute(system, name, Fraction(c))
                except _Infeasible:
                    continue
                if not _feasible(nxt):
                    continue
                out = go(nxt, pending[1:], {**acc, name: Fraction(c)})
                if out is not None:
                    return out
            return None
        x = _pick_rational(lo, los, hi, his)
        try:
            nxt = _substitute(system, name, x)
        except _Infeasible:
            return None
        return go(nxt, pending[1:], {**acc, name: x})

    return go(atoms, todo, {})


# ---------------------------------------------------------------------------
# Full builtin check


def _builtin_check(decls: tuple, literals: tuple, retain: dict,
                   budget_limit: int = DEFAULT_BUDGET) -> object:
    budget = _Budget(budget_limit)
    literals = tuple(simplify(l) for l in literals)
    if any(l == FALSE for l in literals):
        return UNSAT
    literals = tuple(l for l in literals if l != TRUE)

    leaf_by_name = {l.name: l for l in decls}
    enum_decls = {l.name: l.ty for l in decls if isinstance(l.ty, EnumT)}

    conj: Optional[SymExpr] = None
    for l in literals:
        conj = l if conj is None else SymBin("&&", conj, l)
    if conj is None:
        return Sat(_fill_model(decls, {}, {}, {}, retain))

    had_unknown = False
    try:
        branch_iter = _branches(conj, True)
    except NonLinear as e:
        return Unknown(str(e))

    count = 0
    while True:
        try:
            branch = next(branch_iter)
        except StopIteration:
            break
        except NonLinear as e:
            return Unknown(str(e))
        count += 1
        if count > _BRANCH_CAP:
            had_unknown = True
            break
        try:
            budget.spend()
            result = _solve_branch(branch, decls, enum_decls, retain, budget)
        except _OutOfBudget:
            had_unknown = True
            break
        except NonLinear:
            had_unknown = True
            continue
        if result is not None:
            return Sat(result)
    if had_unknown:
        return Unknown("case-split budget exhausted")
    return UNSAT


def _solve_branch(branch: list, decls: tuple, enum_decls: dict,
                  retain: dict, budget: _Budget) -> Optional[dict]:
    bools: dict = {}
    allowed = {n: set(t.variant_names()) for n, t in enum_decls.items()}
    num_atoms = []
    for atom in branch:
        match atom:
            case ("bool", name, pol):
                if bools.get(name, pol) != pol:
                    return None
                bools[name] = pol
            case ("variant", name, variant, pol):
                if pol:
                    if variant not in allowed[name]:
                        return None
                    allowed[name] = {variant}
                else:
                    allowed[name].discard(variant)
                    if not allowed[name]:
                        return None
            case ("num", _, _, _):
                num_atoms.append(atom)

    num_atoms, specs = _strip_rounds(num_atoms)
    order = [(l.name, l.ty in (INT, MONEY)) for l in decls
             if l.ty != BOOL and not isinstance(l.ty, EnumT)]
    order += [(aux, True) for aux, _, _ in specs]

    solution: Optional[dict] = None
    if specs:
        for case in _round_cases(specs):
            budget.spend()
            sol = _solve_linear(_lin_atoms(num_atoms + case), order, budget)
            if sol is not None:
                solution = sol
                break
        if solution is None:
            return None
    else:
        solution = _solve_linear(_lin_atoms(num_atoms), order, budget)
        if solution is None:
            return None

    return _fill_model(decls, bools, allowed, solution, retain)


def _fill_model(decls: tuple, bools: dict, allowed: dict, nums: dict,
                retain: dict) -> dict:
    model: dict = {}
    for leaf in decls:
        name, ty = leaf.name, leaf.ty
        if isinstance(ty, EnumT):
            sets = allowed.get(name, set(ty.variant_names()))
            retained = retain.get(name)
            if isinstance(retained, VEnum) and retained.variant in sets:
                model[name] = VEnum(ty.name, retained.variant)
            else:
                pick = next(v for v in ty.variant_names() if v in sets)
                model[name] = VEnum(ty.name, pick)
        elif ty == BOOL:
            if name in bools:
                model[name] = VBool(bools[name])
            else:
                model[name] = retain.get(name, VBool(False))
        else:
            if name in nums:
                f = nums[name]
                model[name] = _num_value(ty, f)
            else:
                model[name] = retain.get(name, default_value(ty))
    return model


def _num_value(ty, f: Fraction) -> Value:
    if ty == INT:
        assert f.denominator == 1
        return VInt(f.numerator)
    if ty == MONEY:
        assert f.denominator == 1
        return VMoney(f.numerator)
    return VRat(f)


# ---------------------------------------------------------------------------
# Sessions

SOFT_TIERS = (("T100", 10000), ("T10", 1000), ("T1", 100))


def divisibility_constraints(decls, money_vars, unit: int) -> tuple:
    """Extend declarations and literals so every named money variable is a
    multiple of `unit` cents.  Each fresh multiplier is inserted immediately
    before its money variable so the minimal-|money| enumeration walks
    multiples of the unit instead of single cents."""
    decls = list(decls)
    lits = []
    for m in money_vars:
        aux = f".mult{unit}.{m}"
        idx = next(i for i, l in enumerate(decls) if l.name == m)
        decls.insert(idx, Leaf(aux, INT))
        lits.append(SymBin("=", SymVar(m, MONEY),
                           SymBin("*", SymConst(VInt(unit)), SymVar(aux, INT))))
    return tuple(decls), tuple(lits)


class SolverSession:
    """Incremental assertion stack over a fixed set of declarations.

    `base` literals (scope assertions) are conjoined to every check and are
    not affected by push/pop.  The builtin backend re-decides the current
    conjunction on every check, so a check after any push/pop sequence is
    observationally identical to a fresh session with the same net
    assertions.
    """

    def __init__(self, decls, base=(), backend=None, budget: int = DEFAULT_BUDGET,
                 on_query=None):
        self.decls = tuple(decls)
        self.base = list(base)
        self.frames: list = []
        self.retain: dict = {}
        self.backend = backend  # None -> builtin; else an ExternalSolver
        self.budget = budget
        self.stats = SolverStats()
        self.on_query = on_query  # callback(Query) for SMT-LIB emission
        self._model_check = True

    # -- stack ------------------------------------------------------------

    def push(self, literals) -> None:
        self.frames.append(list(literals))
        self.stats.pushes += 1

    def pop(self) -> None:
        if not self.frames:
            raise SolverUsageError("pop on empty assertion stack")
        self.frames.pop()
        self.stats.pops += 1

    @property
    def depth(self) -> int:
        return len(self.frames)

    def literals(self) -> tuple:
        out = list(self.base)
        for f in self.frames:
            out.extend(f)
        return tuple(out)

    # -- solving ----------------------------------------------------------

    def check(self, extra=()) -> object:
        lits = self.literals() + tuple(extra)
        query = Query(self.decls, lits)
        if self.on_query is not None:
            self.on_query(query)
        self.stats.checks += 1
        if self.backend is None:
            res = _builtin_check(self.decls, lits, self.retain, self.budget)
            if isinstance(res, Sat) and self._model_check:
                _assert_model(res.model, lits)
        else:
            res = self.backend.check(query)
        if isinstance(res, Sat):
            self.stats.sat += 1
        elif isinstance(res, Unsat):
            self.stats.unsat += 1
        else:
            self.stats.unknown += 1
        return res

    def check_soft(self, money_vars) -> object:
        """Hard check first; on Sat, walk the soft ladder for the given
        money variables jointly (multiples of $100, $10, $1) and return the
        first satisfiable tier's model."""
        hard = self.check()
        if not isinstance(hard, Sat):
            return hard
        money_vars = [m for m in money_vars if any(l.name == m for l in self.decls)]
        if not money_vars:
            return hard
        for tier_name, unit in SOFT_TIERS:
            decls, tier_lits = divisibility_constraints(self.decls, money_vars, unit)
            lits = self.literals() + tier_lits
            query = Query(decls, lits)
            if self.on_query is not None:
                self.on_query(query)
            self.stats.checks += 1
            if self.backend is None:
                res = _builtin_check(decls, lits, self.retain, self.budget)
                if isinstance(res, Sat) and self._model_check:
                    _assert_model(res.model, lits)
            else:
                res = self.backend.check(query)
            if isinstance(res, Sat):
                self.stats.sat += 1
                model = {k: v for k, v in res.model.items()
                         if not k.startswith(".mult")}
                return Sat(model, tier=tier_name)
            elif isinstance(res, Unsat):
                self.stats.unsat += 1
            else:
                self.stats.unknown += 1
        return hard


def _assert_model(model: dict, literals) -> None:
    for lit in literals:
        try:
            ok = sym_eval_bool(lit, model)
        except ZeroDivisionError:
            ok = False
        if not ok:
            raise AssertionError(
                f"solver produced a model violating {render(lit)}")
