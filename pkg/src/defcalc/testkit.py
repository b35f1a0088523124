"""Testcase serialization, replay, and the mutation-testing harness.

Testcase files are JSON with exact value encodings (money as cents,
rationals as numerator/denominator) so a replay compares outcomes exactly.
A suite directory holds one file per testcase plus a ``suite.json`` manifest
whose statistics always equal a recomputation from the testcase files.

Mutations inject the three fault shapes that matter for default logic:
removing exceptions (unhandled cases), duplicating an exception (guaranteed
conflict when it fires), and negating a justification (swapping handled and
unhandled regions).  A mutant counts as *found* when exploration emits an
empty/conflict testcase whose inputs produce a different outcome on the base
program; campaigns screen mutants for that property up-front by enumerating
a small input grid, replacing manual inspection.
"""

from __future__ import annotations

import itertools
import json
import os
import random
import time
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from .lang import (
    BOOL, INT, MONEY, RAT,
    Default, EnumT, Expr, Not, Program, Scope, StructT, Value, VBool, VEnum,
    VInt, VMoney, VRat, VStruct, children,
)
from .interp import Outcome, OutcomeKind, run_scope
from .explorer import ExploreConfig, TestSuite, Testcase, explore
from . import transforms


# ---------------------------------------------------------------------------
# JSON encoding (exact; no floats anywhere)


def value_to_json(v: Value):
    match v:
        case VBool(b):
            return b
        case VInt(i):
            return i
        case VMoney(c):
            return {"cents": c}
        case VRat(q):
            return {"num": q.numerator, "den": q.denominator}
        case VEnum(enum, variant, payload):
            out = {"enum": enum, "variant": variant}
            if payload is not None:
                out["payload"] = value_to_json(payload)
            return out
        case VStruct(struct, fields):
            return {"struct": struct,
                    "fields": {f: value_to_json(x) for f, x in fields}}
    raise TypeError(f"not a serializable value: {v!r}")


def value_from_json(data, ty) -> Value:
    if ty == BOOL:
        return VBool(bool(data))
    if ty == INT:
        return VInt(int(data))
    if ty == MONEY:
        return VMoney(int(data["cents"]))
    if ty == RAT:
        return VRat(Fraction(int(data["num"]), int(data["den"])))
    if isinstance(ty, EnumT):
        pty = ty.payload_of(data["variant"])
        payload = value_from_json(data["payload"], pty) if pty is not None else None
        return VEnum(ty.name, data["variant"], payload)
    if isinstance(ty, StructT):
        return VStruct(ty.name, tuple(
            (f, value_from_json(data["fields"][f], fty)) for f, fty in ty.fields))
    raise TypeError(f"cannot decode type {ty}")


def outcome_to_json(outcome: Outcome):
    if outcome.kind is OutcomeKind.VALUE:
        return {"kind": "value",
                "value": {n: value_to_json(v) for n, v in outcome.outputs}}
    if outcome.kind is OutcomeKind.EMPTY:
        return {"kind": "empty"}
    if outcome.kind is OutcomeKind.CONFLICT:
        return {"kind": "conflict"}
    raise ValueError("precondition violations are not testcases")


def testcase_to_json(tc: Testcase) -> dict:
    return {
        "scope": tc.scope,
        "inputs": {n: value_to_json(v) for n, v in tc.inputs.items()},
        "outcome": outcome_to_json(tc.outcome),
        "path_fp": tc.path_fp,
        "soft_tier": tc.soft_tier,
        "iter": tc.iteration,
    }


# ---------------------------------------------------------------------------
# Suite emission and replay


def emit_suite(suite: TestSuite, directory: str) -> list:
    """Write one JSON file per testcase plus suite.json; byte-stable for
    identical suites.  Returns the paths written."""
    os.makedirs(directory, exist_ok=True)
    written = []
    for i, tc in enumerate(suite.testcases, start=1):
        path = os.path.join(directory, f"tc{i:04d}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(testcase_to_json(tc), fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    manifest = {
        "scope": suite.scope,
        "complete": suite.complete,
        "opts": list(suite.opts),
        "stats": {
            "iterations": suite.stats.iterations,
            "tests": suite.stats.tests,
            "conflicts": suite.stats.conflicts,
            "empties": suite.stats.empties,
            "solver_calls": suite.stats.solver_calls,
            "sat": suite.stats.sat,
            "unsat": suite.stats.unsat,
            "unknown": suite.stats.unknown,
            "solver_failures": suite.stats.solver_failures,
        },
        "files": [os.path.basename(p) for p in written],
    }
    mpath = os.path.join(directory, "suite.json")
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return written + [mpath]


@dataclass(frozen=True)
class ReplayResult:
    passed: bool
    expected: object = None
    got: object = None

    def __bool__(self) -> bool:
        return self.passed


def replay(program: Program, testcase_file: str) -> ReplayResult:
    """Re-run a stored testcase on the reference evaluator; Pass iff the
    outcome matches exactly (value equality; empty/conflict by class)."""
    with open(testcase_file, encoding="utf-8") as fh:
        data = json.load(fh)
    scope = program.scope(data["scope"])
    types = dict(scope.inputs)
    inputs = {n: value_from_json(j, types[n]) for n, j in data["inputs"].items()}
    outcome = run_scope(program, data["scope"], inputs)
    if outcome.kind is OutcomeKind.PRECONDITION:
        return ReplayResult(False, data["outcome"], {"kind": "precondition"})
    got = outcome_to_json(outcome)
    want = data["outcome"]
    return ReplayResult(got == want, want, got)


def replay_dir(program: Program, directory: str) -> list:
    out = []
    for name in sorted(os.listdir(directory)):
        if name.startswith("tc") and name.endswith(".json"):
            out.append((name, replay(program, os.path.join(directory, name))))
    return out


# ---------------------------------------------------------------------------
# Mutation testing


class NoEligibleDefaultTerm(Exception):
    pass


@dataclass(frozen=True)
class MutationOp:
    kind: str  # "remove" | "duplicate" | "negate"
    count: int = 1  # exceptions to remove, for "remove"


@dataclass
class Mutant:
    base: Program
    program: Program
    op: MutationOp
    scope: str
    target_index: int  # index of the default term in traversal order
    target_span: object  # Span of the mutated default, when the AST has one
    seed: int


def _post_order_defaults(expr: Expr) -> list:
    out: list = []

    def go(e: Expr) -> None:
        for c in children(e):
            go(c)
        if isinstance(e, Default):
            out.append(e)

    go(expr)
    return out


def _default_sites(program: Program, need_exceptions: bool) -> list:
    """(scope name, traversal index) of eligible default terms; indices
    follow the same post-order numbering the replacement walk uses."""
    sites = []
    idx = 0
    for sc in program.scopes:
        for b in sc.bindings:
            for e in _post_order_defaults(b.expr):
                if not need_exceptions or e.exceptions:
                    sites.append((sc.name, idx))
                idx += 1
    return sites


def _replace_default(program: Program, target: int, f) -> Program:
    counter = [0]

    def go(e: Expr) -> Expr:
        new_children = [go(c) for c in children(e)]
        e = transforms._rebuild(e, new_children)
        if isinstance(e, Default):
            if counter[0] == target:
                counter[0] += 1
                return f(e)
            counter[0] += 1
        return e

    scopes = []
    for sc in program.scopes:
        bindings = tuple(replace(b, expr=go(b.expr)) for b in sc.bindings)
        scopes.append(replace(sc, bindings=bindings))
    return replace(program, scopes=tuple(scopes))


def mutate(program: Program, op: MutationOp, seed: int) -> Mutant:
    """Deterministic per (program, op, seed); the mutant still validates."""
    rng = random.Random(seed)
    needs_exc = op.kind in ("remove", "duplicate")
    sites = _default_sites(program, needs_exc)
    if not sites:
        raise NoEligibleDefaultTerm(f"no default term eligible for {op.kind}")
    scope_name, target = rng.choice(sites)
    target_span = [None]

    def apply(d: Default) -> Default:
        target_span[0] = d.span
        excs = list(d.exceptions)
        if op.kind == "remove":
            k = min(max(1, op.count), len(excs))
            for _ in range(k):
                excs.pop(rng.randrange(len(excs)))
            return Default(tuple(excs), d.just, d.cons, span=d.span)
        if op.kind == "duplicate":
            i = rng.randrange(len(excs))
            excs.insert(i, excs[i])
            return Default(tuple(excs), d.just, d.cons, span=d.span)
        if op.kind == "negate":
            return Default(d.exceptions, Not(d.just, span=d.just.span), d.cons,
                           span=d.span)
        raise ValueError(f"unknown mutation op {op.kind!r}")

    mutated = _replace_default(program, target, apply)
    return Mutant(program, mutated, op, scope_name, target, target_span[0], seed)


def input_grid(scope: Scope, int_bounds: tuple = (-8, 8),
               limit: int = 4096) -> Optional[list]:
    """All input environments over finite domains, or None when a domain is
    not finitely enumerable (money, rationals, structs) or the grid exceeds
    the limit."""
    axes = []
    for name, ty in scope.inputs:
        if ty == BOOL:
            axes.append([(name, VBool(False)), (name, VBool(True))])
        elif isinstance(ty, EnumT):
            if any(p is not None for _, p in ty.variants):
                return None
            axes.append([(name, VEnum(ty.name, v)) for v in ty.variant_names()])
        elif ty == INT:
            lo, hi = int_bounds
            axes.append([(name, VInt(i)) for i in range(lo, hi + 1)])
        else:
            return None
    size = 1
    for a in axes:
        size *= len(a)
        if size > limit:
            return None
    return [dict(combo) for combo in itertools.product(*axes)]


def _outcome_class(outcome: Outcome):
    if outcome.kind is OutcomeKind.VALUE:
        return ("value", outcome.outputs)
    return (outcome.kind.value,)


def screen_mutant(mutant: Mutant, limit: int = 4096) -> Optional[bool]:
    """Grid-check whether the mutation manifests: some valid input where the
    mutant yields empty/conflict and the base does not.  None when the input
    space is not enumerable at this size."""
    scope = mutant.base.scope(mutant.scope)
    grid = input_grid(scope, limit=limit)
    if grid is None:
        return None
    for inputs in grid:
        base = run_scope(mutant.base, mutant.scope, inputs)
        if base.kind is OutcomeKind.PRECONDITION:
            continue
        got = run_scope(mutant.program, mutant.scope, inputs)
        if got.kind in (OutcomeKind.EMPTY, OutcomeKind.CONFLICT) and \
                _outcome_class(got) != _outcome_class(base):
            return True
    return False


@dataclass
class MutantReport:
    op: str
    seed: int
    target_index: int
    found: bool
    witness: Optional[dict] = None
    iterations: int = 0
    elapsed: float = 0.0
    note: str = ""


@dataclass
class CampaignReport:
    mutants: list
    attempted: int

    @property
    def found(self) -> int:
        return sum(1 for m in self.mutants if m.found)


def find_issue(mutant: Mutant, config: Optional[ExploreConfig] = None) -> MutantReport:
    """Explore the mutant; found when an empty/conflict testcase's inputs
    give a different outcome on the base program."""
    config = config or ExploreConfig()
    start = time.monotonic()
    suite = explore(mutant.program, mutant.scope, config)
    elapsed = time.monotonic() - start
    for tc in suite.testcases:
        if tc.outcome.kind in (OutcomeKind.EMPTY, OutcomeKind.CONFLICT):
            base = run_scope(mutant.base, mutant.scope, tc.inputs)
            if _outcome_class(base) != _outcome_class(tc.outcome):
                return MutantReport(mutant.op.kind, mutant.seed,
                                    mutant.target_index, True, dict(tc.inputs),
                                    suite.stats.iterations, elapsed)
    note = "" if suite.complete else "budget exhausted"
    return MutantReport(mutant.op.kind, mutant.seed, mutant.target_index,
                        False, None, suite.stats.iterations, elapsed, note)


def mutation_campaign(program: Program, count: int, ops: tuple = ("remove", "duplicate", "negate"),
                      seed: int = 0, config: Optional[ExploreConfig] = None,
                      screen: bool = True) -> CampaignReport:
    """Generate `count` screened-reachable mutants (drawing fresh seeds when
    screening rejects one) and run the engine on each.  Deterministic for a
    given (program, ops, seed)."""
    rng = random.Random(seed)
    reports = []
    attempted = 0
    cap = max(20 * count, 100)
    while len(reports) < count and attempted < cap:
        op_kind = ops[attempted % len(ops)]
        op = MutationOp(op_kind, count=1 + rng.randrange(2)) \
            if op_kind == "remove" else MutationOp(op_kind)
        mseed = rng.randrange(1 << 30)
        attempted += 1
        try:
            mutant = mutate(program, op, mseed)
        except NoEligibleDefaultTerm:
            continue
        if screen:
            reachable = screen_mutant(mutant)
            if reachable is not True:
                continue
        reports.append(find_issue(mutant, config))
    return CampaignReport(reports, attempted)
