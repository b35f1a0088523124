"""Depth-first concolic exploration.

One iteration runs the scope concolically, records the branch trail, then
negates the deepest not-yet-negated non-trivial record and asks the solver
for an input satisfying the prefix plus the negation.  SAT continues the
descent with the model; UNSAT backtracks to the next shallower record.  Only
the last explored path is kept, with a per-position negated-already flag.

Scope assertions contribute hard prefix records that are conjoined to every
query through the prefix and are never negated; when the starting input
itself violates an assertion, the explorer first solves the assertion system
to bootstrap a valid input.

The early-conflict option breaks the prefix invariant by design; when the
observed path diverges from the expected prefix, bookkeeping restarts from
the longest common prefix and already-seen paths are deduplicated by
fingerprint.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .lang import MONEY, Program, validate
from .interp import Outcome, OutcomeKind
from .concolic import (
    BranchRecord, ConcolicOpts, Origin, run_scope_concolic,
)
from .solver import (
    DEFAULT_BUDGET, Sat, SolverFailure, SolverSession, Unknown, Unsat,
    simplify,
)
from .symbolic import (
    FALSE, TRUE, default_value, inputs_of_leaf_env,
    leaf_env_of_inputs, render, scope_leaves, sym_not,
)
from . import transforms


class BudgetExceeded(Exception):
    pass


class PrefixInvariantViolation(Exception):
    pass


OPT_NAMES = ("lazy", "folding", "trivial", "reorder", "frontend",
             "early-error", "soft")


@dataclass
class ExploreConfig:
    initial: dict = field(default_factory=dict)  # input name -> Value hints
    lazy: bool = False
    folding: bool = False
    trivial: bool = False
    reorder: bool = False
    frontend: bool = False
    early_error: bool = False
    soft: bool = False
    incremental: bool = True
    max_iters: int = 10_000
    timeout: Optional[float] = None
    solver_budget: int = DEFAULT_BUDGET
    backend: object = None  # None for builtin, else an ExternalSolver
    on_query: Optional[Callable] = None
    progress: Optional[Callable] = None

    @classmethod
    def from_opt_names(cls, names, **kw) -> "ExploreConfig":
        unknown = set(names) - set(OPT_NAMES)
        if unknown:
            raise ValueError(f"unknown optimization names: {sorted(unknown)}")
        flags = {n.replace("-", "_"): True for n in names}
        return cls(**flags, **kw)

    def opt_names(self) -> list:
        return [n for n in OPT_NAMES if getattr(self, n.replace("-", "_"))]


@dataclass
class Testcase:
    scope: str
    inputs: dict  # input name -> Value
    outcome: Outcome
    path: tuple  # tuple[BranchRecord, ...]
    soft_tier: Optional[str]
    iteration: int

    @property
    def path_fp(self) -> str:
        return path_fingerprint(self.path)


@dataclass
class SuiteStats:
    iterations: int = 0
    tests: int = 0
    conflicts: int = 0
    empties: int = 0
    solver_calls: int = 0
    sat: int = 0
    unsat: int = 0
    unknown: int = 0
    solver_failures: int = 0
    pushes: int = 0
    pops: int = 0


@dataclass
class TestSuite:
    scope: str
    testcases: list
    stats: SuiteStats
    complete: bool
    opts: list
    depth_trace: list  # |path| per iteration, mirrors incremental stack use


def path_fingerprint(path) -> str:
    text = ";".join(
        f"{render(r.constraint)}#{int(r.taken)}" for r in path)
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class _Entry:
    record: BranchRecord
    done: bool = False


class Frontier:
    """The last explored path with per-position negation bookkeeping."""

    def __init__(self):
        self.entries: list = []

    def reconcile(self, path: list, early_error: bool) -> None:
        """Match the new path against the expected prefix and absorb the new
        suffix.  Divergence raises unless the early-conflict rule is on, in
        which case bookkeeping restarts from the longest common prefix."""
        n = min(len(self.entries), len(path))
        diverged = None
        for i in range(n):
            if self.entries[i].record.constraint != path[i].constraint:
                diverged = i
                break
        if diverged is None and len(path) < len(self.entries):
            diverged = len(path)
        if diverged is not None:
            if not early_error:
                raise PrefixInvariantViolation(
                    f"path diverged from expected prefix at depth {diverged}")
            del self.entries[diverged:]
        for rec in path[len(self.entries):]:
            self.entries.append(_Entry(rec))

    def next_target(self, trivial_filter: bool) -> Optional[int]:
        """Deepest record not yet negated and eligible for negation."""
        for k in range(len(self.entries) - 1, -1, -1):
            e = self.entries[k]
            if e.done:
                continue
            if e.record.hard:
                e.done = True
                continue
            if trivial_filter and not filter_trivial(
                    e.record, [x.record for x in self.entries[:k]]):
                e.done = True
                continue
            return k
        return None

    def flip(self, k: int) -> None:
        flipped = self.entries[k].record.negated()
        del self.entries[k:]
        self.entries.append(_Entry(flipped, done=True))

    def prefix_literals(self, k: int) -> list:
        return [e.record.constraint for e in self.entries[:k]]


def filter_trivial(record: BranchRecord, earlier: list) -> bool:
    """Keep-for-negation predicate: False when the constraint mentions no
    input, simplifies to a boolean constant, or repeats an earlier record's
    literal (negating it would contradict the prefix)."""
    if record.trivial:
        return False
    s = simplify(record.constraint)
    if s in (TRUE, FALSE):
        return False
    mine = render(s)
    for r in earlier:
        if render(simplify(r.constraint)) == mine:
            return False
    return True


def initial_inputs(scope, hints: dict) -> dict:
    inputs = {}
    for name, ty in scope.inputs:
        inputs[name] = hints.get(name, default_value(ty))
    return inputs


def tier_of_inputs(leaf_env: dict, money_leaves: list) -> Optional[str]:
    from .solver import SOFT_TIERS
    if not money_leaves:
        return None
    for tier_name, unit in SOFT_TIERS:
        if all(leaf_env[m].cents % unit == 0 for m in money_leaves):
            return tier_name
    return None


def _prepare(program: Program, scope_name: str, config: ExploreConfig) -> Program:
    if config.frontend:
        program = transforms.simplify_frontend(program)[0]
    if config.folding:
        program = transforms.fold_program(program)[0]
    if config.reorder:
        program = transforms.reorder_program(program)[0]
    return program


def explore(program: Program, scope_name: str,
            config: ExploreConfig = ExploreConfig()) -> TestSuite:
    """Exhaustively explore a scope's paths (finite for loop-free programs),
    one testcase per executed input."""
    errors = validate(program)
    if errors:
        raise ValueError(f"program does not validate: {errors[0].message}")
    work = _prepare(program, scope_name, config)
    scope = work.scope(scope_name)
    leaves = scope_leaves(scope)
    money_leaves = [l.name for l in leaves if l.ty == MONEY]

    copts = ConcolicOpts(lazy=config.lazy, early_error=config.early_error)
    stats = SuiteStats()
    suite = TestSuite(scope_name, [], stats, complete=True,
                      opts=config.opt_names(), depth_trace=[])

    def make_session() -> SolverSession:
        s = SolverSession(leaves, backend=config.backend,
                          budget=config.solver_budget, on_query=config.on_query)
        s.retain = retain
        return s

    inputs = initial_inputs(scope, config.initial)
    retain = leaf_env_of_inputs(scope, inputs)
    session = make_session()

    # Bootstrap past assertion-violating starting inputs.
    inputs, ok = _bootstrap(work, scope, inputs, session, copts, stats, suite)
    if not ok:
        _sync_stats(stats, session)
        return suite

    frontier = Frontier()
    seen_fps = set()
    tier = tier_of_inputs(leaf_env_of_inputs(scope, inputs), money_leaves) \
        if config.soft else None
    deadline = None if config.timeout is None else time.monotonic() + config.timeout

    while True:
        if stats.iterations >= config.max_iters or \
                (deadline is not None and time.monotonic() > deadline):
            suite.complete = False
            break
        outcome, path = run_scope_concolic(work, scope_name, inputs, copts)
        stats.iterations += 1
        suite.depth_trace.append(len(path))

        if outcome.kind is not OutcomeKind.PRECONDITION:
            fp = path_fingerprint(path)
            if fp not in seen_fps:
                seen_fps.add(fp)
                tc = Testcase(scope_name, dict(inputs), outcome, tuple(path),
                              tier, stats.iterations)
                suite.testcases.append(tc)
                stats.tests += 1
                if outcome.kind is OutcomeKind.CONFLICT:
                    stats.conflicts += 1
                elif outcome.kind is OutcomeKind.EMPTY:
                    stats.empties += 1
            frontier.reconcile(path, config.early_error)
        else:
            # Post-bootstrap precondition violations only happen when an
            # external solver returns models violating hard records; note
            # the incompleteness and backtrack on the previous frontier.
            suite.complete = False

        found_next = False
        while True:
            k = frontier.next_target(config.trivial)
            if k is None:
                break
            prefix = frontier.prefix_literals(k)
            negation = sym_not(frontier.entries[k].record.constraint)
            try:
                res = _query(session, config, prefix, negation, money_leaves,
                             make_session)
            except SolverFailure:
                stats.solver_failures += 1
                suite.complete = False
                frontier.entries[k].done = True
                continue
            if isinstance(res, Sat):
                inputs = inputs_of_leaf_env(scope, dict(res.model))
                tier = res.tier if config.soft else None
                frontier.flip(k)
                found_next = True
                break
            if isinstance(res, Unknown):
                suite.complete = False
            frontier.entries[k].done = True
        if config.progress is not None:
            config.progress(stats.iterations, "sat" if found_next else "unsat",
                            len(path), stats.tests)
        if not found_next:
            break

    _sync_stats(stats, session)
    return suite


def _query(session: SolverSession, config: ExploreConfig, prefix: list,
           negation, money_leaves: list, make_session):
    if config.incremental:
        _sync_frames(session, prefix)
        session.push([negation])
        try:
            if config.soft and money_leaves:
                return session.check_soft(money_leaves)
            return session.check()
        finally:
            session.pop()
    fresh = make_session()
    fresh.push(prefix + [negation])
    try:
        if config.soft and money_leaves:
            return fresh.check_soft(money_leaves)
        return fresh.check()
    finally:
        session.stats.checks += fresh.stats.checks
        session.stats.sat += fresh.stats.sat
        session.stats.unsat += fresh.stats.unsat
        session.stats.unknown += fresh.stats.unknown


def _sync_frames(session: SolverSession, prefix: list) -> None:
    """Mirror the DFS prefix on the incremental stack: one frame per branch
    record, popped and pushed as the flip point moves."""
    common = 0
    for frame, lit in zip(session.frames, prefix):
        if len(frame) == 1 and frame[0] == lit:
            common += 1
        else:
            break
    while session.depth > common:
        session.pop()
    for lit in prefix[common:]:
        session.push([lit])


def _bootstrap(work: Program, scope, inputs: dict, session: SolverSession,
               copts: ConcolicOpts, stats: SuiteStats, suite: TestSuite):
    """Find a starting input satisfying the scope assertions.  Returns
    (inputs, ok); an unsatisfiable assertion system gives ok=False with the
    suite left empty and complete."""
    for _ in range(8):
        outcome, path = run_scope_concolic(work, scope.name, inputs, copts)
        if outcome.kind is not OutcomeKind.PRECONDITION:
            return inputs, True
        required = []
        for rec in path:
            lit = rec.constraint
            if rec.origin is Origin.ASSERTION and not rec.taken:
                lit = sym_not(lit)  # require the assertion to hold
            required.append(lit)
        session.push(required)
        try:
            res = session.check()
        finally:
            session.pop()
        if isinstance(res, Sat):
            inputs = inputs_of_leaf_env(scope, dict(res.model))
            continue
        if isinstance(res, Unsat):
            return inputs, False  # no valid inputs: empty, complete suite
        suite.complete = False
        return inputs, False
    suite.complete = False
    return inputs, False


def _sync_stats(stats: SuiteStats, session: SolverSession) -> None:
    stats.solver_calls = session.stats.checks
    stats.sat = session.stats.sat
    stats.unsat = session.stats.unsat
    stats.unknown = session.stats.unknown
    stats.pushes = session.stats.pushes
    stats.pops = session.stats.pops
