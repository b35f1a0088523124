import random

import pytest

from defcalc.lang import (
    BOOL, INT,
    BinOp, Binding, Default, If, Let, Lit, Match, MatchArm, Not, Program,
    Scope, Var, VBool, VEmpty, VInt, validate,
)
from defcalc.interp import OutcomeKind, run_scope
from defcalc.concolic import ConcolicOpts, run_scope_concolic
from defcalc.transforms import (
    fold_match_cases, fold_program, reorder_exceptions, reorder_program,
    simplify_frontend, simplify_frontend_expr,
)

from genutil import enumerate_inputs, gen_scope_program


def rule(j, c):
    return Default((), j, c)


# -- match folding -----------------------------------------------------------


def test_nine_variant_match_folds_to_two_arms(geo_match):
    scope = geo_match.scope("Housing")
    match = scope.bindings[0].expr
    folded, report = fold_match_cases(match)
    assert len(folded.arms) == 2
    assert report.arms_folded == 7
    true_arm = folded.arms[0]
    assert true_arm.variants == ("Mainland", "Corsica")
    false_arm = folded.arms[1]
    assert len(false_arm.variants) == 7


def test_distinct_bodies_unchanged():
    arms = tuple(MatchArm((v,), None, Lit(VInt(i)))
                 for i, v in enumerate(["A", "B", "C"]))
    m = Match(Var("k"), arms)
    folded, report = fold_match_cases(m)
    assert folded == m
    assert report.arms_folded == 0


def test_total_fold_gives_single_wildcard():
    arms = tuple(MatchArm((v,), None, Lit(VInt(1))) for v in ["A", "B", "C"])
    folded, report = fold_match_cases(Match(Var("k"), arms))
    assert len(folded.arms) == 1
    assert folded.arms[0].variants is None


def test_payload_binder_used_blocks_folding():
    arms = (MatchArm(("A",), "p", BinOp("+", Var("p"), Lit(VInt(1)))),
            MatchArm(("B",), "q", BinOp("+", Var("q"), Lit(VInt(1)))),
            MatchArm(("C",), None, Lit(VInt(0))))
    folded, report = fold_match_cases(Match(Var("k"), arms))
    assert report.arms_folded == 0


def test_unused_binder_folds_by_alpha_equivalence():
    arms = (MatchArm(("A",), "p", Lit(VInt(1))),
            MatchArm(("B",), "q", Lit(VInt(1))),
            MatchArm(("C",), None, Lit(VInt(0))))
    folded, _ = fold_match_cases(Match(Var("k"), arms))
    assert len(folded.arms) == 2
    assert folded.arms[0].variants == ("A", "B")
    assert folded.arms[0].binder is None


def test_folding_preserves_semantics(geo_match):
    folded, _ = fold_program(geo_match)
    assert validate(folded) == []
    for inputs in enumerate_inputs(geo_match.scope("Housing")):
        assert run_scope(folded, "Housing", inputs) == \
            run_scope(geo_match, "Housing", inputs)


def test_folding_idempotent(geo_match):
    once, _ = fold_program(geo_match)
    twice, rep = fold_program(once)
    assert twice == once and rep.arms_folded == 0


# -- exception reordering --------------------------------------------------------


def _scope_with(inputs, term):
    return Scope("S", tuple(inputs), (), (Binding("out", INT, term),), ("out",))


def test_reorder_groups_by_free_vars():
    term = Default((
        rule(BinOp(">", Var("a"), Lit(VInt(0))), Lit(VInt(1))),
        rule(BinOp(">", Var("b"), Lit(VInt(0))), Lit(VInt(2))),
        rule(BinOp("<", Var("a"), Lit(VInt(0))), Lit(VInt(3))),
    ), Lit(VBool(True)), Lit(VInt(0)))
    scope = _scope_with([("a", INT), ("b", INT)], term)
    out, report = reorder_exceptions(term, scope)
    assert report.exceptions_regrouped == 1
    # {a} group first (lexicographic), original order within the group kept
    assert out.exceptions[0] == term.exceptions[0]
    assert out.exceptions[1] == term.exceptions[2]
    assert out.exceptions[2] == term.exceptions[1]


def test_reorder_single_exception_unchanged():
    term = Default((rule(Var("p"), Lit(VInt(1))),), Lit(VBool(True)), Lit(VInt(0)))
    scope = _scope_with([("p", BOOL)], term)
    out, report = reorder_exceptions(term, scope)
    assert out == term and report.exceptions_regrouped == 0


def test_reorder_running_example_already_grouped(income_tax):
    scope = income_tax.scope("IncomeTax")
    term = scope.bindings[0].expr
    out, report = reorder_exceptions(term, scope)
    assert out == term
    assert report.exceptions_regrouped == 0


def test_reorder_preserves_results_by_order_independence():
    rng = random.Random(808)
    for _ in range(30):
        prog = gen_scope_program(rng)
        re_prog, _ = reorder_program(prog)
        assert validate(re_prog) == []
        for inputs in list(enumerate_inputs(prog.scopes[0]))[::7]:
            assert run_scope(prog, "Rand", inputs) == \
                run_scope(re_prog, "Rand", inputs)


# -- frontend simplification ------------------------------------------------------


def test_trivial_default_true_becomes_consequence():
    e, report = simplify_frontend_expr(rule(Lit(VBool(True)), Lit(VInt(42))))
    assert e == Lit(VInt(42))
    assert report.defaults_simplified == 1


def test_trivial_default_false_becomes_empty_marker():
    e, _ = simplify_frontend_expr(rule(Lit(VBool(False)), Lit(VInt(1))))
    assert e == Lit(VEmpty())


def test_if_true_partial_evaluation():
    e, _ = simplify_frontend_expr(If(Lit(VBool(True)), Var("a"), Var("b")))
    assert e == Var("a")


def test_default_with_exception_not_simplified():
    term = Default((rule(Lit(VBool(True)), Lit(VInt(1))),),
                   Lit(VBool(True)), Lit(VInt(2)))
    e, _ = simplify_frontend_expr(term)
    assert isinstance(e, Default)
    assert len(e.exceptions) == 1


def test_false_conjunction_folds_only_when_total():
    total = BinOp("&&", Lit(VBool(False)), BinOp(">", Var("x"), Lit(VInt(0))))
    e, _ = simplify_frontend_expr(total)
    assert e == Lit(VBool(False))
    failing = BinOp("&&", Lit(VBool(False)),
                    BinOp("=", BinOp("/", Lit(VInt(1)), Var("x")), Lit(VInt(1))))
    e, _ = simplify_frontend_expr(failing)
    assert isinstance(e, BinOp) and e.op == "&&"


def test_empty_marker_propagates_in_enclosing_default():
    inner = rule(Lit(VBool(False)), Lit(VInt(7)))
    term = Default((inner,), Lit(VBool(False)), Lit(VInt(3)))
    prog = Program(scopes=(_scope_with([("p", BOOL)], term),))
    simplified, _ = simplify_frontend(prog)
    env = {"p": VBool(False)}
    assert run_scope(prog, "S", env) == run_scope(simplified, "S", env)
    assert run_scope(simplified, "S", env).kind is OutcomeKind.EMPTY


def test_frontend_idempotent(trivial_just):
    once, _ = simplify_frontend(trivial_just)
    twice, rep = simplify_frontend(once)
    assert twice == once
    assert rep.defaults_simplified == 0 and rep.booleans_folded == 0


# -- whole-pass properties -----------------------------------------------------


@pytest.mark.parametrize("pass_fn", [fold_program, reorder_program, simplify_frontend])
def test_passes_preserve_outcomes_on_random_scopes(pass_fn):
    rng = random.Random(909)
    for _ in range(25):
        prog = gen_scope_program(rng)
        out, _ = pass_fn(prog)
        assert validate(out) == []
        for inputs in list(enumerate_inputs(prog.scopes[0]))[::11]:
            assert run_scope(prog, "Rand", inputs) == run_scope(out, "Rand", inputs)


@pytest.mark.parametrize("pass_fn", [fold_program, reorder_program, simplify_frontend])
def test_passes_never_lengthen_the_path(pass_fn):
    rng = random.Random(910)
    for _ in range(15):
        prog = gen_scope_program(rng)
        out, _ = pass_fn(prog)
        for inputs in list(enumerate_inputs(prog.scopes[0]))[::13]:
            o1, p1 = run_scope_concolic(prog, "Rand", inputs)
            o2, p2 = run_scope_concolic(out, "Rand", inputs)
            assert o1 == o2
            assert len(p2) <= len(p1)
