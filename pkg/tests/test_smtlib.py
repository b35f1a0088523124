import subprocess
import sys
from fractions import Fraction

import pytest

from defcalc.lang import BOOL, INT, MONEY, RAT, EnumT, VBool, VInt, VMoney, VRat
from defcalc.smtlib import ExternalSolver, emit_smtlib, parse_model, parse_sexprs
from defcalc.solver import Query, Sat, SolverSession, Unsat
from defcalc.symbolic import (
    Leaf, SymBin, SymConst, SymIsVariant, SymNot, SymRound, SymVar,
)


def q_simple():
    return Query((Leaf("x", INT),),
                 (SymBin(">", SymVar("x", INT), SymConst(VInt(0))),))


def test_emission_declares_and_asserts():
    text = emit_smtlib(q_simple())
    assert "(declare-const x Int)" in text
    assert "(assert (> x 0))" in text
    assert "(check-sat)" in text and "(get-model)" in text


def test_round_definition_present_iff_used():
    text = emit_smtlib(q_simple())
    assert "dfc_round" not in text
    q = Query((Leaf("x", INT),),
              (SymBin("=", SymRound(SymBin("*", SymVar("x", INT),
                                           SymConst(VRat(Fraction(1, 5))))),
                      SymConst(VInt(2))),))
    text = emit_smtlib(q)
    assert "(define-fun dfc_round ((q Real)) Int" in text
    assert "to_int" in text


def test_worked_example_query_emission():
    q = Query((Leaf("b", BOOL), Leaf("x", INT)),
              (SymVar("b", BOOL), SymBin("=", SymVar("x", INT), SymConst(VInt(0)))))
    text = emit_smtlib(q)
    assert "(declare-const b Bool)" in text
    assert "(declare-const x Int)" in text
    assert "(assert b)" in text
    assert "(assert (= x 0))" in text


def test_enum_emitted_as_datatype():
    zone = EnumT("Zone", (("A", None), ("B", None)))
    q = Query((Leaf("z", zone),),
              (SymIsVariant(SymVar("z", zone), "A"),))
    text = emit_smtlib(q)
    assert "(declare-datatypes ((Zone 0)) (((A) (B))))" in text
    assert "(assert ((_ is A) z))" in text


def test_money_and_dotted_names():
    q = Query((Leaf("h.income", MONEY),),
              (SymBin(">=", SymVar("h.income", MONEY), SymConst(VMoney(100))),))
    text = emit_smtlib(q)
    assert "(declare-const |h.income| Int)" in text


def test_int_real_mixing_inserts_to_real():
    q = Query((Leaf("x", INT), Leaf("r", RAT)),
              (SymBin("<", SymVar("x", INT), SymVar("r", RAT)),))
    text = emit_smtlib(q)
    assert "(to_real x)" in text


def test_sexpr_parser():
    nodes = parse_sexprs("(model (define-fun x () Int (- 3)))")
    assert nodes == [["model", ["define-fun", "x", [], "Int", ["-", "3"]]]]


def test_model_parsing_covers_sorts():
    zone = EnumT("Zone", (("A", None), ("B", None)))
    q = Query((Leaf("x", INT), Leaf("m", MONEY), Leaf("r", RAT),
               Leaf("b", BOOL), Leaf("z", zone)), ())
    reply = """
    ( (define-fun x () Int (- 7))
      (define-fun m () Int 1000001)
      (define-fun r () Real (/ 21 2))
      (define-fun b () Bool true)
      (define-fun z () Zone B) )
    """
    model = parse_model(reply, q)
    assert model["x"] == VInt(-7)
    assert model["m"] == VMoney(1000001)
    assert model["r"] == VRat(Fraction(21, 2))
    assert model["b"] == VBool(True)
    assert model["z"].variant == "B"


def test_missing_defs_fall_back_to_defaults():
    q = Query((Leaf("x", INT),), ())
    model = parse_model("( )", q)
    assert model["x"] == VInt(0)


# -- external backend through the bundled shim ---------------------------------


@pytest.fixture(scope="module")
def shim(scripts_dir):
    return ExternalSolver(f"{sys.executable} {scripts_dir / 'smtlib_solve.py'}")


def test_shim_agrees_with_builtin_on_sat(shim):
    q = Query((Leaf("b", BOOL), Leaf("x", INT)),
              (SymVar("b", BOOL), SymBin("=", SymVar("x", INT), SymConst(VInt(0)))))
    res = shim.check(q)
    assert isinstance(res, Sat)
    assert res.model["b"] == VBool(True)
    assert res.model["x"] == VInt(0)


def test_shim_agrees_with_builtin_on_unsat(shim):
    lit = SymBin(">", SymVar("x", INT), SymConst(VInt(0)))
    q = Query((Leaf("x", INT),), (lit, SymNot(lit)))
    assert isinstance(shim.check(q), Unsat)


def test_shim_handles_round_and_money(shim):
    q = Query((Leaf("m", MONEY),),
              (SymBin("=", SymRound(SymBin("*", SymVar("m", MONEY),
                                           SymConst(VRat(Fraction(1, 5))))),
                      SymConst(VInt(200000))),
               SymBin(">", SymVar("m", MONEY), SymConst(VMoney(0)))))
    res = shim.check(q)
    assert isinstance(res, Sat)
    cents = res.model["m"].cents
    from defcalc.interp import round_rat
    assert round_rat(Fraction(cents, 5)) == 200000


def test_external_failure_raises(tmp_path):
    from defcalc.solver import SolverFailure
    bad = ExternalSolver(f"{sys.executable} -c 'import sys; sys.exit(3)'")
    with pytest.raises(SolverFailure):
        bad.check(q_simple())
