import pytest

from defcalc.lang import (
    BOOL, INT, MONEY, RAT,
    BinOp, Binding, Call, Default, EnumT, Function, Let, Lit, Program, Scope,
    StructT, Var, VBool, VInt, VMoney, free_input_vars, validate,
)


def test_enum_variants_must_be_unique():
    with pytest.raises(ValueError):
        EnumT("E", (("A", None), ("A", None)))
    with pytest.raises(ValueError):
        EnumT("E", ())


def test_struct_fields_must_be_unique():
    with pytest.raises(ValueError):
        StructT("S", (("f", INT), ("f", BOOL)))


def test_validate_running_example_is_clean(income_tax):
    assert validate(income_tax) == []


def test_validate_is_pure_and_idempotent(income_tax):
    assert validate(income_tax) == validate(income_tax)


def test_default_with_int_justification_is_type_error():
    bad = Default((), Lit(VInt(1)), Lit(VInt(2)))
    prog = Program(scopes=(Scope("S", (), (), (Binding("y", INT, bad),), ("y",)),))
    errors = validate(prog)
    assert any("justification" in e.message for e in errors)


def test_recursive_function_is_rejected():
    f = Function("f", (("n", INT),), INT, Call("f", (Var("n"),)))
    prog = Program(functions=(f,))
    errors = validate(prog)
    assert any("recursion" in e.message for e in errors)


def test_call_cycle_between_functions_is_rejected():
    f = Function("f", (("n", INT),), INT, Call("g", (Var("n"),)))
    g = Function("g", (("n", INT),), INT, BinOp("+", Var("n"), Lit(VInt(1))))
    # f calls g declared later: the declaration order induces the acyclicity
    prog = Program(functions=(f, g))
    errors = validate(prog)
    assert any("acyclic" in e.message for e in errors)
    assert validate(Program(functions=(g, f))) == []


def test_unbound_variable_reported():
    prog = Program(scopes=(Scope(
        "S", (("x", INT),), (), (Binding("y", INT, Var("z")),), ("y",)),))
    errors = validate(prog)
    assert any("unbound" in e.message for e in errors)


def test_assertions_must_only_mention_inputs():
    sc = Scope("S", (("x", INT),), (BinOp(">", Var("y"), Lit(VInt(0))),),
               (Binding("y", INT, Var("x")),), ("y",))
    errors = validate(Program(scopes=(sc,)))
    assert any("non-input" in e.message for e in errors)


def test_binop_money_typing():
    sc = Scope("S", (("m", MONEY),), (),
               (Binding("y", MONEY, BinOp("+", Var("m"), Lit(VInt(1)))),), ("y",))
    errors = validate(Program(scopes=(sc,)))
    assert errors, "money + int must not type-check"


# -- free_input_vars -------------------------------------------------------


def test_free_input_vars_of_running_example_rate(income_tax):
    scope = income_tax.scope("IncomeTax")
    rate = scope.bindings[0].expr
    assert free_input_vars(rate, scope) == {"income", "nb_children"}


def test_free_input_vars_literal_is_empty(income_tax):
    scope = income_tax.scope("IncomeTax")
    assert free_input_vars(Lit(VMoney(0)), scope) == set()


def test_free_input_vars_let_shadowing():
    scope = Scope("S", (("x", INT), ("y", INT)), (), (), ())
    expr = Let("y", Var("x"), Var("y"))
    assert free_input_vars(expr, scope) == {"x"}


def test_free_input_vars_expand_bindings_transitively(income_tax):
    scope = income_tax.scope("IncomeTax")
    tax = scope.bindings[1].expr  # income * tax_rate
    assert free_input_vars(tax, scope) == {"income", "nb_children"}


def test_free_input_vars_subset_of_inputs(income_tax):
    scope = income_tax.scope("IncomeTax")
    declared = {n for n, _ in scope.inputs}
    for b in scope.bindings:
        assert free_input_vars(b.expr, scope) <= declared
