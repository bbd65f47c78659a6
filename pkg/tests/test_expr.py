import math

import pytest
from hypothesis import given, strategies as st

from deltabk.autodiff import Dual, primal
from deltabk.commons import DomainError, ExpressionSyntaxError, UnboundVariableError
from deltabk.expr import (
    Add,
    Apply,
    Binary,
    Div,
    Mul,
    Neg,
    Number,
    Pow,
    Sub,
    Variable,
    compile_expression,
    evaluate,
    free_variables,
    parse,
    to_text,
)

H2 = "-E*x2 + F*Pm0 + Vs*G_gen*eq0*sin(d0 + x1)"


# ---------- Parsing ----------


def test_leading_minus_applies_to_whole_product():
    assert parse("-E*x2") == Neg(Mul(Variable("E"), Variable("x2")))


def test_generator_component_tree():
    tree = parse(H2)
    assert isinstance(tree, Binary) and tree.op == "+"
    assert tree.right == Mul(
        Mul(Mul(Variable("Vs"), Variable("G_gen")), Variable("eq0")),
        Apply("sin", Add(Variable("d0"), Variable("x1"))),
    )


@pytest.mark.parametrize(
    "text, expected",
    [
        ("2^3^2", 512.0),
        ("2^-1", 0.5),
        ("-2^2", -4.0),
        ("10 - 4 - 3", 3.0),
        ("24 / 4 / 2", 3.0),
        ("1 + 2 * 3", 7.0),
        ("(1 + 2) * 3", 9.0),
        ("2 * -3", -6.0),
        (".5e1 + 1.", 6.0),
        ("sqrt(16) + abs(-2) + ln(exp(1))", 7.0),
    ],
)
def test_precedence_and_associativity(text, expected):
    assert evaluate(parse(text), {}) == pytest.approx(expected, rel=1e-15)


def test_functions_are_named():
    assert parse("cot(x1)") == Apply("cot", Variable("x1"))
    # A known function name without parentheses is just an identifier.
    assert parse("sin") == Variable("sin")


@pytest.mark.parametrize(
    "text, offset, fragment",
    [
        ("1 +", 3, "end of input"),
        ("2 * * 3", 4, "unexpected token '*'"),
        ("2 $ 3", 2, "unexpected character '$'"),
        ("(x1 + 1))", 8, "unexpected token ')'"),
        ("x1 + foo(2)", 5, "unknown function 'foo'"),
        ("x1 + 1e999", 5, "number '1e999' is out of range"),
        ("", 0, "end of input"),
    ],
)
def test_syntax_errors_carry_offset(text, offset, fragment):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse(text)
    assert info.value.offset == offset
    assert fragment in str(info.value)


def test_offset_is_counted_in_utf8_bytes():
    # "é" takes two bytes; the error is on the character itself.
    with pytest.raises(ExpressionSyntaxError) as info:
        parse("1 + é")
    assert info.value.offset == 4


def test_syntax_error_lists_expected_tokens():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse("1 +")
    assert "NAME" in info.value.expected or "NUMBER" in info.value.expected


def test_free_variables():
    assert free_variables(parse(H2)) == frozenset(
        {"E", "x2", "F", "Pm0", "Vs", "G_gen", "eq0", "d0", "x1"}
    )
    assert free_variables(parse("1 + sin(2)")) == frozenset()


# ---------- Printing ----------


def test_to_text_parenthesizes_where_needed():
    e = Sub(Variable("a"), Sub(Variable("b"), Variable("c")))
    assert to_text(e) == "a - (b - c)"
    assert parse(to_text(e)) == e


NAMES = st.sampled_from(["x1", "x2", "a", "b_c", "Pm0"])
LEAVES = st.one_of(
    NAMES.map(Variable),
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False).map(Number),
)
TREES = st.recursive(
    LEAVES,
    lambda children: st.one_of(
        st.tuples(st.sampled_from("+-*/^"), children, children).map(
            lambda t: Binary(*t)
        ),
        children.map(Neg),
        st.tuples(st.sampled_from(["sin", "exp", "sqrt"]), children).map(
            lambda t: Apply(*t)
        ),
    ),
    max_leaves=12,
)


@given(TREES)
def test_printed_text_parses_back_to_the_same_tree(tree):
    assert parse(to_text(tree)) == tree


# ---------- Evaluation ----------


def test_evaluate_generator_component():
    bindings = {
        "E": 1.0,
        "F": 1.0,
        "Pm0": 1.0,
        "Vs": 1.0,
        "G_gen": -1.0,
        "eq0": 1.0,
        "d0": math.pi / 3,
        "x1": 0.0,
        "x2": 0.0,
    }
    assert evaluate(parse(H2), bindings) == pytest.approx(
        1.0 - math.sin(math.pi / 3), rel=1e-15
    )


def test_unbound_variable_is_named():
    with pytest.raises(UnboundVariableError) as info:
        evaluate(parse("x1 + k"), {"x1": 1.0})
    assert info.value.name == "k"


@pytest.mark.parametrize(
    "text, x, message",
    [
        ("1 / x1", 0.0, "division by zero"),
        ("ln(x1)", -1.0, "ln of a nonpositive value"),
        ("sqrt(x1)", -4.0, "sqrt of a negative value"),
        ("cot(x1)", 0.0, "cot is undefined where sin = 0"),
        ("x1 ^ 0.5", -1.0, "non-integer power"),
        ("exp(x1)", 1e6, "exp overflow"),
        ("x1 * x1 * x1", 1e200, "non-finite"),
    ],
)
def test_domain_errors_carry_bindings(text, x, message):
    with pytest.raises(DomainError, match=message) as info:
        evaluate(parse(text), {"x1": x})
    assert info.value.values == {"x1": x}


@pytest.mark.parametrize("value", [math.inf, -math.inf, math.nan])
def test_non_finite_binding_is_rejected(value):
    with pytest.raises(DomainError, match="x1 is bound to a non-finite value"):
        evaluate(parse("0 * x1"), {"x1": value})


def test_non_finite_dual_binding_is_rejected():
    with pytest.raises(DomainError, match="non-finite"):
        evaluate(parse("x1"), {"x1": Dual(1.0, math.inf)})


def test_large_literal_round_trips():
    tree = parse("1e308 * x1")
    assert parse(to_text(tree)) == tree


def test_dual_evaluation_matches_float_primal():
    tree = parse("x1^3 * cot(1 + x1) - exp(-x1) / (2 + sin(x1))")
    for x in (-0.7, 0.1, 0.45):
        assert primal(evaluate(tree, {"x1": Dual(x, 1.0)})) == evaluate(
            tree, {"x1": x}
        )


def test_dual_evaluation_gives_derivative():
    value = evaluate(parse("x1^2 + 3*x1"), {"x1": Dual(2.0, 1.0)})
    assert isinstance(value, Dual)
    assert value.value == 10.0
    assert value.deriv == 7.0


def test_compiled_expression_is_callable():
    run = compile_expression(Pow(Div(Variable("a"), Number(2.0)), Number(2.0)))
    assert run({"a": 6.0}) == 9.0
