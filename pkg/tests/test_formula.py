"""
Tests for the closed-form expression evaluator used by golden values.
"""
from __future__ import annotations

import math

import pytest

from core.formula import FormulaError, evaluate_bindings, parse_formula


def test_arithmetic_and_functions() -> None:
    f = parse_formula("sqrt(3)/(1 + sqrt(3))")
    assert f.evaluate({}) == pytest.approx(math.sqrt(3) / (1 + math.sqrt(3)))


def test_names_excludes_functions_and_constants() -> None:
    f = parse_formula("exp(-t*x**4/4)*sin_k + pi")
    assert f.names() == {"t", "x", "sin_k"}


def test_unbound_name_is_reported() -> None:
    with pytest.raises(FormulaError, match="unbound name 'b'"):
        parse_formula("a + b").evaluate({"a": 1.0})


@pytest.mark.parametrize(
    "text",
    [
        "__import__('os')",
        "x.real",
        "x if y else z",
        "[1, 2]",
        "a // b",
        "sqrt(x=1)",
        "'text'",
    ],
)
def test_disallowed_constructs(text: str) -> None:
    with pytest.raises(FormulaError):
        parse_formula(text)


def test_syntax_error() -> None:
    with pytest.raises(FormulaError, match="syntax error"):
        parse_formula("1 +")


def test_sqrt_of_negative_fails_but_tolerates_rounding() -> None:
    assert parse_formula("sqrt(-1e-15)").evaluate({}) == 0.0
    with pytest.raises(FormulaError):
        parse_formula("sqrt(-1)").evaluate({})


def test_division_by_zero_is_a_formula_error() -> None:
    with pytest.raises(FormulaError):
        parse_formula("1/(a - a)").evaluate({"a": 2.0})


def test_special_functions() -> None:
    env = {"x": 0.7, "k": 0.5}
    sn = parse_formula("sn(x, k)").evaluate(env)
    cn = parse_formula("cn(x, k)").evaluate(env)
    dn = parse_formula("dn(x, k)").evaluate(env)
    assert sn ** 2 + cn ** 2 == pytest.approx(1.0)
    assert dn ** 2 + 0.25 * sn ** 2 == pytest.approx(1.0)
    assert parse_formula("K(0)").evaluate({}) == pytest.approx(math.pi / 2)
    assert parse_formula("He(2, x)").evaluate(env) == pytest.approx(0.7 ** 2 - 1)
    assert parse_formula("He(-1, x)").evaluate(env) == 0.0


def test_bindings_see_earlier_bindings() -> None:
    env = evaluate_bindings((("s", "sqrt(1 + 4*F)"), ("r", "-(3 + s)")), {"F": 2.0})
    assert env["s"] == pytest.approx(3.0)
    assert env["r"] == pytest.approx(-6.0)
    assert env["F"] == 2.0
