"""
Closed-form golden expressions.

Golden values are stored as small arithmetic expressions over preset
parameters (and x for wavefunctions), parsed with the ``ast`` module and
evaluated against a namespace. Only numbers, names, + − * / ** and a fixed
set of functions are accepted.
"""
from __future__ import annotations

import ast
import logging
import math
from dataclasses import dataclass
from typing import Callable, Mapping

from scipy import special

logger = logging.getLogger(__name__)


class FormulaError(Exception):
    """Raised for expressions outside the accepted grammar or failing to evaluate."""


def _sqrt(v: float) -> float:
    if v < 0:
        if v > -1e-12:
            return 0.0
        raise FormulaError(f"sqrt of negative value {v}")
    return math.sqrt(v)


def _jacobi(index: int) -> Callable[[float, float], float]:
    def fn(x: float, k: float) -> float:
        return float(special.ellipj(x, k * k)[index])

    return fn


def _hermite_e(n: float, x: float) -> float:
    """Probabilists' Hermite polynomial; zero for negative degree."""
    if n < 0:
        return 0.0
    return float(special.eval_hermitenorm(int(n), x))


FUNCTIONS: dict[str, Callable[..., float]] = {
    "sqrt": _sqrt,
    "exp": math.exp,
    "log": math.log,
    "abs": abs,
    "sign": lambda v: math.copysign(1.0, v) if v != 0 else 0.0,
    "sn": _jacobi(0),
    "cn": _jacobi(1),
    "dn": _jacobi(2),
    "K": lambda k: float(special.ellipk(k * k)),
    "He": _hermite_e,
}

CONSTANTS = {"pi": math.pi}

_BINOPS: dict[type, Callable[[float, float], float]] = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a ** b,
}


def _check(node: ast.AST, text: str) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, text)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise FormulaError(f"operator {type(node.op).__name__} not allowed in {text!r}")
        _check(node.left, text)
        _check(node.right, text)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.UAdd, ast.USub)):
            raise FormulaError(f"unary {type(node.op).__name__} not allowed in {text!r}")
        _check(node.operand, text)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise FormulaError(f"unknown function in {text!r}")
        if node.keywords:
            raise FormulaError(f"keyword arguments not allowed in {text!r}")
        for arg in node.args:
            _check(arg, text)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise FormulaError(f"constant {node.value!r} not allowed in {text!r}")
    elif isinstance(node, ast.Name):
        return
    else:
        raise FormulaError(f"{type(node).__name__} not allowed in {text!r}")


@dataclass(frozen=True)
class Formula:
    text: str
    tree: ast.Expression

    def names(self) -> set[str]:
        return {
            n.id for n in ast.walk(self.tree)
            if isinstance(n, ast.Name) and n.id not in FUNCTIONS and n.id not in CONSTANTS
        }

    def evaluate(self, namespace: Mapping[str, float]) -> float:
        try:
            return float(self._eval(self.tree.body, namespace))
        except FormulaError:
            raise
        except (ArithmeticError, ValueError, TypeError) as e:
            raise FormulaError(f"cannot evaluate {self.text!r}: {e}") from e

    def _eval(self, node: ast.AST, ns: Mapping[str, float]) -> float:
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, ns), self._eval(node.right, ns))
        if isinstance(node, ast.UnaryOp):
            value = self._eval(node.operand, ns)
            return -value if isinstance(node.op, ast.USub) else value
        if isinstance(node, ast.Call):
            assert isinstance(node.func, ast.Name)
            return FUNCTIONS[node.func.id](*(self._eval(a, ns) for a in node.args))
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in ns:
                return float(ns[node.id])
            if node.id in CONSTANTS:
                return CONSTANTS[node.id]
            raise FormulaError(f"unbound name {node.id!r} in {self.text!r}")
        raise FormulaError(f"{type(node).__name__} not allowed in {self.text!r}")


def parse_formula(text: str) -> Formula:
    """
    Parse an expression such as ``"sqrt(3)/(1+sqrt(3))"``.

    Raises:
        FormulaError: on syntax errors or disallowed constructs.
    """
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as e:
        raise FormulaError(f"syntax error in {text!r}: {e.msg}") from e
    _check(tree, text)
    return Formula(text=text, tree=tree)


def evaluate_bindings(
    bindings: tuple[tuple[str, str], ...], namespace: Mapping[str, float]
) -> dict[str, float]:
    """Evaluate ``name = expr`` bindings in order; later ones see earlier ones."""
    env = dict(namespace)
    for name, text in bindings:
        env[name] = parse_formula(text).evaluate(env)
    return env
