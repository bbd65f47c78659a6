"""
Scalar expression language.

Expressions are parsed once with a Lark LALR grammar into an immutable tree
and evaluated over any scalar that supports arithmetic: plain floats for
simulation, nested `Dual` numbers for differentiation. The grammar is
documented in `docs/EXPRESSIONS.md`.

Precedence, tightest first: `^` (right-associative, a minus right after `^`
negates the exponent), then a leading unary minus, which applies to the
whole product that follows it, then `*` and `/`, then `+` and `-`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Union

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import (
    UnexpectedCharacters,
    UnexpectedEOF,
    UnexpectedInput,
    UnexpectedToken,
    VisitError,
)

from . import autodiff
from .autodiff import Scalar
from .commons import DomainError, ExpressionSyntaxError, UnboundVariableError

GRAMMAR = r"""
    ?start: sum

    ?sum: signed
        | sum "+" signed        -> add
        | sum "-" signed        -> sub

    ?signed: product
        | "-" signed            -> neg

    ?product: power
        | product "*" factor    -> mul
        | product "/" factor    -> div

    ?factor: power
        | "-" factor            -> neg

    ?power: atom
        | atom "^" exponent     -> pow

    ?exponent: power
        | "-" exponent          -> neg

    ?atom: NUMBER               -> number
        | NAME                  -> variable
        | NAME "(" sum ")"      -> call
        | "(" sum ")"

    NUMBER: /(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?/
    NAME: /[A-Za-z_][A-Za-z0-9_]*/

    %import common.WS
    %ignore WS
"""

FUNCTION_NAMES = frozenset(autodiff.FUNCTIONS)


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Binary:
    """Binary operation; `op` is one of `+ - * / ^`."""

    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class Apply:
    func: str
    arg: "Expression"


Expression = Union[Number, Variable, Binary, Neg, Apply]
Bindings = Mapping[str, Scalar]


def Add(left: Expression, right: Expression) -> Binary:
    return Binary("+", left, right)


def Sub(left: Expression, right: Expression) -> Binary:
    return Binary("-", left, right)


def Mul(left: Expression, right: Expression) -> Binary:
    return Binary("*", left, right)


def Div(left: Expression, right: Expression) -> Binary:
    return Binary("/", left, right)


def Pow(left: Expression, right: Expression) -> Binary:
    return Binary("^", left, right)


@v_args(inline=True)
class _TreeBuilder(Transformer[Token, Expression]):
    def number(self, token: Token) -> Expression:
        value = float(token)
        if not math.isfinite(value):
            raise _RejectedToken(
                f"number {str(token)!r} is out of range", token.start_pos or 0
            )
        return Number(value)

    def variable(self, token: Token) -> Expression:
        return Variable(str(token))

    def call(self, name: Token, arg: Expression) -> Expression:
        if str(name) not in FUNCTION_NAMES:
            raise _RejectedToken(
                f"unknown function {str(name)!r}",
                name.start_pos or 0,
                ", ".join(sorted(FUNCTION_NAMES)),
            )
        return Apply(str(name), arg)

    def neg(self, operand: Expression) -> Expression:
        return Neg(operand)

    def add(self, left: Expression, right: Expression) -> Expression:
        return Add(left, right)

    def sub(self, left: Expression, right: Expression) -> Expression:
        return Sub(left, right)

    def mul(self, left: Expression, right: Expression) -> Expression:
        return Mul(left, right)

    def div(self, left: Expression, right: Expression) -> Expression:
        return Div(left, right)

    def pow(self, left: Expression, right: Expression) -> Expression:
        return Pow(left, right)


class _RejectedToken(Exception):
    def __init__(self, message: str, position: int, expected: str = "") -> None:
        super().__init__(message)
        self.message = message
        self.position = position
        self.expected = expected


_PARSER = Lark(GRAMMAR, parser="lalr", propagate_positions=False)

_TERMINAL_TEXT = {
    "PLUS": "'+'",
    "MINUS": "'-'",
    "STAR": "'*'",
    "SLASH": "'/'",
    "CIRCUMFLEX": "'^'",
    "LPAR": "'('",
    "RPAR": "')'",
    "$END": "end of input",
}


def _byte_offset(source: str, position: int) -> int:
    return len(source[:position].encode("utf-8"))


def _describe_expected(names: set[str] | frozenset[str] | None) -> str:
    if not names:
        return ""
    return ", ".join(sorted(_TERMINAL_TEXT.get(name, name) for name in names))


def parse(source: str) -> Expression:
    """Parse expression text into an immutable tree.

    Raises:
        ExpressionSyntaxError: with the byte offset where parsing stopped and
            a description of the tokens that would have been accepted.
    """
    try:
        tree = _PARSER.parse(source)
    except UnexpectedEOF as exc:
        raise ExpressionSyntaxError(
            "unexpected end of input",
            len(source.encode("utf-8")),
            _describe_expected(set(exc.expected)),
        ) from None
    except UnexpectedToken as exc:
        position = exc.token.start_pos
        if exc.token.type == "$END" or position is None:
            offset = len(source.encode("utf-8"))
            message = "unexpected end of input"
        else:
            offset = _byte_offset(source, position)
            message = f"unexpected token {str(exc.token)!r}"
        raise ExpressionSyntaxError(
            message, offset, _describe_expected(exc.expected)
        ) from None
    except UnexpectedCharacters as exc:
        raise ExpressionSyntaxError(
            f"unexpected character {source[exc.pos_in_stream]!r}",
            _byte_offset(source, exc.pos_in_stream),
            _describe_expected(exc.allowed),
        ) from None
    except UnexpectedInput as exc:  # pragma: no cover - other lark failures
        raise ExpressionSyntaxError(str(exc), 0) from None

    try:
        return _TreeBuilder().transform(tree)
    except VisitError as exc:
        rejected = exc.orig_exc
        if isinstance(rejected, _RejectedToken):
            raise ExpressionSyntaxError(
                rejected.message,
                _byte_offset(source, rejected.position),
                rejected.expected,
            ) from None
        raise


def free_variables(e: Expression) -> frozenset[str]:
    """Identifiers referenced anywhere in `e`."""
    if isinstance(e, Variable):
        return frozenset((e.name,))
    if isinstance(e, Number):
        return frozenset()
    if isinstance(e, Binary):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Neg):
        return free_variables(e.operand)
    return free_variables(e.arg)


def to_text(e: Expression) -> str:
    """Print `e` so that `parse(to_text(e)) == e`."""
    if isinstance(e, Number):
        return repr(e.value)
    if isinstance(e, Variable):
        return e.name
    if isinstance(e, Apply):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        return f"-{_operand_text(e.operand)}"
    return f"{_operand_text(e.left)} {e.op} {_operand_text(e.right)}"


def _operand_text(e: Expression) -> str:
    text = to_text(e)
    if isinstance(e, (Variable, Apply)):
        return text
    if isinstance(e, Number) and not text.startswith("-"):
        return text
    return f"({text})"


_BINARY: dict[str, Callable[[Scalar, Scalar], Scalar]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": autodiff.divide,
    "^": autodiff.power,
}


def _evaluate(e: Expression, bindings: Bindings) -> Scalar:
    if isinstance(e, Number):
        return e.value
    if isinstance(e, Variable):
        try:
            value = bindings[e.name]
        except KeyError:
            raise UnboundVariableError(e.name) from None
        if not autodiff.is_finite(value):
            raise DomainError(f"variable {e.name} is bound to a non-finite value")
        return value
    if isinstance(e, Binary):
        value = _BINARY[e.op](
            _evaluate(e.left, bindings), _evaluate(e.right, bindings)
        )
    elif isinstance(e, Neg):
        return -_evaluate(e.operand, bindings)
    else:
        value = autodiff.FUNCTIONS[e.func](_evaluate(e.arg, bindings))
    if not autodiff.is_finite(value):
        raise DomainError(f"non-finite value in {to_text(e)}")
    return value


def evaluate(e: Expression, bindings: Bindings) -> Scalar:
    """Value of `e` under `bindings`, over floats or nested duals.

    Raises:
        UnboundVariableError: when a free variable of `e` is not bound.
        DomainError: when an operation leaves its domain or a non-finite
            value appears; the error carries the primal binding values.
    """
    try:
        return _evaluate(e, bindings)
    except DomainError as exc:
        raise exc.with_values(
            {name: autodiff.primal(value) for name, value in bindings.items()}
        ) from None


def compile_expression(e: Expression) -> Callable[[Bindings], Scalar]:
    """Close over `e` so callers can treat it as a plain function."""

    def run(bindings: Bindings) -> Scalar:
        return evaluate(e, bindings)

    return run
