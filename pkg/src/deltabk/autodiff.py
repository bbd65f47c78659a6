"""
Nested forward-mode differentiation.

A `Dual` carries a value and one infinitesimal part. Levels nest by making
the components themselves duals: the outermost level is always the most
recent perturbation, and an operand of lower depth is a constant with
respect to it. Every derivative helper first lifts all point and direction
components to a common depth, so a new perturbation is strictly outside all
existing ones.

The elementary functions dispatch on float vs. `Dual` and raise
`DomainError` instead of returning NaN or infinity.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence, Union

from .commons import FD_STEP, FD_STEP_SECOND, DomainError


class Dual:
    """Dual number `value + deriv * eps` at nesting level `depth`."""

    __slots__ = ("value", "deriv", "depth")
    # Make numpy defer to our reflected operators.
    __array_ufunc__ = None

    def __init__(
        self, value: "Scalar", deriv: "Scalar", depth: int | None = None
    ) -> None:
        self.value = value
        self.deriv = deriv
        self.depth = (
            depth if depth is not None else 1 + max(depth_of(value), depth_of(deriv))
        )

    def __repr__(self) -> str:
        return f"Dual({self.value!r}, {self.deriv!r})"

    # ----- arithmetic ---------------------------------------------------------
    def __add__(self, other: "Scalar") -> "Scalar":
        if isinstance(other, Dual):
            if other.depth > self.depth:
                return other.__radd__(self)
            if other.depth == self.depth:
                return Dual(
                    self.value + other.value, self.deriv + other.deriv, self.depth
                )
        return Dual(self.value + other, self.deriv, self.depth)

    def __radd__(self, other: "Scalar") -> "Scalar":
        return Dual(other + self.value, self.deriv, self.depth)

    def __sub__(self, other: "Scalar") -> "Scalar":
        if isinstance(other, Dual):
            if other.depth > self.depth:
                return other.__rsub__(self)
            if other.depth == self.depth:
                return Dual(
                    self.value - other.value, self.deriv - other.deriv, self.depth
                )
        return Dual(self.value - other, self.deriv, self.depth)

    def __rsub__(self, other: "Scalar") -> "Scalar":
        return Dual(other - self.value, -self.deriv, self.depth)

    def __mul__(self, other: "Scalar") -> "Scalar":
        if isinstance(other, Dual):
            if other.depth > self.depth:
                return other.__rmul__(self)
            if other.depth == self.depth:
                return Dual(
                    self.value * other.value,
                    self.value * other.deriv + self.deriv * other.value,
                    self.depth,
                )
        return Dual(self.value * other, self.deriv * other, self.depth)

    def __rmul__(self, other: "Scalar") -> "Scalar":
        return Dual(other * self.value, other * self.deriv, self.depth)

    def __truediv__(self, other: "Scalar") -> "Scalar":
        if isinstance(other, Dual):
            if other.depth > self.depth:
                return other.__rtruediv__(self)
            if other.depth == self.depth:
                _require_nonzero(other)
                return Dual(
                    self.value / other.value,
                    (self.deriv * other.value - self.value * other.deriv)
                    / (other.value * other.value),
                    self.depth,
                )
        _require_nonzero(other)
        return Dual(self.value / other, self.deriv / other, self.depth)

    def __rtruediv__(self, other: "Scalar") -> "Scalar":
        _require_nonzero(self)
        return Dual(
            other / self.value,
            -(other * self.deriv) / (self.value * self.value),
            self.depth,
        )

    def __neg__(self) -> "Dual":
        return Dual(-self.value, -self.deriv, self.depth)

    def __pos__(self) -> "Dual":
        return self

    def __pow__(self, other: "Scalar") -> "Scalar":
        return power(self, other)

    def __rpow__(self, other: "Scalar") -> "Scalar":
        return power(other, self)


Scalar = Union[float, Dual]
ScalarFunction = Callable[[Sequence[Scalar]], Scalar]
VectorFunction = Callable[[Sequence[Scalar]], Sequence[Scalar]]


def depth_of(x: Scalar) -> int:
    return x.depth if isinstance(x, Dual) else 0


def primal(x: Scalar) -> float:
    """Innermost real value of a (possibly nested) dual."""
    while isinstance(x, Dual):
        x = x.value
    return float(x)


def is_finite(x: Scalar) -> bool:
    """Whether every component at every level is finite."""
    if isinstance(x, Dual):
        return is_finite(x.value) and is_finite(x.deriv)
    return math.isfinite(x)


def constant(value: float, depth: int) -> Scalar:
    """`value` promoted to `depth` with zero derivative parts."""
    result: Scalar = float(value)
    for level in range(1, depth + 1):
        result = Dual(result, _zero(level - 1), level)
    return result


def _zero(depth: int) -> Scalar:
    return constant(0.0, depth)


def _require_nonzero(x: Scalar) -> None:
    if primal(x) == 0.0:
        raise DomainError("division by zero")


# ----- elementary functions ---------------------------------------------------
def divide(a: Scalar, b: Scalar) -> Scalar:
    _require_nonzero(b)
    return a / b


def sin(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        return Dual(sin(x.value), cos(x.value) * x.deriv, x.depth)
    return math.sin(x)


def cos(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        return Dual(cos(x.value), -sin(x.value) * x.deriv, x.depth)
    return math.cos(x)


def tan(x: Scalar) -> Scalar:
    if math.cos(primal(x)) == 0.0:
        raise DomainError("tan is undefined where cos = 0")
    if isinstance(x, Dual):
        c = cos(x.value)
        return Dual(tan(x.value), x.deriv / (c * c), x.depth)
    return math.tan(x)


def cot(x: Scalar) -> Scalar:
    # cos/sin with the zero of sin reported explicitly.
    s = sin(x)
    if primal(s) == 0.0:
        raise DomainError("cot is undefined where sin = 0")
    return cos(x) / s


def exp(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        e = exp(x.value)
        return Dual(e, e * x.deriv, x.depth)
    try:
        return math.exp(x)
    except OverflowError:
        raise DomainError(f"exp overflow for argument {x!r}") from None


def ln(x: Scalar) -> Scalar:
    if primal(x) <= 0.0:
        raise DomainError("ln of a nonpositive value")
    if isinstance(x, Dual):
        return Dual(ln(x.value), x.deriv / x.value, x.depth)
    return math.log(x)


def sqrt(x: Scalar) -> Scalar:
    p = primal(x)
    if p < 0.0:
        raise DomainError("sqrt of a negative value")
    if isinstance(x, Dual):
        if p == 0.0:
            raise DomainError("sqrt is not differentiable at 0")
        s = sqrt(x.value)
        return Dual(s, x.deriv / (2.0 * s), x.depth)
    return math.sqrt(x)


def absolute(x: Scalar) -> Scalar:
    p = primal(x)
    if isinstance(x, Dual):
        if p == 0.0:
            raise DomainError("abs is not differentiable at 0")
        return x if p > 0.0 else -x
    return abs(x)


def power(base: Scalar, exponent: Scalar) -> Scalar:
    b = primal(base)
    if isinstance(exponent, Dual):
        # Variable exponent: exp(exponent * ln(base)).
        if b <= 0.0:
            raise DomainError("power with a variable exponent needs a positive base")
        return exp(exponent * ln(base))
    e = float(exponent)
    if b == 0.0 and e < 0.0:
        raise DomainError("zero raised to a negative power")
    if b < 0.0 and not e.is_integer():
        raise DomainError("negative base raised to a non-integer power")
    if not isinstance(base, Dual):
        try:
            return float(base) ** e
        except OverflowError:
            raise DomainError("power overflow") from None
    if e == 0.0:
        return 1.0
    if b == 0.0 and e < 1.0:
        raise DomainError("power is not differentiable at 0 for exponent below 1")
    return Dual(
        power(base.value, e), e * power(base.value, e - 1.0) * base.deriv, base.depth
    )


FUNCTIONS: dict[str, Callable[[Scalar], Scalar]] = {
    "sin": sin,
    "cos": cos,
    "tan": tan,
    "cot": cot,
    "exp": exp,
    "ln": ln,
    "sqrt": sqrt,
    "abs": absolute,
}


# ----- derivative helpers -----------------------------------------------------
def jvp(
    f: VectorFunction, point: Sequence[Scalar], direction: Sequence[Scalar]
) -> list[Scalar]:
    """Jacobian-vector product of a vector function, exact to all levels."""
    if len(point) != len(direction):
        raise ValueError("direction must have the dimension of point")
    depth = max((depth_of(c) for c in (*point, *direction)), default=0) + 1
    lifted = [Dual(p, v, depth) for p, v in zip(point, direction)]
    return [_tangent(component, depth) for component in f(lifted)]


def directional_derivative(
    f: ScalarFunction, point: Sequence[Scalar], direction: Sequence[Scalar]
) -> Scalar:
    """Forward-mode directional derivative of a scalar function."""
    return jvp(lambda p: (f(p),), point, direction)[0]


def _tangent(result: Scalar, depth: int) -> Scalar:
    if isinstance(result, Dual) and result.depth == depth:
        return result.deriv
    return 0.0


def _axis(n: int, i: int) -> list[float]:
    return [1.0 if j == i else 0.0 for j in range(n)]


def gradient(f: ScalarFunction, point: Sequence[Scalar]) -> list[Scalar]:
    n = len(point)
    return [directional_derivative(f, point, _axis(n, i)) for i in range(n)]


def jacobian(F: VectorFunction, point: Sequence[Scalar]) -> list[list[Scalar]]:
    """Row `i` holds the gradient of component `i`."""
    n = len(point)
    columns = [jvp(F, point, _axis(n, j)) for j in range(n)]
    return [[column[i] for column in columns] for i in range(len(columns[0]))]


def hessian(f: ScalarFunction, point: Sequence[Scalar]) -> list[list[Scalar]]:
    """Symmetrized matrix of second partials, via nested duals."""
    raw = jacobian(lambda p: gradient(f, p), point)
    n = len(point)
    return [[0.5 * (raw[i][j] + raw[j][i]) for j in range(n)] for i in range(n)]


# ----- finite-difference oracles ------------------------------------------------
def central_difference(
    f: Callable[[Sequence[float]], float],
    point: Sequence[float],
    direction: Sequence[float],
    step: float = FD_STEP,
) -> float:
    forward = [p + step * v for p, v in zip(point, direction)]
    backward = [p - step * v for p, v in zip(point, direction)]
    return (float(f(forward)) - float(f(backward))) / (2.0 * step)


def fd_gradient(
    f: Callable[[Sequence[float]], float],
    point: Sequence[float],
    step: float = FD_STEP,
) -> list[float]:
    n = len(point)
    return [central_difference(f, point, _axis(n, i), step) for i in range(n)]


def fd_jacobian(
    F: Callable[[Sequence[float]], Sequence[float]],
    point: Sequence[float],
    step: float = FD_STEP,
) -> list[list[float]]:
    n = len(point)
    columns = []
    for j in range(n):
        forward = [p + (step if i == j else 0.0) for i, p in enumerate(point)]
        backward = [p - (step if i == j else 0.0) for i, p in enumerate(point)]
        high, low = F(forward), F(backward)
        columns.append(
            [(float(a) - float(b)) / (2.0 * step) for a, b in zip(high, low)]
        )
    return [[column[i] for column in columns] for i in range(len(columns[0]))]


def fd_hessian(
    f: Callable[[Sequence[float]], float],
    point: Sequence[float],
    step: float = FD_STEP_SECOND,
) -> list[list[float]]:
    """Second-order central differences of function values."""
    n = len(point)

    def shifted(di: int, si: float, dj: int, sj: float) -> float:
        p = list(point)
        p[di] += si * step
        p[dj] += sj * step
        return float(f(p))

    result = [[0.0] * n for _ in range(n)]
    base = float(f(list(point)))
    for i in range(n):
        result[i][i] = (
            shifted(i, 1.0, i, 0.0) - 2.0 * base + shifted(i, -1.0, i, 0.0)
        ) / (step * step)
        for j in range(i + 1, n):
            value = (
                shifted(i, 1.0, j, 1.0)
                - shifted(i, 1.0, j, -1.0)
                - shifted(i, -1.0, j, 1.0)
                + shifted(i, -1.0, j, -1.0)
            ) / (4.0 * step * step)
            result[i][j] = result[j][i] = value
    return result
