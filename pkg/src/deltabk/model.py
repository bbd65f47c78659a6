"""
Strict-feedback system models and the coordinate change between them.

A parametric-strict-feedback system

    f_i = h_i(x_1..x_i) + b_i x_{i+1}    (i < n)
    f_n = h_n(x) + g(x) u

and a strict-feedback system

    f_i = h_i(x_1..x_i) + g_i(x_1..x_i) x_{i+1}
    f_n = h_n(x) + g_n(x) u

are both held as parsed expressions plus named parameters. The map
`y_l = (g_1 ... g_{l-1}) x_l` turns the second kind into the first with unit
interconnection gains; the transformed field is evaluated numerically as a
pushforward, so no symbolic algebra is needed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Mapping, Optional, Protocol, Sequence, Union

import numpy as np

from . import autodiff
from .autodiff import Scalar
from .commons import (
    DEFAULT_SEED,
    VALIDATION_SAMPLES,
    DomainError,
    FloatArray,
    ValidationError,
)
from .expr import Expression, evaluate, free_variables, parse
from .sampling import Box

logger = logging.getLogger(__name__)

FieldFunction = Callable[[Sequence[Scalar], Scalar], list[Scalar]]
StateMap = Callable[[Sequence[Scalar]], list[Scalar]]


def state_names(n: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(1, n + 1))


def _bindings(params: Mapping[str, float], x: Sequence[Scalar]) -> dict[str, Scalar]:
    bindings: dict[str, Scalar] = dict(params)
    bindings.update(zip(state_names(len(x)), x))
    return bindings


def _padded(x: Sequence[Scalar], n: int) -> list[Scalar]:
    return list(x) + [0.0] * (n - len(x))


@dataclass(frozen=True)
class VectorField:
    """Evaluable map `(x, u) -> dx/dt` over floats or nested duals."""

    n: int
    func: FieldFunction

    def __call__(self, x: Sequence[Scalar], u: Scalar) -> list[Scalar]:
        return self.func(x, u)

    def evaluate(self, x: Sequence[float], u: float) -> FloatArray:
        return np.array([float(v) for v in self.func(x, u)], dtype=np.float64)

    def state_jacobian(self, x: Sequence[float], u: float) -> FloatArray:
        rows = autodiff.jacobian(lambda p: self.func(p, u), list(x))
        return np.array(rows, dtype=np.float64)

    def input_jacobian(self, x: Sequence[float], u: float) -> FloatArray:
        n = self.n
        column = autodiff.jvp(
            lambda p: self.func(p[:n], p[n]), [*x, u], [0.0] * n + [1.0]
        )
        return np.array(column, dtype=np.float64)


class ParametricForm(Protocol):
    """What the backstepping recursion needs from a system."""

    @property
    def n(self) -> int: ...

    @property
    def b(self) -> tuple[float, ...]: ...

    @property
    def box(self) -> Box: ...

    def h_value(self, i: int, x: Sequence[Scalar]) -> Scalar: ...

    def g_value(self, x: Sequence[Scalar]) -> Scalar: ...

    def drift(self, i: int, x: Sequence[Scalar]) -> Scalar: ...

    def vector_field(self) -> VectorField: ...


def _check_dependencies(
    label: str, e: Expression, allowed: set[str], params: Mapping[str, float]
) -> None:
    names = free_variables(e)
    forbidden = sorted(names - allowed - set(params))
    if forbidden:
        raise ValidationError(
            f"{label} references {', '.join(forbidden)}; "
            f"allowed are {', '.join(sorted(allowed))} and parameters"
        )


def _check_nonzero_on_box(
    label: str,
    value: Callable[[Sequence[float]], Scalar],
    box: Box,
    samples: int,
    seed: int,
) -> None:
    if not box.is_bounded():
        raise ValidationError("validity box must be bounded")
    for point in box.sample(samples, seed):
        x = [float(v) for v in point]
        try:
            v = autodiff.primal(value(x))
        except DomainError as exc:
            raise ValidationError(f"{label} cannot be evaluated: {exc}") from None
        if v == 0.0:
            raise ValidationError(f"{label} vanishes at sampled point {x}")


def _parse_all(sources: Sequence[Union[str, Expression]]) -> tuple[Expression, ...]:
    return tuple(parse(s) if isinstance(s, str) else s for s in sources)


@dataclass(frozen=True)
class ParametricStrictFeedbackSystem:
    h: tuple[Expression, ...]
    b: tuple[float, ...]
    g: Expression
    box: Box
    params: Mapping[str, float] = field(default_factory=dict)
    name: str = "parametric-strict-feedback"
    escape_box: Optional[Box] = None

    def __post_init__(self) -> None:
        if not self.h:
            raise ValidationError("system needs at least one state")
        if len(self.b) != self.n - 1:
            raise ValidationError(
                f"expected {self.n - 1} interconnection gains b, got {len(self.b)}"
            )
        if self.box.dim != self.n:
            raise ValidationError("box dimension does not match the state dimension")
        if self.escape_box is not None and self.escape_box.dim != self.n:
            raise ValidationError("escape box dimension does not match the state")

    @classmethod
    def from_text(
        cls,
        h: Sequence[Union[str, Expression]],
        b: Sequence[float],
        g: Union[str, Expression],
        box: Box,
        params: Mapping[str, float] | None = None,
        name: str = "parametric-strict-feedback",
        *,
        escape_box: Optional[Box] = None,
        samples: int = VALIDATION_SAMPLES,
        seed: int = DEFAULT_SEED,
    ) -> "ParametricStrictFeedbackSystem":
        """Parse and validate a system given as expression text."""
        system = cls(
            h=_parse_all(h),
            b=tuple(float(v) for v in b),
            g=parse(g) if isinstance(g, str) else g,
            box=box,
            params=dict(params or {}),
            name=name,
            escape_box=escape_box,
        )
        system.validate(samples=samples, seed=seed)
        return system

    @property
    def n(self) -> int:
        return len(self.h)

    def validate(
        self, samples: int = VALIDATION_SAMPLES, seed: int = DEFAULT_SEED
    ) -> None:
        names = state_names(self.n)
        for i, e in enumerate(self.h, start=1):
            _check_dependencies(f"h{i}", e, set(names[:i]), self.params)
        _check_dependencies("g", self.g, set(names), self.params)
        for i, gain in enumerate(self.b, start=1):
            if gain == 0.0:
                raise ValidationError(f"interconnection gain b{i} must be nonzero")
        _check_nonzero_on_box("g", self.g_value, self.box, samples, seed)
        logger.debug("validated %s system with n=%d", self.name, self.n)

    def h_value(self, i: int, x: Sequence[Scalar]) -> Scalar:
        return evaluate(self.h[i - 1], _bindings(self.params, x))

    def g_value(self, x: Sequence[Scalar]) -> Scalar:
        return evaluate(self.g, _bindings(self.params, x))

    def drift(self, i: int, x: Sequence[Scalar]) -> Scalar:
        """Component `i` of the field with zero input."""
        if i < self.n:
            return self.h_value(i, x) + self.b[i - 1] * x[i]
        return self.h_value(i, x)

    def vector_field(self) -> VectorField:
        def f(x: Sequence[Scalar], u: Scalar) -> list[Scalar]:
            out = [self.drift(i, x) for i in range(1, self.n)]
            out.append(self.h_value(self.n, x) + self.g_value(x) * u)
            return out

        return VectorField(self.n, f)


@dataclass(frozen=True)
class StrictFeedbackSystem:
    h: tuple[Expression, ...]
    g: tuple[Expression, ...]
    box: Box
    params: Mapping[str, float] = field(default_factory=dict)
    name: str = "strict-feedback"
    escape_box: Optional[Box] = None

    def __post_init__(self) -> None:
        if not self.h:
            raise ValidationError("system needs at least one state")
        if len(self.g) != self.n:
            raise ValidationError(f"expected {self.n} gains g, got {len(self.g)}")
        if self.box.dim != self.n:
            raise ValidationError("box dimension does not match the state dimension")
        if self.escape_box is not None and self.escape_box.dim != self.n:
            raise ValidationError("escape box dimension does not match the state")

    @classmethod
    def from_text(
        cls,
        h: Sequence[Union[str, Expression]],
        g: Sequence[Union[str, Expression]],
        box: Box,
        params: Mapping[str, float] | None = None,
        name: str = "strict-feedback",
        *,
        escape_box: Optional[Box] = None,
        samples: int = VALIDATION_SAMPLES,
        seed: int = DEFAULT_SEED,
    ) -> "StrictFeedbackSystem":
        system = cls(
            h=_parse_all(h),
            g=_parse_all(g),
            box=box,
            params=dict(params or {}),
            name=name,
            escape_box=escape_box,
        )
        system.validate(samples=samples, seed=seed)
        return system

    @property
    def n(self) -> int:
        return len(self.h)

    def validate(
        self, samples: int = VALIDATION_SAMPLES, seed: int = DEFAULT_SEED
    ) -> None:
        names = state_names(self.n)
        for i, (h_i, g_i) in enumerate(zip(self.h, self.g), start=1):
            _check_dependencies(f"h{i}", h_i, set(names[:i]), self.params)
            _check_dependencies(f"g{i}", g_i, set(names[:i]), self.params)
        for i in range(1, self.n + 1):
            _check_nonzero_on_box(
                f"g{i}",
                partial(self.gain, i),
                self.box,
                samples,
                seed,
            )
        logger.debug("validated %s system with n=%d", self.name, self.n)

    def h_value(self, i: int, x: Sequence[Scalar]) -> Scalar:
        return evaluate(self.h[i - 1], _bindings(self.params, x))

    def gain(self, i: int, x: Sequence[Scalar]) -> Scalar:
        return evaluate(self.g[i - 1], _bindings(self.params, x))

    def component(self, i: int, x: Sequence[Scalar], u: Scalar) -> Scalar:
        successor = x[i] if i < self.n else u
        return self.h_value(i, x) + self.gain(i, x) * successor

    def vector_field(self) -> VectorField:
        def f(x: Sequence[Scalar], u: Scalar) -> list[Scalar]:
            return [self.component(i, x, u) for i in range(1, self.n + 1)]

        return VectorField(self.n, f)


System = Union[ParametricStrictFeedbackSystem, StrictFeedbackSystem]


def vector_field(sys: System) -> VectorField:
    """Closure computing the state derivative of either system kind."""
    return sys.vector_field()


# ----- coordinate change --------------------------------------------------------
def transform_coordinates(
    sys: StrictFeedbackSystem, x: Sequence[Scalar]
) -> list[Scalar]:
    """`y_1 = x_1`, `y_l = g_1(x) ... g_{l-1}(x) x_l`."""
    y: list[Scalar] = [x[0]]
    scale: Scalar = 1.0
    for l in range(2, sys.n + 1):
        g = sys.gain(l - 1, x)
        if autodiff.primal(g) == 0.0:
            raise DomainError(f"g{l - 1} vanishes; coordinate map is singular")
        scale = scale * g
        y.append(scale * x[l - 1])
    return y


def invert_coordinates(
    sys: StrictFeedbackSystem, y: Sequence[Scalar]
) -> list[Scalar]:
    """Forward substitution `x_l = y_l / (g_1 ... g_{l-1})` on recovered states."""
    x: list[Scalar] = [y[0]]
    scale: Scalar = 1.0
    for l in range(2, sys.n + 1):
        scale = scale * sys.gain(l - 1, _padded(x, sys.n))
        x.append(autodiff.divide(y[l - 1], scale))
    return x


@dataclass(frozen=True)
class CoordinateMap:
    """Smooth map with a smooth inverse; `jacobian` is Theta = dphi/dx."""

    n: int
    forward: StateMap
    inverse: StateMap

    @classmethod
    def identity(cls, n: int) -> "CoordinateMap":
        return cls(n, list, list)

    def jacobian(self, x: Sequence[float]) -> FloatArray:
        return np.array(autodiff.jacobian(self.forward, list(x)), dtype=np.float64)


def coordinate_map(sys: StrictFeedbackSystem) -> CoordinateMap:
    return CoordinateMap(
        sys.n,
        lambda x: transform_coordinates(sys, x),
        lambda y: invert_coordinates(sys, y),
    )


@dataclass(frozen=True)
class TransformedSystem:
    """Pushforward of a strict-feedback system to unit-gain coordinates.

    Sampled on the source box: the map fixes the first coordinate, and the
    source box is the region where the gains were validated.
    """

    source: StrictFeedbackSystem
    coordinates: CoordinateMap

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def b(self) -> tuple[float, ...]:
        return (1.0,) * (self.n - 1)

    @property
    def box(self) -> Box:
        return self.source.box

    @property
    def name(self) -> str:
        return f"{self.source.name} (transformed)"

    def _component_map(self, l: int) -> Callable[[Sequence[Scalar]], list[Scalar]]:
        def y_l(x: Sequence[Scalar]) -> list[Scalar]:
            scale: Scalar = 1.0
            for i in range(1, l):
                scale = scale * self.source.gain(i, x)
            return [scale * x[l - 1]]

        return y_l

    def pushforward_component(
        self, l: int, y: Sequence[Scalar], u: Scalar
    ) -> Scalar:
        """Component `l` of `Theta(x) f(x, u)` at `x = phi^-1(y)`."""
        x = self.coordinates.inverse(y)
        # y_l depends on x_1..x_l only
        direction = [self.source.component(i, x, u) for i in range(1, l + 1)]
        direction += [0.0] * (self.n - l)
        return autodiff.jvp(self._component_map(l), x, direction)[0]

    def pushforward(self, y: Sequence[Scalar], u: Scalar) -> list[Scalar]:
        x = self.coordinates.inverse(y)
        direction = self.source.vector_field()(x, u)
        return autodiff.jvp(self.coordinates.forward, x, direction)

    def h_value(self, i: int, y: Sequence[Scalar]) -> Scalar:
        drift = self.pushforward_component(i, y, 0.0)
        return drift - y[i] if i < self.n else drift

    def g_value(self, y: Sequence[Scalar]) -> Scalar:
        x = self.coordinates.inverse(y)
        product: Scalar = 1.0
        for i in range(1, self.n + 1):
            product = product * self.source.gain(i, x)
        return product

    def drift(self, i: int, y: Sequence[Scalar]) -> Scalar:
        return self.pushforward_component(i, y, 0.0)

    def vector_field(self) -> VectorField:
        return VectorField(self.n, self.pushforward)


def to_parametric(sys: StrictFeedbackSystem) -> TransformedSystem:
    """Unit-gain form `f' = phi_* f` with composite input gain `g' = g_1 ... g_n`."""
    return TransformedSystem(sys, coordinate_map(sys))
