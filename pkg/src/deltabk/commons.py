"""
Common types, constants and exceptions for deltabk.

Everything that more than one module needs to agree on lives here: default
contraction parameters, numeric tolerances, and the exception hierarchy the
command line maps onto exit codes.
"""

import copy
from typing import Any, Mapping, Optional

import numpy as np
import numpy.typing as npt

# --- Type aliases ------------------------------------------------------------
# Dense float vectors and matrices handed to numpy/scipy.
FloatArray = npt.NDArray[np.float64]

# --- Synthesis defaults ------------------------------------------------------
# Contraction rate; 2 reproduces the generator walkthrough.
DEFAULT_LAMBDA = 2.0
# Input gain bound of the states-and-inputs contraction condition.
DEFAULT_ALPHA = 2.0

# --- Tolerances --------------------------------------------------------------
# Implementation policy, not derived from the contraction theorems.
TOL_STATE = 1e-7
TOL_INPUT = 1e-9
TOL_PD = 1e-10
TOL_METRIC_DERIVATIVE = 1e-5

# Central finite-difference steps (first and second order).
FD_STEP = 1e-5
FD_STEP_SECOND = 1e-4

# --- Simulation defaults -----------------------------------------------------
DEFAULT_STEP = 1e-3
DEFAULT_EPS_INT = 1e-6
DEFAULT_EPS_EQ = 1e-6

# --- Region verification defaults --------------------------------------------
DEFAULT_SEED = 42
DEFAULT_SAMPLES = 2000
DEFAULT_INPUT_INTERVAL = (-1.0, 1.0)

# Number of box points used by load-time nonzero checks on g.
VALIDATION_SAMPLES = 256


class DeltaBkError(Exception):
    """Base class for every error raised by deltabk."""


class ExpressionSyntaxError(DeltaBkError, ValueError):
    """Raised when expression text does not match the grammar.

    `offset` is the byte offset into the UTF-8 encoded source where parsing
    stopped; `expected` describes what the parser would have accepted there.
    """

    def __init__(self, message: str, offset: int, expected: str = "") -> None:
        super().__init__(message)
        self.message = message
        self.offset = offset
        self.expected = expected

    def __str__(self) -> str:
        text = f"{self.message} at offset {self.offset}"
        if self.expected:
            text += f" (expected {self.expected})"
        return text


class UnboundVariableError(DeltaBkError, KeyError):
    """Raised when an expression references a name missing from the bindings."""

    def __init__(self, name: str) -> None:
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unbound variable {self.name!r}"


class DomainError(DeltaBkError, ArithmeticError):
    """Raised when a value leaves the domain of an operation.

    Carries the primal values of the variables that were bound when the
    error occurred, so reports can say where it happened.
    """

    def __init__(
        self, message: str, values: Optional[Mapping[str, float]] = None
    ) -> None:
        super().__init__(message)
        self.message = message
        self.values: dict[str, float] = dict(values or {})

    def with_values(self, values: Mapping[str, float]) -> "DomainError":
        """Return a copy located at `values`, keeping the innermost location."""
        if self.values:
            return self
        located = copy.copy(self)
        located.values = dict(values)
        return located

    def __str__(self) -> str:
        if not self.values:
            return self.message
        where = ", ".join(
            f"{name}={value:.17g}" for name, value in self.values.items()
        )
        return f"{self.message} at {where}"


class SingularJacobianError(DomainError):
    """Raised when a coordinate map has a singular Jacobian."""


class TrajectoryEscapeError(DomainError):
    """Raised when a trajectory-pair check meets an aborted integration."""

    def __init__(self, message: str, record: Any = None) -> None:
        super().__init__(message)
        self.record = record


class ValidationError(DeltaBkError, ValueError):
    """Raised when a system or parameter set violates its invariants."""


class ConfigError(DeltaBkError, ValueError):
    """Raised when a run configuration is malformed."""
