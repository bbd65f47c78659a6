"""
Backstepping synthesis of incrementally stabilizing controllers.

For a parametric-strict-feedback form with contraction rate `lam` the
recursion, with `phi_-1 = phi_0 = 0`, `b_0 = 0` and `x_0 = 0`, is

    k_l   = -b_{l-1} (x_{l-1} - phi_{l-2}) - (lam/2) (x_l - phi_{l-1})
            + dphi_{l-1}(x) . (f_1, ..., f_{l-1}, 0, ..., 0)
    phi_l = (k_l - h_l) / b_l
    k     = (k_n - h_n) / g + u_hat / g

`phi_{l-1}` depends on `x_1..x_{l-1}` only, so its derivative along the field
never needs `f_l..f_n` and the control law is not circular. Virtual controls
are closures over nested duals rather than symbolic expressions.

The error coordinates `psi_i = x_i - phi_{i-1}` are an isometry from the
contraction metric `G_n = J_psi^T J_psi` to the Euclidean one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff
from .autodiff import Scalar
from .commons import FloatArray, SingularJacobianError
from .model import (
    CoordinateMap,
    ParametricForm,
    StrictFeedbackSystem,
    System,
    VectorField,
    to_parametric,
)

logger = logging.getLogger(__name__)

StateFunction = Callable[[Sequence[Scalar]], Scalar]
Matrix = list[list[Scalar]]


class MetricProvenance(Enum):
    RECURSIVE = "recursive"
    PSI_JACOBIAN = "psi-jacobian"
    PULLBACK = "pullback"
    IDENTITY = "identity"
    CUSTOM = "custom"


@dataclass(frozen=True)
class MetricField:
    """Evaluable map from a state to a symmetric n x n matrix."""

    n: int
    func: Callable[[Sequence[Scalar]], Matrix]
    provenance: MetricProvenance

    def __call__(self, x: Sequence[float]) -> FloatArray:
        return np.array(self.func(list(x)), dtype=np.float64)

    def generic(self, x: Sequence[Scalar]) -> Matrix:
        return self.func(x)

    def derivative_along(
        self, x: Sequence[float], direction: Sequence[float]
    ) -> FloatArray:
        """Entrywise directional derivative `D_v G(x)` by forward mode."""
        n = self.n
        flat = autodiff.jvp(
            lambda p: [entry for row in self.func(p) for entry in row],
            list(x),
            list(direction),
        )
        return np.array(flat, dtype=np.float64).reshape(n, n)

    @classmethod
    def identity(cls, n: int) -> "MetricField":
        def eye(_: Sequence[Scalar]) -> Matrix:
            return [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]

        return cls(n, eye, MetricProvenance.IDENTITY)


# ----- small generic matrix helpers (entries may be duals) ---------------------
def _transpose(a: Matrix) -> Matrix:
    return [list(column) for column in zip(*a)]


def _matmul(a: Matrix, b: Matrix) -> Matrix:
    columns = _transpose(b)
    return [[_dot(row, column) for column in columns] for row in a]


def _dot(u: Sequence[Scalar], v: Sequence[Scalar]) -> Scalar:
    total: Scalar = 0.0
    for a, b in zip(u, v):
        total = total + a * b
    return total


@dataclass(frozen=True)
class SynthesizedController:
    """Backstepping controller on a unit-gain or parametric form.

    `phi[l]` is the virtual control `phi_l` for `l = 0..n-1` (`phi[0] = 0`),
    `kseq[l-1]` is `k_l`. When built from a strict-feedback system,
    `coordinate_map` is the change of coordinates to the form and `source`
    the original system; `control` then acts in original coordinates.
    """

    lam: float
    form: ParametricForm
    phi: tuple[StateFunction, ...]
    kseq: tuple[StateFunction, ...]
    source: Optional[StrictFeedbackSystem] = None
    coordinate_map: Optional[CoordinateMap] = None

    @property
    def n(self) -> int:
        return self.form.n

    @property
    def kind(self) -> str:
        return "strict-feedback" if self.source is not None else "parametric"

    # ----- control law ------------------------------------------------------------
    def feedback(self, y: Sequence[Scalar], u_hat: Scalar) -> Scalar:
        """`k(y, u_hat)` in form coordinates."""
        n = self.n
        g = self.form.g_value(y)
        residual = self.kseq[n - 1](y) - self.form.h_value(n, y)
        return autodiff.divide(residual, g) + autodiff.divide(u_hat, g)

    def to_form(self, x: Sequence[Scalar]) -> list[Scalar]:
        if self.coordinate_map is None:
            return list(x)
        return self.coordinate_map.forward(x)

    def from_form(self, y: Sequence[Scalar]) -> list[Scalar]:
        if self.coordinate_map is None:
            return list(y)
        return self.coordinate_map.inverse(y)

    def control(self, x: Sequence[Scalar], u_hat: Scalar) -> Scalar:
        """`u = k(phi(x), u_hat)` in the coordinates of the original system."""
        return self.feedback(self.to_form(x), u_hat)

    # ----- error coordinates ------------------------------------------------------
    def error_coordinates(self, y: Sequence[Scalar]) -> list[Scalar]:
        return [y[i] - self.phi[i](y) for i in range(self.n)]

    def isometry(self, x: Sequence[Scalar]) -> list[Scalar]:
        """`psi(phi(x))`: error coordinates of a state in original coordinates."""
        return self.error_coordinates(self.to_form(x))

    # ----- closed loops -----------------------------------------------------------
    def transformed_closed_loop(self) -> VectorField:
        """Form field under `u = k(y, u_hat)`; the input is `u_hat`."""
        open_loop = self.form.vector_field()

        def f(y: Sequence[Scalar], u_hat: Scalar) -> list[Scalar]:
            return open_loop(y, self.feedback(y, u_hat))

        return VectorField(self.n, f)

    def closed_loop(self) -> VectorField:
        """Original-coordinate field under `u = k(phi(x), u_hat)`."""
        if self.source is None:
            return self.transformed_closed_loop()
        open_loop = self.source.vector_field()

        def f(x: Sequence[Scalar], u_hat: Scalar) -> list[Scalar]:
            return open_loop(x, self.control(x, u_hat))

        return VectorField(self.n, f)

    # ----- metrics ----------------------------------------------------------------
    def metric(self) -> MetricField:
        """`G_n` in form coordinates, built by the block recursion."""
        return MetricField(
            self.n, lambda y: metric_recursive(self, y), MetricProvenance.RECURSIVE
        )

    def native_metric(self) -> MetricField:
        """Metric in original coordinates: `phi^* G_n`, or `G_n` itself."""
        if self.coordinate_map is None:
            return self.metric()
        coordinates = self.coordinate_map
        metric = self.metric()
        return MetricField(
            self.n,
            lambda x: pullback_metric(metric, coordinates, x),
            MetricProvenance.PULLBACK,
        )


def _virtual_control(
    form: ParametricForm, l: int, k_l: StateFunction
) -> StateFunction:
    b_l = form.b[l - 1]

    def phi_l(x: Sequence[Scalar]) -> Scalar:
        return (k_l(x) - form.h_value(l, x)) / b_l

    return phi_l


def _gain(
    form: ParametricForm, lam: float, l: int, phi: Sequence[StateFunction]
) -> StateFunction:
    n = form.n
    b_prev = form.b[l - 2] if l >= 2 else 0.0
    half_rate = 0.5 * lam

    def k_l(x: Sequence[Scalar]) -> Scalar:
        value = -half_rate * (x[l - 1] - phi[l - 1](x))
        if l >= 2:
            phi_before: Scalar = phi[l - 2](x) if l >= 3 else 0.0
            value = value - b_prev * (x[l - 2] - phi_before)
            # phi_{l-1} only sees x_1..x_{l-1}; the rest of the field is zeroed
            direction = [form.drift(i, x) for i in range(1, l)]
            direction += [0.0] * (n - l + 1)
            value = value + autodiff.directional_derivative(phi[l - 1], x, direction)
        return value

    return k_l


def _zero(_: Sequence[Scalar]) -> Scalar:
    return 0.0


def synthesize(form: ParametricForm, lam: float) -> SynthesizedController:
    """Run the backstepping recursion on a parametric-strict-feedback form.

    Args:
        form: A validated parametric system or the unit-gain transform of a
            strict-feedback system.
        lam: Contraction rate, strictly positive.

    Returns:
        A controller whose closures evaluate over floats and nested duals.
    """
    if not lam > 0.0:
        raise ValueError("contraction rate lambda must be positive")
    phi: list[StateFunction] = [_zero]
    kseq: list[StateFunction] = []
    for l in range(1, form.n + 1):
        k_l = _gain(form, lam, l, phi)
        kseq.append(k_l)
        if l < form.n:
            phi.append(_virtual_control(form, l, k_l))
    logger.debug("synthesized controller n=%d lambda=%g", form.n, lam)
    return SynthesizedController(float(lam), form, tuple(phi), tuple(kseq))


def strict_feedback_controller(
    sys: StrictFeedbackSystem, lam: float
) -> SynthesizedController:
    """Synthesize on the pushforward form and act through `u = k(phi(x), u_hat)`."""
    form = to_parametric(sys)
    ctrl = synthesize(form, lam)
    return replace(ctrl, source=sys, coordinate_map=form.coordinates)


def controller_for(sys: System, lam: float) -> SynthesizedController:
    if isinstance(sys, StrictFeedbackSystem):
        return strict_feedback_controller(sys, lam)
    return synthesize(sys, lam)


def psi_map(ctrl: SynthesizedController, y: Sequence[Scalar]) -> list[Scalar]:
    """`psi(y) = (y_1, y_2 - phi_1(y), ..., y_n - phi_{n-1}(y))`."""
    return ctrl.error_coordinates(y)


def invert_psi(ctrl: SynthesizedController, z: Sequence[Scalar]) -> list[Scalar]:
    """Inverse of `psi` by forward substitution `y_l = z_l + phi_{l-1}(y)`."""
    n = ctrl.n
    y: list[Scalar] = []
    for l in range(1, n + 1):
        prefix = y + [0.0] * (n - len(y))
        y.append(z[l - 1] + ctrl.phi[l - 1](prefix))
    return y


def metric_recursive(ctrl: SynthesizedController, y: Sequence[Scalar]) -> Matrix:
    """Block recursion `G_1 = [1]`, `G_l = [[G_{l-1} + a^T a, -a^T], [-a, 1]]`.

    `a` is the gradient of `phi_{l-1}` in its own arguments `y_1..y_{l-1}`.
    """
    n = ctrl.n
    g: Matrix = [[1.0]]
    for l in range(2, n + 1):
        grad = [
            autodiff.directional_derivative(
                ctrl.phi[l - 1], y, [1.0 if j == i else 0.0 for j in range(n)]
            )
            for i in range(l - 1)
        ]
        grown: Matrix = []
        for i in range(l - 1):
            row = [g[i][j] + grad[i] * grad[j] for j in range(l - 1)]
            row.append(-grad[i])
            grown.append(row)
        grown.append([-a for a in grad] + [1.0])
        g = grown
    return g


def metric_from_psi(ctrl: SynthesizedController, y: Sequence[Scalar]) -> Matrix:
    """`J_psi(y)^T J_psi(y)`."""
    jac = autodiff.jacobian(ctrl.error_coordinates, list(y))
    return _matmul(_transpose(jac), jac)


def pullback_metric(
    metric: MetricField, coordinates: CoordinateMap, x: Sequence[Scalar]
) -> Matrix:
    """`Theta(x)^T G(phi(x)) Theta(x)` with `Theta = dphi/dx` by forward mode.

    Raises:
        SingularJacobianError: when `Theta(x)` is singular.
    """
    theta = autodiff.jacobian(coordinates.forward, list(x))
    primal_theta = np.array(
        [[autodiff.primal(v) for v in row] for row in theta], dtype=np.float64
    )
    if np.linalg.matrix_rank(primal_theta) < coordinates.n:
        raise SingularJacobianError(
            "coordinate map Jacobian is singular",
            {f"x{i + 1}": autodiff.primal(v) for i, v in enumerate(x)},
        )
    inner = metric.generic(coordinates.forward(x))
    return _matmul(_transpose(theta), _matmul(inner, theta))


def riemannian_distance(
    ctrl: SynthesizedController, x: Sequence[float], x_prime: Sequence[float]
) -> float:
    """Distance induced by `G_n`: Euclidean distance of the error coordinates."""
    z = np.array([float(v) for v in ctrl.isometry(x)], dtype=np.float64)
    z_prime = np.array([float(v) for v in ctrl.isometry(x_prime)], dtype=np.float64)
    return float(np.linalg.norm(z - z_prime))


# ----- error-coordinate dynamics --------------------------------------------------
def error_dynamics_matrix(ctrl: SynthesizedController) -> FloatArray:
    """`S - (lam/2) I` with `S_{l,l+1} = b_l = -S_{l+1,l}`."""
    n = ctrl.n
    a = -0.5 * ctrl.lam * np.eye(n)
    for l, b_l in enumerate(ctrl.form.b):
        a[l, l + 1] += b_l
        a[l + 1, l] -= b_l
    return a


def error_dynamics_defect(
    ctrl: SynthesizedController, y: Sequence[float], u_hat: float
) -> float:
    """Largest deviation of `J_psi f_closed` from the linear error dynamics."""
    n = ctrl.n
    f_closed = ctrl.transformed_closed_loop()
    z_dot = np.array(
        autodiff.jvp(ctrl.error_coordinates, list(y), f_closed(list(y), u_hat)),
        dtype=np.float64,
    )
    z = np.array([float(v) for v in ctrl.error_coordinates(list(y))])
    expected = error_dynamics_matrix(ctrl) @ z
    expected[n - 1] += u_hat
    return float(np.max(np.abs(z_dot - expected)))
