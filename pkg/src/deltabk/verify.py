"""
Pointwise certification of the contraction conditions, aggregated over a box.

The states-and-inputs condition

    X^T (F + lam G) X + 2 Y^T B^T G X <= alpha (X^T G X)^(1/2) |Y|    for all X, Y

with `F = J^T G + G J + D_f G` and `B = df/du_hat` splits exactly into

    (a) lambda_max(F + lam G) <= 0
    (b) 4 lambda_max(G^-1 (G B)(G B)^T) <= alpha^2

(a) is the `Y = 0` case; (b) follows because the left side is linear in `Y`
while the right side grows like `|Y|`; Cauchy-Schwarz gives sufficiency.
`docs/CONTRACTION.md` has the full argument. Tolerances are implementation
policy; the conditions themselves are exact.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.linalg
from numpy.linalg import LinAlgError

from . import autodiff
from .commons import (
    DEFAULT_INPUT_INTERVAL,
    DEFAULT_SEED,
    FD_STEP,
    TOL_INPUT,
    TOL_METRIC_DERIVATIVE,
    TOL_PD,
    TOL_STATE,
    DomainError,
    FloatArray,
)
from .model import VectorField
from .sampling import Box, halton_points
from .synthesis import MetricField, SynthesizedController

logger = logging.getLogger(__name__)

TOLERANCE_POLICY = (
    "numeric tolerances are implementation policy chosen above accumulated "
    "float64 differentiation and eigen-solver noise; the contraction "
    "conditions themselves are exact"
)

# Failures kept verbatim in a report; the rest are only counted.
MAX_RECORDED_FAILURES = 10


@dataclass(frozen=True)
class Tolerances:
    state: float = TOL_STATE
    input: float = TOL_INPUT
    pd: float = TOL_PD
    fd: float = TOL_METRIC_DERIVATIVE


@dataclass(frozen=True)
class DefectResult:
    """Outcome of the pointwise checks at one `(x, u_hat)`."""

    point: tuple[float, ...]
    input: float
    max_eigenvalue_state_defect: float
    input_margin: float
    min_metric_eigenvalue: float
    metric_derivative_gap: float
    passed: bool


def _symmetric(a: FloatArray) -> FloatArray:
    return 0.5 * (a + a.T)


def state_defect(
    f_closed: VectorField,
    G: MetricField,
    lam: float,
    x: Sequence[float],
    u: float,
) -> float:
    """Largest eigenvalue of `J^T G + G J + D_f G + lam G`; `<= 0` means contracting."""
    jac = f_closed.state_jacobian(x, u)
    metric = G(x)
    flow = f_closed.evaluate(x, u)
    a = jac.T @ metric + metric @ jac + G.derivative_along(x, flow) + lam * metric
    return float(scipy.linalg.eigvalsh(_symmetric(a))[-1])


def input_defect(
    f_closed: VectorField,
    G: MetricField,
    lam: float,
    alpha: float,
    x: Sequence[float],
    u: float,
) -> float:
    """`alpha^2 - 4 lambda_max(G^-1 (G B)(G B)^T)`; `>= 0` means the input gain holds.

    `lam` does not enter the input part of the condition; it is accepted so
    both checks share a signature.
    """
    if alpha < 0.0:
        raise ValueError("alpha must be nonnegative")
    metric = _symmetric(G(x))
    gb = metric @ f_closed.input_jacobian(x, u)
    top = scipy.linalg.eigh(np.outer(gb, gb), metric, eigvals_only=True)[-1]
    return float(alpha * alpha - 4.0 * top)


def positive_definite(
    G: MetricField, x: Sequence[float], tol: float = TOL_PD
) -> tuple[bool, float]:
    """Whether `G(x)` is positive definite, with its smallest eigenvalue."""
    smallest = float(scipy.linalg.eigvalsh(_symmetric(G(x)))[0])
    return smallest > tol, smallest


def metric_derivative_gap(
    f_closed: VectorField, G: MetricField, x: Sequence[float], u: float
) -> float:
    """Largest entry of `|D_f G (forward mode) - D_f G (central differences)|`."""
    flow = f_closed.evaluate(x, u)
    exact = G.derivative_along(x, flow)
    forward = G([p + FD_STEP * v for p, v in zip(x, flow)])
    backward = G([p - FD_STEP * v for p, v in zip(x, flow)])
    estimate = (forward - backward) / (2.0 * FD_STEP)
    return float(np.max(np.abs(exact - estimate)))


# ----- Lyapunov function ------------------------------------------------------------
def lyapunov_value(ctrl: SynthesizedController, y: Sequence[float]) -> float:
    """`V(y) = 1/2 sum (y_{l+1} - phi_l(y))^2 = 1/2 |psi(y)|^2`, form coordinates."""
    z = [float(v) for v in ctrl.error_coordinates(list(y))]
    return 0.5 * float(np.dot(z, z))


def _lyapunov(ctrl: SynthesizedController) -> autodiff.ScalarFunction:
    def v(y: Sequence[autodiff.Scalar]) -> autodiff.Scalar:
        total: autodiff.Scalar = 0.0
        for z in ctrl.error_coordinates(y):
            total = total + z * z
        return 0.5 * total

    return v


def lyapunov_derivative(
    ctrl: SynthesizedController, y: Sequence[float], u_hat: float
) -> float:
    """`dV/dt` along the transformed closed loop at `(y, u_hat)`."""
    flow = ctrl.transformed_closed_loop()(list(y), u_hat)
    return float(autodiff.directional_derivative(_lyapunov(ctrl), list(y), flow))


def lyapunov_hessian(ctrl: SynthesizedController, y: Sequence[float]) -> FloatArray:
    return np.array(autodiff.hessian(_lyapunov(ctrl), list(y)), dtype=np.float64)


def lyapunov_curvature(ctrl: SynthesizedController, y: Sequence[float]) -> FloatArray:
    """`sum_i psi_i(y) Hess psi_i(y)`, the part of `Hess V` beyond `G_n`."""
    n = ctrl.n
    z = [float(v) for v in ctrl.error_coordinates(list(y))]
    total = np.zeros((n, n))
    for i in range(1, n):
        if z[i] == 0.0:
            continue

        def component(p: Sequence[autodiff.Scalar], i: int = i) -> autodiff.Scalar:
            return ctrl.error_coordinates(p)[i]

        total += z[i] * np.array(autodiff.hessian(component, list(y)), dtype=float)
    return total


def lyapunov_hessian_defect(ctrl: SynthesizedController, y: Sequence[float]) -> float:
    """Largest entry of `|Hess V - G_n - sum_i psi_i Hess psi_i|`."""
    residual = (
        lyapunov_hessian(ctrl, y) - ctrl.metric()(y) - lyapunov_curvature(ctrl, y)
    )
    return float(np.max(np.abs(residual)))


# ----- region verification ------------------------------------------------------------
def check_point(
    f_closed: VectorField,
    G: MetricField,
    lam: float,
    alpha: float,
    x: Sequence[float],
    u: float,
    tolerances: Tolerances = Tolerances(),
) -> DefectResult:
    """All pointwise checks at `(x, u)`; domain and eigen-solver errors propagate."""
    defect = state_defect(f_closed, G, lam, x, u)
    margin = input_defect(f_closed, G, lam, alpha, x, u)
    _, smallest = positive_definite(G, x, tolerances.pd)
    gap = metric_derivative_gap(f_closed, G, x, u)
    passed = (
        defect <= tolerances.state
        and margin >= -tolerances.input
        and smallest > tolerances.pd
        and gap <= tolerances.fd
    )
    return DefectResult(
        point=tuple(float(v) for v in x),
        input=float(u),
        max_eigenvalue_state_defect=defect,
        input_margin=margin,
        min_metric_eigenvalue=smallest,
        metric_derivative_gap=gap,
        passed=passed,
    )


@dataclass
class VerificationReport:
    """Worst-case statistics of a region verification; deterministic per seed."""

    label: str
    samples: int
    seed: int
    box: list[list[float]]
    input_interval: tuple[float, float]
    lam: float
    alpha: float
    tolerances: Tolerances
    metric_provenance: str
    worst_state_defect: float = -np.inf
    worst_abs_state_defect: float = 0.0
    worst_state_point: list[float] = field(default_factory=list)
    worst_input_margin: float = np.inf
    min_metric_eigenvalue: float = np.inf
    worst_metric_derivative_gap: float = 0.0
    evaluated: int = 0
    failure_count: int = 0
    failures: list[str] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)
    passed: bool = False

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["input_interval"] = list(self.input_interval)
        data["tolerance_policy"] = TOLERANCE_POLICY
        for key in (
            "worst_state_defect",
            "worst_input_margin",
            "min_metric_eigenvalue",
        ):
            if not np.isfinite(data[key]):
                data[key] = None
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def verify_region(
    f_closed: VectorField,
    G: MetricField,
    lam: float,
    alpha: float,
    box: Box,
    samples: int,
    seed: int = DEFAULT_SEED,
    *,
    input_interval: tuple[float, float] = DEFAULT_INPUT_INTERVAL,
    tolerances: Tolerances = Tolerances(),
    label: str = "closed-loop",
) -> VerificationReport:
    """Run `check_point` on seeded Halton samples of `box x input_interval`.

    Pointwise failures (domain errors, eigen-solver failures) are recorded in
    the report, never raised. Aggregates are max/min reductions, so the
    result does not depend on evaluation order.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    report = VerificationReport(
        label=label,
        samples=samples,
        seed=seed,
        box=box.to_list(),
        input_interval=(float(input_interval[0]), float(input_interval[1])),
        lam=float(lam),
        alpha=float(alpha),
        tolerances=tolerances,
        metric_provenance=G.provenance.value,
    )
    points = halton_points([*box.intervals, report.input_interval], samples, seed)
    for row in points:
        x, u = [float(v) for v in row[:-1]], float(row[-1])
        try:
            result = check_point(f_closed, G, lam, alpha, x, u, tolerances)
        except (DomainError, LinAlgError, ValueError) as exc:
            report.failure_count += 1
            if len(report.failures) < MAX_RECORDED_FAILURES:
                report.failures.append(f"x={x} u={u}: {exc}")
            logger.warning("verification failed at x=%s u=%s: %s", x, u, exc)
            continue
        report.evaluated += 1
        if result.max_eigenvalue_state_defect > report.worst_state_defect:
            report.worst_state_defect = result.max_eigenvalue_state_defect
            report.worst_state_point = list(result.point)
        report.worst_abs_state_defect = max(
            report.worst_abs_state_defect, abs(result.max_eigenvalue_state_defect)
        )
        report.worst_input_margin = min(report.worst_input_margin, result.input_margin)
        report.min_metric_eigenvalue = min(
            report.min_metric_eigenvalue, result.min_metric_eigenvalue
        )
        report.worst_metric_derivative_gap = max(
            report.worst_metric_derivative_gap, result.metric_derivative_gap
        )
        if not result.passed:
            logger.debug("point check failed: %s", result)

    report.checks = {
        "evaluation": report.failure_count == 0,
        "state": report.worst_state_defect <= tolerances.state,
        "input": report.worst_input_margin >= -tolerances.input,
        "positive_definite": report.min_metric_eigenvalue > tolerances.pd,
        "metric_derivative": report.worst_metric_derivative_gap <= tolerances.fd,
    }
    report.passed = all(report.checks.values())
    logger.info(
        "%s: %d samples, worst state defect %.3e, worst input margin %.3e",
        label,
        samples,
        report.worst_state_defect,
        report.worst_input_margin,
    )
    return report


def sampled_condition_violated(
    a: FloatArray,
    metric: FloatArray,
    b: FloatArray,
    alpha: float,
    pairs: int = 10_000,
    seed: int = DEFAULT_SEED,
    tol: float = 1e-9,
) -> bool:
    """Whether some sampled `(X, Y)` violates the bilinear condition."""
    rng = np.random.default_rng(seed)
    n = metric.shape[0]
    gb = metric @ b
    xs = rng.normal(size=(pairs, n))
    xs /= np.linalg.norm(xs, axis=1, keepdims=True)
    ys = rng.choice([-1.0, 1.0], size=pairs) * rng.uniform(0.0, 10.0, size=pairs)
    lhs = np.einsum("ki,ij,kj->k", xs, a, xs) + 2.0 * ys * (xs @ gb)
    rhs = alpha * np.sqrt(np.einsum("ki,ij,kj->k", xs, metric, xs)) * np.abs(ys)
    return bool(np.any(lhs > rhs + tol))


__all__ = [
    "DefectResult",
    "Tolerances",
    "VerificationReport",
    "check_point",
    "input_defect",
    "lyapunov_curvature",
    "lyapunov_derivative",
    "lyapunov_hessian",
    "lyapunov_hessian_defect",
    "lyapunov_value",
    "metric_derivative_gap",
    "positive_definite",
    "sampled_condition_violated",
    "state_defect",
    "verify_region",
]
