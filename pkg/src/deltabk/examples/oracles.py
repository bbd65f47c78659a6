"""
Hand-derived closed forms for the built-in models.

Everything here is written out term by term with `math` and shares no code
with the synthesis pipeline, so agreement between the two is evidence that
both are right. Generator closed forms are for contraction rate 2.
"""

from __future__ import annotations

import math
from typing import Sequence

from .generator import GeneratorParameters

Vector = Sequence[float]


# ----- synchronous generator ----------------------------------------------------------
def generator_field(p: GeneratorParameters, x: Vector, u: float) -> list[float]:
    s = math.sin(p.d0 + x[0])
    return [
        x[1],
        -p.E * x[1]
        + p.F * p.Pm0
        + p.Vs * p.G_gen * p.eq0 * s
        + p.Vs * p.G_gen * s * x[2],
        -p.I * x[2] + p.J * p.Vs * s * x[1] - p.I * p.eq0 + p.I * p.Kc * u,
    ]


def coordinate_map(p: GeneratorParameters, x: Vector) -> list[float]:
    return [x[0], x[1], p.Vs * p.G_gen * math.sin(p.d0 + x[0]) * x[2]]


def coordinate_jacobian(p: GeneratorParameters, x: Vector) -> list[list[float]]:
    vg = p.Vs * p.G_gen
    return [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [vg * math.cos(p.d0 + x[0]) * x[2], 0.0, vg * math.sin(p.d0 + x[0])],
    ]


def transformed_field(p: GeneratorParameters, y: Vector, u: float) -> list[float]:
    s = math.sin(p.d0 + y[0])
    cot = math.cos(p.d0 + y[0]) / s
    vge = p.Vs * p.G_gen * p.eq0
    return [
        y[1],
        -p.E * y[1] + p.F * p.Pm0 + vge * s + y[2],
        -p.I * vge * s
        + p.J * p.Vs**2 * p.G_gen * s**2 * y[1]
        - p.I * y[2]
        + cot * y[1] * y[2]
        + p.I * p.Kc * p.Vs * p.G_gen * s * u,
    ]


def virtual_controls(p: GeneratorParameters, eta: Vector) -> tuple[float, float]:
    """`(phi_1, phi_2)` in unit-gain coordinates."""
    phi1 = -eta[0]
    phi2 = (
        -2.0 * eta[0]
        + (p.E - 2.0) * eta[1]
        - p.F * p.Pm0
        - p.Vs * p.G_gen * p.eq0 * math.sin(p.d0 + eta[0])
    )
    return phi1, phi2


def control_oracle(p: GeneratorParameters, eta: Vector, u_hat: float) -> float:
    """Generator control law `k(eta, u_hat)` in unit-gain coordinates."""
    E, I = p.E, p.I  # noqa: E741
    s = math.sin(p.d0 + eta[0])
    c = math.cos(p.d0 + eta[0])
    vge = p.Vs * p.G_gen * p.eq0
    gain = I * p.Kc * p.Vs * p.G_gen * s
    numerator = (
        (-5.0 + 3.0 * E - E**2) * eta[1]
        - 3.0 * eta[0]
        + (E - 3.0 + I) * eta[2]
        + (E - 3.0) * p.F * p.Pm0
        + (E - 3.0 + I) * vge * s
        - vge * c * eta[1]
        - p.J * p.Vs**2 * p.G_gen * s**2 * eta[1]
        - (c / s) * eta[1] * eta[2]
    )
    return numerator / gain + u_hat / gain


def metric_oracle(p: GeneratorParameters, y: Vector) -> list[list[float]]:
    """Contraction metric of the generator loop in unit-gain coordinates."""
    a = p.Vs * p.G_gen * p.eq0 * math.cos(p.d0 + y[0])
    E = p.E
    m11 = 2.0 + (2.0 + a) ** 2
    m12 = 5.0 - 2.0 * E - (E - 2.0) * a
    m13 = 2.0 + a
    m22 = (E - 2.0) ** 2 + 1.0
    m23 = 2.0 - E
    return [[m11, m12, m13], [m12, m22, m23], [m13, m23, 1.0]]


# ----- two-state demo: x1' = sin(x1) + x2, x2' = u ---------------------------------
def two_state_virtual_control(lam: float, x: Vector) -> float:
    return -0.5 * lam * x[0] - math.sin(x[0])


def two_state_control(lam: float, x: Vector, u_hat: float) -> float:
    half = 0.5 * lam
    phi1 = -half * x[0] - math.sin(x[0])
    dphi1 = -half - math.cos(x[0])
    return -x[0] - half * (x[1] - phi1) + dphi1 * (math.sin(x[0]) + x[1]) + u_hat


def two_state_metric(lam: float, x: Vector) -> list[list[float]]:
    slope = 0.5 * lam + math.cos(x[0])
    return [[1.0 + slope**2, slope], [slope, 1.0]]
