"""
Synchronous generator on an infinite bus, with excitation control.

States are deviations from an operating point: `x1` load angle, `x2` speed,
`x3` quadrature EMF; the input drives the excitation voltage. Parameters are
the composite constants of the swing and flux-decay equations, taken as
given values rather than derived from machine data.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Mapping

from ..commons import ValidationError
from ..model import StrictFeedbackSystem
from ..sampling import Box

H_TEXT = (
    "0",
    "-E*x2 + F*Pm0 + Vs*G_gen*eq0*sin(d0 + x1)",
    "-I*x3 + J*Vs*sin(d0 + x1)*x2 - I*eq0",
)
G_TEXT = ("1", "Vs*G_gen*sin(d0 + x1)", "I*Kc")

DEFAULT_BOX = Box.cube(3, 0.8)

# Distance kept from the zeros of sin(d0 + x1) when bounding simulations.
ESCAPE_MARGIN = 0.05


@dataclass(frozen=True)
class GeneratorParameters:
    E: float = 1.0
    F: float = 1.0
    G_gen: float = -1.0
    I: float = 1.0  # noqa: E741
    J: float = 1.0
    Vs: float = 1.0
    Kc: float = 1.0
    d0: float = math.pi / 3
    eq0: float = 1.0
    Pm0: float = 1.0

    def __post_init__(self) -> None:
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValidationError(f"generator parameter {f.name} must be finite")
        if self.Vs * self.G_gen == 0.0:
            raise ValidationError("generator requires Vs*G_gen != 0")
        if self.I == 0.0:
            raise ValidationError("generator requires I != 0")
        if self.Kc == 0.0:
            raise ValidationError("generator requires Kc != 0")

    @classmethod
    def from_mapping(cls, values: Mapping[str, float]) -> "GeneratorParameters":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValidationError(
                f"unknown generator parameters: {', '.join(unknown)}"
            )
        return cls(**{k: float(v) for k, v in values.items()})

    def as_params(self) -> dict[str, float]:
        return asdict(self)


def _sin_safe_interval(d0: float) -> tuple[float, float]:
    """Open interval of `x1` around 0 on which `sin(d0 + x1)` has no zero."""
    k = math.floor(d0 / math.pi)
    return k * math.pi - d0, (k + 1) * math.pi - d0


def generator_system(
    params: GeneratorParameters = GeneratorParameters(),
    box: Box = DEFAULT_BOX,
) -> StrictFeedbackSystem:
    """Three-state strict-feedback generator model.

    Raises:
        ValidationError: when `sin(d0 + x1)` vanishes somewhere in the box.
    """
    lo, hi = _sin_safe_interval(params.d0)
    if not lo < box.lower[0] <= box.upper[0] < hi:
        raise ValidationError(
            f"sin(d0 + x1) vanishes for x1 in [{box.lower[0]}, {box.upper[0]}]"
        )
    return StrictFeedbackSystem.from_text(
        H_TEXT,
        G_TEXT,
        box,
        params.as_params(),
        name="generator",
        escape_box=escape_box(params),
    )


def escape_box(params: GeneratorParameters = GeneratorParameters()) -> Box:
    """Region where the generator closed loop stays defined."""
    lo, hi = _sin_safe_interval(params.d0)
    inf = math.inf
    return Box((lo + ESCAPE_MARGIN, -inf, -inf), (hi - ESCAPE_MARGIN, inf, inf))


def equilibrium_form_state(
    params: GeneratorParameters = GeneratorParameters(),
) -> tuple[float, float, float]:
    """Rest point of the unit-gain form with zero speed and zero angle."""
    s = math.sin(params.d0)
    return 0.0, 0.0, -params.F * params.Pm0 - params.Vs * params.G_gen * params.eq0 * s
