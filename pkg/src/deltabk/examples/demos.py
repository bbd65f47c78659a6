"""Small systems whose controllers can be checked by hand."""

from __future__ import annotations

from ..model import ParametricStrictFeedbackSystem
from ..sampling import Box


def scalar_demo() -> ParametricStrictFeedbackSystem:
    """`x1' = u`; the controller is `k(x, u_hat) = -(lam/2) x + u_hat`."""
    return ParametricStrictFeedbackSystem.from_text(
        h=["0"], b=[], g="1", box=Box.cube(1, 1.0), name="scalar-demo"
    )


def two_state_demo() -> ParametricStrictFeedbackSystem:
    """`x1' = sin(x1) + x2`, `x2' = u`: one backstepping step."""
    return ParametricStrictFeedbackSystem.from_text(
        h=["sin(x1)", "0"], b=[1.0], g="1", box=Box.cube(2, 1.0), name="two-state-demo"
    )
