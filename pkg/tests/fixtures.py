"""Shared builders and comparison helpers for the deltabk test suite."""

from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from deltabk.examples import generator_system, scalar_demo, two_state_demo
from deltabk.examples.generator import DEFAULT_BOX, GeneratorParameters
from deltabk.model import VectorField
from deltabk.sampling import Box
from deltabk.synthesis import (
    SynthesizedController,
    strict_feedback_controller,
    synthesize,
)

REPO_ROOT = Path(__file__).resolve().parent.parent
CONFIGS = REPO_ROOT / "configs"

DEFAULT_PARAMS = GeneratorParameters()


@lru_cache(maxsize=None)
def generator_controller(lam: float = 2.0) -> SynthesizedController:
    return strict_feedback_controller(generator_system(), lam)


@lru_cache(maxsize=None)
def scalar_controller(lam: float = 2.0) -> SynthesizedController:
    return synthesize(scalar_demo(), lam)


@lru_cache(maxsize=None)
def two_state_controller(lam: float = 2.0) -> SynthesizedController:
    return synthesize(two_state_demo(), lam)


def box_points(box: Box, count: int, seed: int = 42) -> list[list[float]]:
    return [row.tolist() for row in box.sample(count, seed)]


def generator_points(count: int, seed: int = 42) -> list[list[float]]:
    return box_points(DEFAULT_BOX, count, seed)


def linear_scalar_loop(lam: float) -> VectorField:
    """`x' = -(lam/2) x + u`."""
    return VectorField(1, lambda x, u: [-0.5 * lam * x[0] + u])


def max_relative_error(
    actual: Sequence[Sequence[float]] | Sequence[float],
    expected: Sequence[Sequence[float]] | Sequence[float],
) -> float:
    a = np.asarray(actual, dtype=float)
    b = np.asarray(expected, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))
