"""Validity boxes and seeded low-discrepancy sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .commons import FloatArray


@dataclass(frozen=True)
class Box:
    """Axis-aligned box `lower[i] <= x[i] <= upper[i]`; bounds may be infinite."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lower) != len(self.upper):
            raise ValueError("box bounds must have the same dimension")
        if not self.lower:
            raise ValueError("box must have at least one coordinate")
        for lo, hi in zip(self.lower, self.upper):
            if math.isnan(lo) or math.isnan(hi) or lo > hi:
                raise ValueError(f"invalid box interval [{lo}, {hi}]")

    @classmethod
    def from_intervals(cls, intervals: Sequence[Sequence[float]]) -> "Box":
        return cls(
            tuple(float(lo) for lo, _ in intervals),
            tuple(float(hi) for _, hi in intervals),
        )

    @classmethod
    def cube(cls, n: int, radius: float) -> "Box":
        return cls((-radius,) * n, (radius,) * n)

    @classmethod
    def unbounded(cls, n: int) -> "Box":
        return cls((-math.inf,) * n, (math.inf,) * n)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.lower, self.upper))

    def is_bounded(self) -> bool:
        return all(math.isfinite(v) for v in (*self.lower, *self.upper))

    def contains(self, x: Sequence[float], tol: float = 0.0) -> bool:
        return all(
            lo - tol <= float(v) <= hi + tol
            for v, lo, hi in zip(x, self.lower, self.upper)
        )

    def sample(self, count: int, seed: int) -> FloatArray:
        return halton_points(self.intervals, count, seed)

    def to_list(self) -> list[list[float]]:
        return [[lo, hi] for lo, hi in self.intervals]


def halton_points(
    intervals: Sequence[tuple[float, float]], count: int, seed: int
) -> FloatArray:
    """`count` scrambled Halton points scaled into `intervals`.

    Deterministic for a given seed. Degenerate intervals (lo == hi) are
    allowed and yield that constant coordinate.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    lower = np.array([lo for lo, _ in intervals], dtype=np.float64)
    upper = np.array([hi for _, hi in intervals], dtype=np.float64)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError("cannot sample an unbounded interval")
    sampler = qmc.Halton(d=len(intervals), scramble=True, seed=seed)
    unit = sampler.random(count)
    return lower + unit * (upper - lower)
