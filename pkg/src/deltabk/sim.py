"""
Fixed-step closed-loop simulation and trajectory-pair bound checks.

Trajectories are integrated with classical fourth-order Runge-Kutta on a
uniform grid `t_k = k h`. Piecewise-constant inputs must have their
breakpoints on that grid, so each step sees a constant input and keeps full
order. Pair checks measure the distance induced by the synthesized metric,
which is the Euclidean distance of the error coordinates.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Protocol, Sequence, Union

import numpy as np

from .commons import (
    DEFAULT_EPS_EQ,
    DEFAULT_EPS_INT,
    DEFAULT_STEP,
    DomainError,
    FloatArray,
    TrajectoryEscapeError,
)
from .expr import Expression, evaluate, free_variables, parse
from .model import VectorField, state_names
from .sampling import Box
from .synthesis import SynthesizedController, invert_psi

logger = logging.getLogger(__name__)

# Relative slack when snapping breakpoints and horizons to the step grid.
GRID_TOLERANCE = 1e-9


# ----- input signals --------------------------------------------------------------
class InputSignal(Protocol):
    def value(self, t: float) -> float: ...

    def stage_values(self, t: float, h: float) -> tuple[float, float, float]:
        """Inputs at the RK4 stage times `t`, `t + h/2` and `t + h`."""
        ...

    def check_grid(self, h: float) -> None: ...


def _on_grid(t: float, h: float) -> bool:
    steps = round(t / h)
    return abs(steps * h - t) <= GRID_TOLERANCE * max(1.0, abs(t))


@dataclass(frozen=True)
class PiecewiseConstantSignal:
    """`u(t) = v_i` on `[t_i, t_{i+1})`, 0 before `t_0`; the last value holds."""

    schedule: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.schedule:
            raise ValueError("schedule needs at least one (time, value) pair")
        if self.schedule[0][0] < 0.0:
            raise ValueError("schedule times must be nonnegative")
        for (t0, _), (t1, _) in zip(self.schedule, self.schedule[1:]):
            if not t1 > t0:
                raise ValueError("schedule times must be strictly increasing")
        for t, v in self.schedule:
            if not (math.isfinite(t) and math.isfinite(v)):
                raise ValueError("schedule entries must be finite")

    @classmethod
    def constant(cls, value: float) -> "PiecewiseConstantSignal":
        return cls(((0.0, float(value)),))

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "PiecewiseConstantSignal":
        return cls(tuple((float(t), float(v)) for t, v in pairs))

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.schedule)

    def value(self, t: float) -> float:
        current = 0.0
        for start, v in self.schedule:
            if start > t + GRID_TOLERANCE * max(1.0, abs(t)):
                break
            current = v
        return current

    def stage_values(self, t: float, h: float) -> tuple[float, float, float]:
        # breakpoints sit on the grid, so the input is constant over the step
        u = self.value(t)
        return u, u, u

    def check_grid(self, h: float) -> None:
        for t in self.breakpoints:
            if not _on_grid(t, h):
                raise ValueError(f"schedule breakpoint {t} is not a multiple of h={h}")

    def to_text(self) -> str:
        return "schedule " + ", ".join(f"[{t:g}, {v:g}]" for t, v in self.schedule)


@dataclass(frozen=True)
class ExpressionSignal:
    """Input given as an expression in `t`."""

    expression: Expression

    def __post_init__(self) -> None:
        unknown = free_variables(self.expression) - {"t", "pi"}
        if unknown:
            raise ValueError(
                f"input expression may only use t, got {', '.join(sorted(unknown))}"
            )

    @classmethod
    def from_text(cls, source: str) -> "ExpressionSignal":
        return cls(parse(source))

    def value(self, t: float) -> float:
        return float(evaluate(self.expression, {"t": t, "pi": math.pi}))

    def stage_values(self, t: float, h: float) -> tuple[float, float, float]:
        return self.value(t), self.value(t + 0.5 * h), self.value(t + h)

    def check_grid(self, h: float) -> None:
        return None


Signal = Union[PiecewiseConstantSignal, ExpressionSignal]

ZERO_INPUT = PiecewiseConstantSignal.constant(0.0)


def grid_steps(t_end: float, h: float) -> int:
    """Number of steps of size `h` reaching `t_end` exactly."""
    if not h > 0.0:
        raise ValueError("step size h must be positive")
    if t_end < 0.0:
        raise ValueError("t_end must be nonnegative")
    if not _on_grid(t_end, h):
        raise ValueError(f"t_end={t_end} is not a multiple of h={h}")
    return int(round(t_end / h))


def sup_norm_difference(
    a: InputSignal, b: InputSignal, t_end: float, h: float
) -> float:
    """`sup |a - b|` over the input evaluations of RK4 on `[0, t_end]`."""
    steps = grid_steps(t_end, h)
    worst = abs(a.value(0.0) - b.value(0.0))
    for k in range(steps):
        t = k * h
        for ua, ub in zip(a.stage_values(t, h), b.stage_values(t, h)):
            worst = max(worst, abs(ua - ub))
    return float(worst)


# ----- integration ----------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """States on a uniform grid; `inputs` holds the external input `u_hat(t_k)`."""

    times: FloatArray
    states: FloatArray
    inputs: FloatArray
    metadata: Mapping[str, Any] = field(default_factory=dict)
    escaped: bool = False
    message: str = ""

    @property
    def n(self) -> int:
        return int(self.states.shape[1])

    @property
    def final_state(self) -> FloatArray:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.times)


def _rk4_step(
    f: VectorField, x: FloatArray, u: tuple[float, float, float], h: float
) -> FloatArray:
    k1 = f.evaluate(x.tolist(), u[0])
    k2 = f.evaluate((x + 0.5 * h * k1).tolist(), u[1])
    k3 = f.evaluate((x + 0.5 * h * k2).tolist(), u[1])
    k4 = f.evaluate((x + h * k3).tolist(), u[2])
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(
    f_closed: VectorField,
    x0: Sequence[float],
    signal: InputSignal = ZERO_INPUT,
    t_end: float = 1.0,
    h: float = DEFAULT_STEP,
    *,
    escape_box: Optional[Box] = None,
    metadata: Optional[Mapping[str, Any]] = None,
) -> TrajectoryRecord:
    """Classical RK4 trajectory of `dx/dt = f_closed(x, u_hat(t))`.

    A non-finite state, a domain error or a state outside `escape_box` stops
    the run; the partial record is returned with `escaped` set.
    """
    steps = grid_steps(t_end, h)
    signal.check_grid(h)
    x = np.array([float(v) for v in x0], dtype=np.float64)
    if x.shape != (f_closed.n,):
        raise ValueError(f"initial state must have {f_closed.n} entries")

    times: list[float] = []
    states: list[FloatArray] = []
    inputs: list[float] = []
    message = ""
    for k in range(steps + 1):
        t = k * h
        if not np.all(np.isfinite(x)):
            message = f"non-finite state at t={t:.17g}"
            break
        if escape_box is not None and not escape_box.contains(x):
            message = f"state left the escape box at t={t:.17g}"
            break
        times.append(t)
        states.append(x)
        inputs.append(signal.value(t))
        if k == steps:
            break
        try:
            x = _rk4_step(f_closed, x, signal.stage_values(t, h), h)
        except (DomainError, OverflowError) as exc:
            message = f"integration stopped at t={t:.17g}: {exc}"
            break

    if message:
        logger.debug("trajectory aborted: %s", message)
    return TrajectoryRecord(
        times=np.array(times, dtype=np.float64),
        states=np.array(states, dtype=np.float64).reshape(len(states), f_closed.n),
        inputs=np.array(inputs, dtype=np.float64),
        metadata=dict(metadata or {}),
        escaped=bool(message),
        message=message,
    )


# ----- pair checks ----------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class PairReport:
    """Distances of a trajectory pair against the exponential bound."""

    kind: str
    first: TrajectoryRecord
    second: TrajectoryRecord
    distances: FloatArray
    bound: FloatArray
    input_gap: float
    worst_margin: float
    equality_gap: float
    checks: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def times(self) -> FloatArray:
        return self.first.times

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "grid_points": len(self.first),
            "x0": self.first.states[0].tolist(),
            "x0_prime": self.second.states[0].tolist(),
            "initial_distance": float(self.distances[0]),
            "final_distance": float(self.distances[-1]),
            "input_gap": float(self.input_gap),
            "worst_margin": float(self.worst_margin),
            "equality_gap": float(self.equality_gap),
            "checks": {name: bool(ok) for name, ok in self.checks.items()},
            "passed": bool(self.passed),
        }


def _error_states(
    ctrl: SynthesizedController, record: TrajectoryRecord, form_coordinates: bool
) -> FloatArray:
    psi = ctrl.error_coordinates if form_coordinates else ctrl.isometry
    return np.array(
        [[float(v) for v in psi(row.tolist())] for row in record.states],
        dtype=np.float64,
    )


def _pair(
    ctrl: SynthesizedController,
    f_closed: VectorField,
    x0: Sequence[float],
    x0_prime: Sequence[float],
    signal: InputSignal,
    signal_prime: InputSignal,
    t_end: float,
    h: float,
    escape_box: Optional[Box],
    form_coordinates: bool,
) -> tuple[TrajectoryRecord, TrajectoryRecord, FloatArray]:
    first = integrate(f_closed, x0, signal, t_end, h, escape_box=escape_box)
    second = integrate(
        f_closed, x0_prime, signal_prime, t_end, h, escape_box=escape_box
    )
    for record in (first, second):
        if record.escaped:
            raise TrajectoryEscapeError(record.message, record)
    gaps = _error_states(ctrl, first, form_coordinates) - _error_states(
        ctrl, second, form_coordinates
    )
    return first, second, np.linalg.norm(gaps, axis=1)


def gas_decay_check(
    ctrl: SynthesizedController,
    f_closed: VectorField,
    x0: Sequence[float],
    x0_prime: Sequence[float],
    signal: InputSignal = ZERO_INPUT,
    t_end: float = 5.0,
    h: float = DEFAULT_STEP,
    *,
    eps_int: float = DEFAULT_EPS_INT,
    eps_eq: float = DEFAULT_EPS_EQ,
    escape_box: Optional[Box] = None,
    form_coordinates: bool = False,
) -> PairReport:
    """Check `d(t) <= e^(-lam t/2) d(0) (1 + eps_int)` and the equality form.

    With a shared input the synthesized loop is linear in error coordinates,
    so the distance follows the envelope exactly: `|d(t) - e^(-lam t/2) d(0)|`
    must stay within `eps_eq d(0)`.

    Raises:
        TrajectoryEscapeError: when either integration aborted.
    """
    first, second, d = _pair(
        ctrl,
        f_closed,
        x0,
        x0_prime,
        signal,
        signal,
        t_end,
        h,
        escape_box,
        form_coordinates,
    )
    envelope = np.exp(-0.5 * ctrl.lam * first.times) * d[0]
    bound = envelope * (1.0 + eps_int)
    gap = float(np.max(np.abs(d - envelope)))
    checks = {
        "decay_bound": bool(np.all(d <= bound)),
        "decay_equality": bool(gap <= eps_eq * d[0]),
    }
    return PairReport(
        kind="gas",
        first=first,
        second=second,
        distances=d,
        bound=bound,
        input_gap=0.0,
        worst_margin=float(np.min(bound - d)),
        equality_gap=gap,
        checks=checks,
    )


def iss_bound_check(
    ctrl: SynthesizedController,
    f_closed: VectorField,
    x0: Sequence[float],
    x0_prime: Sequence[float],
    signal: InputSignal,
    signal_prime: InputSignal,
    t_end: float = 5.0,
    h: float = DEFAULT_STEP,
    *,
    eps_int: float = DEFAULT_EPS_INT,
    escape_box: Optional[Box] = None,
    form_coordinates: bool = False,
) -> PairReport:
    """Check `d(t) <= e^(-lam t/2) d(0) + (2/lam)(1 - e^(-lam t/2)) |u - u'|_inf`.

    Raises:
        TrajectoryEscapeError: when either integration aborted.
    """
    first, second, d = _pair(
        ctrl,
        f_closed,
        x0,
        x0_prime,
        signal,
        signal_prime,
        t_end,
        h,
        escape_box,
        form_coordinates,
    )
    lam = ctrl.lam
    input_gap = sup_norm_difference(signal, signal_prime, t_end, h)
    decay = np.exp(-0.5 * lam * first.times)
    bound = decay * d[0] + (2.0 / lam) * (1.0 - decay) * input_gap + eps_int
    margin = bound - d
    return PairReport(
        kind="iss",
        first=first,
        second=second,
        distances=d,
        bound=bound,
        input_gap=input_gap,
        worst_margin=float(np.min(margin)),
        equality_gap=float(np.max(np.abs(d - decay * d[0]))),
        checks={"iss_bound": bool(np.all(margin >= 0.0))},
    )


# ----- randomized pairs -------------------------------------------------------------
def _ball_point(rng: np.random.Generator, n: int, radius: float) -> FloatArray:
    direction = rng.normal(size=n)
    direction /= np.linalg.norm(direction)
    return radius * rng.uniform() ** (1.0 / n) * direction


def random_pair_states(
    ctrl: SynthesizedController,
    count: int,
    seed: int,
    radius: float,
    *,
    form_coordinates: bool = False,
) -> list[tuple[list[float], list[float]]]:
    """Initial-state pairs whose error coordinates lie in a ball of `radius`.

    The error-coordinate norm never grows along the unforced synthesized loop,
    so such pairs stay where the model is defined.
    """
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        states = []
        for _ in range(2):
            y = invert_psi(ctrl, _ball_point(rng, ctrl.n, radius).tolist())
            x = y if form_coordinates else ctrl.from_form(y)
            states.append([float(v) for v in x])
        pairs.append((states[0], states[1]))
    return pairs


def random_schedule(
    rng: np.random.Generator,
    t_end: float,
    h: float,
    pieces: int,
    amplitude: float,
) -> PiecewiseConstantSignal:
    """Piecewise-constant input with values in `[-amplitude, amplitude]`."""
    steps = grid_steps(t_end, h)
    cuts = sorted(
        set(int(k) for k in rng.integers(1, max(steps, 2), size=max(pieces - 1, 0)))
    )
    times = [0.0] + [k * h for k in cuts if k < steps]
    values = rng.uniform(-amplitude, amplitude, size=len(times))
    return PiecewiseConstantSignal(tuple(zip(times, values.tolist())))


# ----- CSV ----------------------------------------------------------------------------
def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _write(rows: list[list[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue()


def export_csv(record: TrajectoryRecord) -> str:
    """`t,x1,...,xn,u` with one row per grid point, 17 significant digits."""
    rows = [["t", *state_names(record.n), "u"]]
    for t, x, u in zip(record.times, record.states, record.inputs):
        rows.append([_fmt(t), *(_fmt(v) for v in x), _fmt(u)])
    return _write(rows)


def parse_csv(text: str) -> TrajectoryRecord:
    """Read back a table written by `export_csv`."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    n = len(header) - 2
    if n < 1 or header[0] != "t" or header[-1] != "u":
        raise ValueError("expected header t,x1,...,xn,u")
    data = np.array([[float(v) for v in row] for row in reader], dtype=np.float64)
    data = data.reshape(-1, n + 2)
    return TrajectoryRecord(
        times=data[:, 0].copy(),
        states=data[:, 1 : n + 1].copy(),
        inputs=data[:, n + 1].copy(),
    )


def export_pair_csv(report: PairReport) -> str:
    """Both trajectories, their inputs, the distance and the bound per grid time."""
    names = state_names(report.first.n)
    rows = [
        [
            "t",
            *names,
            *(f"{name}_prime" for name in names),
            "u",
            "u_prime",
            "distance",
            "bound",
        ]
    ]
    for k, t in enumerate(report.times):
        rows.append(
            [
                _fmt(t),
                *(_fmt(v) for v in report.first.states[k]),
                *(_fmt(v) for v in report.second.states[k]),
                _fmt(report.first.inputs[k]),
                _fmt(report.second.inputs[k]),
                _fmt(report.distances[k]),
                _fmt(report.bound[k]),
            ]
        )
    return _write(rows)
