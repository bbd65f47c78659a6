"""
Run configuration: schema, TOML loader and command-line overrides.

The schema is documented in `docs/CONFIG.md`. Everything is validated while
loading, before any synthesis or simulation runs; unknown keys are errors
that name their dotted path.
"""

from __future__ import annotations

import hashlib
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from .commons import (
    DEFAULT_ALPHA,
    DEFAULT_EPS_EQ,
    DEFAULT_EPS_INT,
    DEFAULT_INPUT_INTERVAL,
    DEFAULT_LAMBDA,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_STEP,
    ConfigError,
    DeltaBkError,
)
from .examples import builtin_system
from .examples.generator import GeneratorParameters, generator_system
from .expr import evaluate, parse
from .model import ParametricStrictFeedbackSystem, StrictFeedbackSystem, System
from .sampling import Box
from .sim import ExpressionSignal, PiecewiseConstantSignal, Signal
from .verify import Tolerances

OUTPUT_FORMATS = frozenset({"json", "table", "csv"})
SYSTEM_KINDS = ("generator", "strict-feedback", "parametric-strict-feedback")


@dataclass(frozen=True)
class VerifyConfig:
    samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    input_interval: tuple[float, float] = DEFAULT_INPUT_INTERVAL
    tolerances: Tolerances = Tolerances()


@dataclass(frozen=True)
class RunSpec:
    x0: tuple[float, ...]
    signal: Signal = PiecewiseConstantSignal.constant(0.0)


@dataclass(frozen=True)
class PairSpec:
    x0: tuple[float, ...]
    x0_prime: tuple[float, ...]
    signal: Signal = PiecewiseConstantSignal.constant(0.0)
    signal_prime: Signal = PiecewiseConstantSignal.constant(0.0)

    @property
    def shared_input(self) -> bool:
        return self.signal == self.signal_prime


@dataclass(frozen=True)
class SimulateConfig:
    t_end: float = 5.0
    h: float = DEFAULT_STEP
    eps_int: float = DEFAULT_EPS_INT
    eps_eq: float = DEFAULT_EPS_EQ
    escape_box: Optional[Box] = None
    runs: tuple[RunSpec, ...] = ()
    pairs: tuple[PairSpec, ...] = ()
    random_pairs: int = 0
    radius: float = 0.5


@dataclass(frozen=True)
class OutputConfig:
    directory: Path = Path("out")
    formats: frozenset[str] = OUTPUT_FORMATS


@dataclass(frozen=True)
class RunConfig:
    system: System
    lam: float = DEFAULT_LAMBDA
    alpha: float = DEFAULT_ALPHA
    eval_points: tuple[tuple[float, ...], ...] = ()
    verify: VerifyConfig = VerifyConfig()
    simulate: SimulateConfig = SimulateConfig()
    output: OutputConfig = OutputConfig()
    digest: str = ""

    def with_overrides(
        self,
        *,
        system: Optional[str] = None,
        lam: Optional[float] = None,
        seed: Optional[int] = None,
        samples: Optional[int] = None,
        out: Optional[Path] = None,
        eval_points: Sequence[Sequence[float]] = (),
    ) -> "RunConfig":
        """Apply command-line flags on top of the loaded configuration."""
        config = self
        if system is not None:
            config = replace(config, system=builtin_system(system))
            _check_dims("eval_points", config.eval_points, config.system.n)
            runs = [r.x0 for r in config.simulate.runs]
            _check_dims("simulate.runs", runs, config.system.n)
            pairs = [p for s in config.simulate.pairs for p in (s.x0, s.x0_prime)]
            _check_dims("simulate.pairs", pairs, config.system.n)
            config = replace(
                config,
                simulate=replace(
                    config.simulate, escape_box=config.system.escape_box
                ),
            )
        if lam is not None:
            if not lam > 0.0:
                raise ConfigError("--lambda must be positive")
            config = replace(config, lam=float(lam))
        if seed is not None:
            config = replace(config, verify=replace(config.verify, seed=int(seed)))
        if samples is not None:
            if samples < 1:
                raise ConfigError("--samples must be at least 1")
            config = replace(
                config, verify=replace(config.verify, samples=int(samples))
            )
        if out is not None:
            config = replace(config, output=replace(config.output, directory=out))
        if eval_points:
            points = tuple(tuple(float(v) for v in p) for p in eval_points)
            _check_dims("--eval", points, config.system.n)
            config = replace(config, eval_points=points)
        return config


# ----- loading ------------------------------------------------------------------------
def load_config(path: Path) -> RunConfig:
    """Read and validate a TOML run configuration."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    config = config_from_mapping(data)
    return replace(config, digest=hashlib.sha256(raw).hexdigest())


def default_config(system: str = "generator") -> RunConfig:
    built = builtin_system(system)
    return RunConfig(
        system=built, simulate=SimulateConfig(escape_box=built.escape_box)
    )


def config_from_mapping(data: Mapping[str, Any]) -> RunConfig:
    _check_keys(
        data,
        {"system", "lambda", "alpha", "eval_points", "verify", "simulate", "output"},
        "",
    )
    if "system" not in data:
        raise ConfigError("missing required key 'system'")
    system = _system(data["system"], "system")
    lam = _number(data.get("lambda", DEFAULT_LAMBDA), "lambda")
    if not lam > 0.0:
        raise ConfigError("lambda must be positive")
    alpha = _number(data.get("alpha", DEFAULT_ALPHA), "alpha")
    if alpha < 0.0:
        raise ConfigError("alpha must be nonnegative")
    eval_points = tuple(
        _vector(p, f"eval_points[{i}]")
        for i, p in enumerate(_list(data.get("eval_points", []), "eval_points"))
    )
    _check_dims("eval_points", eval_points, system.n)
    return RunConfig(
        system=system,
        lam=lam,
        alpha=alpha,
        eval_points=eval_points,
        verify=_verify(_table(data.get("verify", {}), "verify")),
        simulate=_simulate(_table(data.get("simulate", {}), "simulate"), system),
        output=_output(_table(data.get("output", {}), "output")),
    )


# ----- field helpers ------------------------------------------------------------------
def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _check_keys(table: Mapping[str, Any], allowed: set[str], path: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"unknown key '{_join(path, unknown[0])}'")


def _table(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ConfigError(f"'{path}' must be a table")
    return value


def _list(value: Any, path: str) -> list[Any]:
    if not isinstance(value, list):
        raise ConfigError(f"'{path}' must be an array")
    return value


def _number(value: Any, path: str) -> float:
    """A number, or a constant expression such as `"pi/3"`."""
    if isinstance(value, bool):
        raise ConfigError(f"'{path}' must be a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            result = float(evaluate(parse(value), {"pi": math.pi}))
        except DeltaBkError as exc:
            raise ConfigError(f"'{path}': {exc}") from None
        return result
    raise ConfigError(f"'{path}' must be a number")


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{path}' must be an integer")
    return value


def _string(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"'{path}' must be a string")
    return value


def _vector(value: Any, path: str) -> tuple[float, ...]:
    items = _list(value, path)
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(items))


def _check_dims(label: str, points: Sequence[Sequence[float]], n: int) -> None:
    for p in points:
        if len(p) != n:
            raise ConfigError(f"'{label}' entries need {n} coordinates, got {len(p)}")


def _box(value: Any, path: str) -> Box:
    rows = _list(value, path)
    intervals = []
    for i, row in enumerate(rows):
        pair = _vector(row, f"{path}[{i}]")
        if len(pair) != 2:
            raise ConfigError(f"'{path}[{i}]' must be [lo, hi]")
        intervals.append(pair)
    try:
        return Box.from_intervals(intervals)
    except ValueError as exc:
        raise ConfigError(f"'{path}': {exc}") from None


def _params(value: Any, path: str) -> dict[str, float]:
    table = _table(value, path)
    return {str(k): _number(v, _join(path, str(k))) for k, v in table.items()}


def _signal(value: Any, path: str) -> Signal:
    try:
        if isinstance(value, str):
            return ExpressionSignal.from_text(value)
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return PiecewiseConstantSignal.constant(float(value))
        table = _table(value, path)
        _check_keys(table, {"schedule"}, path)
        rows = _list(table.get("schedule"), _join(path, "schedule"))
        pairs = [_vector(row, f"{path}.schedule[{i}]") for i, row in enumerate(rows)]
        if any(len(pair) != 2 for pair in pairs):
            raise ConfigError(f"'{path}.schedule' entries must be [t, value]")
        return PiecewiseConstantSignal.from_pairs(pairs)
    except (ValueError, DeltaBkError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"'{path}': {exc}") from None


# ----- sections -----------------------------------------------------------------------
def _system(value: Any, path: str) -> System:
    if isinstance(value, str):
        return builtin_system(value)
    table = _table(value, path)
    kind = _string(table.get("kind"), _join(path, "kind"))
    if kind not in SYSTEM_KINDS:
        raise ConfigError(
            f"'{path}.kind' must be one of {', '.join(SYSTEM_KINDS)}, got {kind!r}"
        )
    if kind == "generator":
        _check_keys(table, {"kind", "params", "box"}, path)
        params = GeneratorParameters.from_mapping(
            _params(table.get("params", {}), _join(path, "params"))
        )
        if "box" in table:
            return generator_system(params, _box(table["box"], _join(path, "box")))
        return generator_system(params)

    allowed = {"kind", "name", "n", "h", "g", "params", "box"}
    if kind == "parametric-strict-feedback":
        allowed.add("b")
    _check_keys(table, allowed, path)
    n = _integer(table.get("n"), _join(path, "n"))
    if n < 1:
        raise ConfigError(f"'{path}.n' must be at least 1")
    h_items = _list(table.get("h"), _join(path, "h"))
    h = [_string(v, f"{path}.h[{i}]") for i, v in enumerate(h_items)]
    if len(h) != n:
        raise ConfigError(f"'{path}.h' needs {n} expressions, got {len(h)}")
    if "box" not in table:
        raise ConfigError(f"missing required key '{path}.box'")
    box = _box(table["box"], _join(path, "box"))
    if box.dim != n:
        raise ConfigError(f"'{path}.box' needs {n} intervals, got {box.dim}")
    params = _params(table.get("params", {}), _join(path, "params"))
    name = _string(table.get("name", kind), _join(path, "name"))

    if kind == "strict-feedback":
        g_items = _list(table.get("g"), _join(path, "g"))
        g = [_string(v, f"{path}.g[{i}]") for i, v in enumerate(g_items)]
        if len(g) != n:
            raise ConfigError(f"'{path}.g' needs {n} expressions, got {len(g)}")
        return StrictFeedbackSystem.from_text(h, g, box, params, name)

    b = _vector(table.get("b", []), _join(path, "b"))
    if len(b) != n - 1:
        raise ConfigError(f"'{path}.b' needs {n - 1} gains, got {len(b)}")
    g_text = _string(table.get("g"), _join(path, "g"))
    return ParametricStrictFeedbackSystem.from_text(h, b, g_text, box, params, name)


def _verify(table: Mapping[str, Any]) -> VerifyConfig:
    _check_keys(table, {"samples", "seed", "input_interval", "tolerances"}, "verify")
    samples = _integer(table.get("samples", DEFAULT_SAMPLES), "verify.samples")
    if samples < 1:
        raise ConfigError("'verify.samples' must be at least 1")
    interval = _vector(
        table.get("input_interval", list(DEFAULT_INPUT_INTERVAL)),
        "verify.input_interval",
    )
    if len(interval) != 2 or interval[0] > interval[1]:
        raise ConfigError("'verify.input_interval' must be [lo, hi] with lo <= hi")
    tol_table = _table(table.get("tolerances", {}), "verify.tolerances")
    _check_keys(tol_table, {"state", "input", "pd", "fd"}, "verify.tolerances")
    defaults = Tolerances()
    tolerances = Tolerances(
        **{
            key: _number(
                tol_table.get(key, getattr(defaults, key)), f"verify.tolerances.{key}"
            )
            for key in ("state", "input", "pd", "fd")
        }
    )
    return VerifyConfig(
        samples=samples,
        seed=_integer(table.get("seed", DEFAULT_SEED), "verify.seed"),
        input_interval=(interval[0], interval[1]),
        tolerances=tolerances,
    )


def _simulate(table: Mapping[str, Any], system: System) -> SimulateConfig:
    _check_keys(
        table,
        {
            "t_end",
            "h",
            "eps_int",
            "eps_eq",
            "escape_box",
            "runs",
            "pairs",
            "random_pairs",
            "radius",
        },
        "simulate",
    )
    defaults = SimulateConfig()
    t_end = _number(table.get("t_end", defaults.t_end), "simulate.t_end")
    h = _number(table.get("h", defaults.h), "simulate.h")
    if not h > 0.0 or t_end < 0.0:
        raise ConfigError("'simulate' needs h > 0 and t_end >= 0")
    if "escape_box" in table:
        box: Optional[Box] = _box(table["escape_box"], "simulate.escape_box")
    else:
        box = system.escape_box

    runs = []
    for i, item in enumerate(_list(table.get("runs", []), "simulate.runs")):
        path = f"simulate.runs[{i}]"
        run = _table(item, path)
        _check_keys(run, {"x0", "input"}, path)
        runs.append(
            RunSpec(
                x0=_vector(run.get("x0"), f"{path}.x0"),
                signal=_signal(run.get("input", 0.0), f"{path}.input"),
            )
        )
    pairs = []
    for i, item in enumerate(_list(table.get("pairs", []), "simulate.pairs")):
        path = f"simulate.pairs[{i}]"
        pair = _table(item, path)
        _check_keys(pair, {"x0", "x0_prime", "input", "input_prime"}, path)
        signal = _signal(pair.get("input", 0.0), f"{path}.input")
        pairs.append(
            PairSpec(
                x0=_vector(pair.get("x0"), f"{path}.x0"),
                x0_prime=_vector(pair.get("x0_prime"), f"{path}.x0_prime"),
                signal=signal,
                signal_prime=(
                    _signal(pair["input_prime"], f"{path}.input_prime")
                    if "input_prime" in pair
                    else signal
                ),
            )
        )
    _check_dims("simulate.runs", [r.x0 for r in runs], system.n)
    _check_dims(
        "simulate.pairs", [p for s in pairs for p in (s.x0, s.x0_prime)], system.n
    )
    random_pairs = _integer(table.get("random_pairs", 0), "simulate.random_pairs")
    radius = _number(table.get("radius", defaults.radius), "simulate.radius")
    if random_pairs < 0 or not radius > 0.0:
        raise ConfigError("'simulate' needs random_pairs >= 0 and radius > 0")
    return SimulateConfig(
        t_end=t_end,
        h=h,
        eps_int=_number(table.get("eps_int", defaults.eps_int), "simulate.eps_int"),
        eps_eq=_number(table.get("eps_eq", defaults.eps_eq), "simulate.eps_eq"),
        escape_box=box,
        runs=tuple(runs),
        pairs=tuple(pairs),
        random_pairs=random_pairs,
        radius=radius,
    )


def _output(table: Mapping[str, Any]) -> OutputConfig:
    _check_keys(table, {"directory", "formats"}, "output")
    directory = Path(_string(table.get("directory", "out"), "output.directory"))
    items = _list(table.get("formats", sorted(OUTPUT_FORMATS)), "output.formats")
    formats = frozenset(
        _string(v, f"output.formats[{i}]") for i, v in enumerate(items)
    )
    unknown = sorted(formats - OUTPUT_FORMATS)
    if unknown:
        raise ConfigError(f"unknown output format {unknown[0]!r}")
    return OutputConfig(directory=directory, formats=formats)


__all__ = [
    "OutputConfig",
    "PairSpec",
    "RunConfig",
    "RunSpec",
    "SimulateConfig",
    "VerifyConfig",
    "config_from_mapping",
    "default_config",
    "load_config",
]
