"""
Command-line entry point: `deltabk {synthesize,verify,simulate,demo}`.

Exit codes: 0 success, 1 a verification or bound check failed, 2 bad
configuration or system definition, 3 a domain error at run time (including
a trajectory leaving its escape box). Reports go to stdout and to files in
the output directory; logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Sequence

from .commons import (
    ConfigError,
    DomainError,
    ExpressionSyntaxError,
    TrajectoryEscapeError,
    UnboundVariableError,
    ValidationError,
)
from .config import PairSpec, RunConfig, RunSpec, default_config, load_config
from .model import StrictFeedbackSystem
from .report import (
    controller_summary,
    render_controller,
    render_simulation,
    render_verification,
)
from .sim import (
    PiecewiseConstantSignal,
    export_csv,
    export_pair_csv,
    gas_decay_check,
    integrate,
    iss_bound_check,
    random_pair_states,
)
from .synthesis import MetricField, SynthesizedController, controller_for
from .verify import VerificationReport, verify_region

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DOMAIN = 3

# Pairs and input step used by `demo` when the configuration lists none.
DEMO_RANDOM_PAIRS = 3
DEMO_INPUT_STEP = 0.1


def _write(config: RunConfig, name: str, text: str) -> Path:
    directory = config.output.directory
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / name
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    logger.info("wrote %s", path)
    return path


def _dump(data: dict[str, Any]) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _show(config: RunConfig, text: str) -> None:
    if "table" in config.output.formats:
        sys.stdout.write(text)


# ----- commands -----------------------------------------------------------------------
def cmd_synthesize(config: RunConfig) -> int:
    """Synthesize the controller and print it with sample evaluations."""
    ctrl = controller_for(config.system, config.lam)
    points = config.eval_points or ((0.0,) * ctrl.n,)
    summary = controller_summary(ctrl, config.system, points)
    summary["config_digest"] = config.digest
    if "json" in config.output.formats:
        _write(config, "controller.json", _dump(summary))
    _show(config, render_controller(summary))
    return EXIT_OK


def _verifications(
    config: RunConfig, ctrl: SynthesizedController, identity_metric: bool
) -> list[VerificationReport]:
    settings = config.verify
    loops = [
        ("transformed", ctrl.transformed_closed_loop(), ctrl.metric(), ctrl.form.box)
    ]
    if isinstance(config.system, StrictFeedbackSystem):
        loops.append(
            ("original", ctrl.closed_loop(), ctrl.native_metric(), config.system.box)
        )
    reports = []
    for label, field, metric, box in loops:
        if identity_metric:
            metric = MetricField.identity(ctrl.n)
        reports.append(
            verify_region(
                field,
                metric,
                config.lam,
                config.alpha,
                box,
                settings.samples,
                settings.seed,
                input_interval=settings.input_interval,
                tolerances=settings.tolerances,
                label=label,
            )
        )
    return reports


def cmd_verify(config: RunConfig, identity_metric: bool = False) -> int:
    """Certify the contraction conditions on the synthesized closed loop(s)."""
    ctrl = controller_for(config.system, config.lam)
    reports = _verifications(config, ctrl, identity_metric)
    passed = all(r.passed for r in reports)
    document = {
        "system": config.system.name,
        "config_digest": config.digest,
        "verifications": [r.to_dict() for r in reports],
        "passed": passed,
    }
    if "json" in config.output.formats:
        _write(config, "report.json", _dump(document))
    _show(config, render_verification(reports))
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def _pairs(config: RunConfig, ctrl: SynthesizedController) -> list[PairSpec]:
    pairs = list(config.simulate.pairs)
    for x0, x0_prime in random_pair_states(
        ctrl,
        config.simulate.random_pairs,
        config.verify.seed,
        config.simulate.radius,
    ):
        pairs.append(PairSpec(tuple(x0), tuple(x0_prime)))
    return pairs


def cmd_simulate(config: RunConfig) -> int:
    """Integrate configured runs and pairs, then check the pair bounds."""
    settings = config.simulate
    ctrl = controller_for(config.system, config.lam)
    f_closed = ctrl.closed_loop()
    metadata = {
        "lambda": config.lam,
        "seed": config.verify.seed,
        "config_digest": config.digest,
    }
    write_csv = "csv" in config.output.formats

    runs = []
    for i, run in enumerate(settings.runs):
        record = integrate(
            f_closed,
            run.x0,
            run.signal,
            settings.t_end,
            settings.h,
            escape_box=settings.escape_box,
            metadata=metadata,
        )
        if record.escaped:
            raise TrajectoryEscapeError(f"run {i}: {record.message}", record)
        name = f"trajectory_{i}.csv"
        if write_csv:
            _write(config, name, export_csv(record))
        runs.append({"grid_points": len(record), "file": name, "escaped": False})

    pairs = []
    for i, pair in enumerate(_pairs(config, ctrl)):
        if pair.shared_input:
            report = gas_decay_check(
                ctrl,
                f_closed,
                pair.x0,
                pair.x0_prime,
                pair.signal,
                settings.t_end,
                settings.h,
                eps_int=settings.eps_int,
                eps_eq=settings.eps_eq,
                escape_box=settings.escape_box,
            )
        else:
            report = iss_bound_check(
                ctrl,
                f_closed,
                pair.x0,
                pair.x0_prime,
                pair.signal,
                pair.signal_prime,
                settings.t_end,
                settings.h,
                eps_int=settings.eps_int,
                escape_box=settings.escape_box,
            )
        if write_csv:
            _write(config, f"pair_{i}.csv", export_pair_csv(report))
        pairs.append(report.to_dict())

    passed = all(item["passed"] for item in pairs)
    document = {
        "system": config.system.name,
        "metadata": metadata,
        "t_end": settings.t_end,
        "h": settings.h,
        "runs": runs,
        "pairs": pairs,
        "passed": passed,
    }
    if "json" in config.output.formats:
        _write(config, "simulation.json", _dump(document))
    _show(config, render_simulation(runs, pairs))
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def _demo_config(config: RunConfig) -> RunConfig:
    settings = config.simulate
    if settings.runs or settings.pairs or settings.random_pairs:
        return config
    ctrl = controller_for(config.system, config.lam)
    origin = tuple(0.0 for _ in range(ctrl.n))
    x0, x0_prime = random_pair_states(
        ctrl, 1, config.verify.seed + 1, settings.radius
    )[0]
    step = PiecewiseConstantSignal.from_pairs([[0.0, 0.0], [1.0, DEMO_INPUT_STEP]])
    return replace(
        config,
        simulate=replace(
            settings,
            random_pairs=DEMO_RANDOM_PAIRS,
            runs=(RunSpec(tuple(x0)),),
            pairs=(
                PairSpec(
                    tuple(x0),
                    tuple(x0_prime),
                    PiecewiseConstantSignal.constant(0.0),
                    step,
                ),
                PairSpec(origin, origin, PiecewiseConstantSignal.constant(0.0), step),
            ),
        ),
    )


def cmd_demo(config: RunConfig) -> int:
    """Synthesize, verify and simulate in sequence, writing every artifact."""
    config = _demo_config(config)
    codes = [cmd_synthesize(config), cmd_verify(config), cmd_simulate(config)]
    return max(codes)


# ----- entry point --------------------------------------------------------------------
def _eval_point(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got {text!r}"
        ) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="TOML run configuration")
    common.add_argument("--system", help="built-in system name")
    common.add_argument("--lambda", dest="lam", type=float, help="contraction rate")
    common.add_argument("--seed", type=int, help="sampling seed")
    common.add_argument("--samples", type=int, help="verification sample count")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument(
        "--eval",
        dest="eval_points",
        type=_eval_point,
        action="append",
        default=[],
        help='state "x1,...,xn" at which to evaluate k(x, 0); repeatable',
    )
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v info, -vv debug"
    )

    parser = argparse.ArgumentParser(
        prog="deltabk",
        description="Backstepping synthesis of incrementally stable controllers.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("synthesize", parents=[common], help="print the controller")
    verify = commands.add_parser(
        "verify", parents=[common], help="certify the contraction conditions"
    )
    verify.add_argument(
        "--metric",
        choices=("synthesized", "identity"),
        default="synthesized",
        help="metric to certify; identity is a diagnostic that should fail",
    )
    commands.add_parser(
        "simulate", parents=[common], help="simulate runs and check pair bounds"
    )
    commands.add_parser("demo", parents=[common], help="end-to-end walkthrough")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def _config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        base = load_config(args.config)
        system = args.system
    else:
        base = default_config(args.system or "generator")
        system = None
    return base.with_overrides(
        system=system,
        lam=args.lam,
        seed=args.seed,
        samples=args.samples,
        out=args.out,
        eval_points=args.eval_points,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    commands: dict[str, Callable[[RunConfig], int]] = {
        "synthesize": cmd_synthesize,
        "verify": lambda c: cmd_verify(c, args.metric == "identity"),
        "simulate": cmd_simulate,
        "demo": cmd_demo,
    }
    try:
        config = _config(args)
        return commands[args.command](config)
    except (
        ConfigError,
        ValidationError,
        ExpressionSyntaxError,
        UnboundVariableError,
    ) as exc:
        print(f"deltabk: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"deltabk: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        print(f"deltabk: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
