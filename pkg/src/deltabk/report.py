"""Markdown tables for synthesis, verification and simulation results."""

from __future__ import annotations

from typing import Any, Optional, Sequence

from .expr import to_text
from .model import StrictFeedbackSystem, System, state_names
from .synthesis import SynthesizedController
from .verify import VerificationReport


def _fmt(value: Optional[float], spec: str = ".3e") -> str:
    if value is None:
        return "-"
    return format(value, spec)


def _table(headers: list[str], rows: list[list[Any]]) -> str:
    lines = ["| " + " | ".join(headers) + " |"]
    lines.append("|" + "|".join(" --- " for _ in headers) + "|")
    for row in rows:
        lines.append("| " + " | ".join(str(cell) for cell in row) + " |")
    return "\n".join(lines)


def _verdict(passed: bool) -> str:
    return "pass" if passed else "FAIL"


# ----- controller ---------------------------------------------------------------------
def psi_structure(n: int) -> list[str]:
    lines = ["z1 = y1"]
    for l in range(2, n + 1):
        args = ", ".join(f"y{i}" for i in range(1, l))
        lines.append(f"z{l} = y{l} - phi{l - 1}({args})")
    return lines


def coordinate_structure(system: System) -> list[str]:
    if not isinstance(system, StrictFeedbackSystem):
        return [f"y{i} = x{i}" for i in range(1, system.n + 1)]
    lines = ["y1 = x1"]
    for l in range(2, system.n + 1):
        gains = " * ".join(f"({to_text(g)})" for g in system.g[: l - 1])
        lines.append(f"y{l} = {gains} * x{l}")
    return lines


def controller_summary(
    ctrl: SynthesizedController,
    system: System,
    points: Sequence[Sequence[float]],
) -> dict[str, Any]:
    """Data written to `controller.json`; controls are evaluated with `u_hat = 0`."""
    evaluations = []
    for x in points:
        evaluations.append(
            {
                "x": [float(v) for v in x],
                "u_hat": 0.0,
                "k": float(ctrl.control(list(x), 0.0)),
            }
        )
    return {
        "system": system.name,
        "kind": ctrl.kind,
        "n": ctrl.n,
        "lambda": ctrl.lam,
        "interconnection_gains": list(ctrl.form.b),
        "coordinates": coordinate_structure(system),
        "error_coordinates": psi_structure(ctrl.n),
        "params": dict(sorted(system.params.items())),
        "evaluations": evaluations,
    }


def render_controller(summary: dict[str, Any]) -> str:
    parts = [
        f"# Controller for `{summary['system']}`",
        "",
        f"- kind: {summary['kind']}, n = {summary['n']}, lambda = {summary['lambda']}",
        "- coordinates: " + "; ".join(summary["coordinates"]),
        "- error coordinates: " + "; ".join(summary["error_coordinates"]),
    ]
    if summary["evaluations"]:
        names = state_names(summary["n"])
        rows = [
            [*(_fmt(v, ".6g") for v in item["x"]), _fmt(item["k"], ".17g")]
            for item in summary["evaluations"]
        ]
        parts.extend(["", _table([*names, "k(x, 0)"], rows)])
    return "\n".join(parts) + "\n"


# ----- verification -------------------------------------------------------------------
def render_verification(reports: Sequence[VerificationReport]) -> str:
    rows = []
    for r in reports:
        rows.append(
            [
                r.label,
                r.metric_provenance,
                r.samples,
                _fmt(r.worst_state_defect),
                _fmt(r.worst_input_margin),
                _fmt(r.min_metric_eigenvalue),
                _fmt(r.worst_metric_derivative_gap),
                r.failure_count,
                _verdict(r.passed),
            ]
        )
    headers = [
        "loop",
        "metric",
        "samples",
        "worst state defect",
        "worst input margin",
        "min eig G",
        "D_f G gap",
        "errors",
        "result",
    ]
    return _table(headers, rows) + "\n"


# ----- simulation ---------------------------------------------------------------------
def render_simulation(
    runs: Sequence[dict[str, Any]], pairs: Sequence[dict[str, Any]]
) -> str:
    parts = []
    if runs:
        rows = [
            [i, item["grid_points"], item["file"], _verdict(not item["escaped"])]
            for i, item in enumerate(runs)
        ]
        parts.append(_table(["run", "grid points", "file", "result"], rows))
    if pairs:
        rows = [
            [
                i,
                item["kind"],
                _fmt(item["initial_distance"]),
                _fmt(item["final_distance"]),
                _fmt(item["input_gap"]),
                _fmt(item["worst_margin"]),
                _fmt(item["equality_gap"]),
                _verdict(item["passed"]),
            ]
            for i, item in enumerate(pairs)
        ]
        headers = [
            "pair",
            "check",
            "d(0)",
            "d(t_end)",
            "|u - u'|",
            "worst margin",
            "envelope gap",
            "result",
        ]
        parts.append(_table(headers, rows))
    return "\n\n".join(parts) + "\n"
