from deltabk.examples import generator_system, two_state_demo
from deltabk.report import (
    controller_summary,
    coordinate_structure,
    psi_structure,
    render_controller,
    render_simulation,
    render_verification,
)
from deltabk.sampling import Box
from deltabk.synthesis import MetricField
from deltabk.verify import verify_region

from .fixtures import generator_controller, linear_scalar_loop, two_state_controller


def test_psi_structure():
    assert psi_structure(1) == ["z1 = y1"]
    assert psi_structure(3) == [
        "z1 = y1",
        "z2 = y2 - phi1(y1)",
        "z3 = y3 - phi2(y1, y2)",
    ]


def test_coordinate_structure():
    assert coordinate_structure(two_state_demo()) == ["y1 = x1", "y2 = x2"]
    lines = coordinate_structure(generator_system())
    assert lines[0] == "y1 = x1"
    assert lines[1].endswith("* x2")
    assert lines[2].count("*") >= 3 and lines[2].endswith("* x3")


def test_controller_summary_and_rendering():
    summary = controller_summary(
        two_state_controller(), two_state_demo(), [(0.0, 0.0), (0.5, -0.25)]
    )
    assert summary["system"] == "two-state-demo"
    assert summary["n"] == 2
    assert summary["interconnection_gains"] == [1.0]
    assert summary["evaluations"][0] == {"x": [0.0, 0.0], "u_hat": 0.0, "k": 0.0}
    text = render_controller(summary)
    assert text.startswith("# Controller for `two-state-demo`")
    assert "| x1 | x2 | k(x, 0) |" in text
    assert "z2 = y2 - phi1(y1)" in text


def test_generator_summary_sorts_params():
    summary = controller_summary(generator_controller(), generator_system(), [])
    assert list(summary["params"]) == sorted(summary["params"])
    assert "| x1" not in render_controller(summary)


def test_render_verification_marks_failures():
    f = linear_scalar_loop(2.0)
    eye, box = MetricField.identity(1), Box.cube(1, 1.0)
    passed = verify_region(f, eye, 2.0, 2.0, box, 10)
    failed = verify_region(f, eye, 4.0, 2.0, box, 10)
    text = render_verification([passed, failed])
    lines = text.strip().splitlines()
    assert len(lines) == 4
    assert lines[2].endswith("| pass |")
    assert lines[3].endswith("| FAIL |")


def test_render_simulation_tables():
    runs = [{"grid_points": 11, "file": "trajectory_0.csv", "escaped": False}]
    pairs = [
        {
            "kind": "gas",
            "initial_distance": 1.0,
            "final_distance": 0.5,
            "input_gap": 0.0,
            "worst_margin": None,
            "equality_gap": 1e-12,
            "passed": True,
        }
    ]
    text = render_simulation(runs, pairs)
    assert "| 0 | 11 | trajectory_0.csv | pass |" in text
    row = "| 0 | gas | 1.000e+00 | 5.000e-01 | 0.000e+00 | - | 1.000e-12 | pass |"
    assert row in text
