import json
import math

import numpy as np
import pytest

from deltabk import autodiff
from deltabk.commons import TrajectoryEscapeError
from deltabk.examples.generator import escape_box
from deltabk.model import VectorField
from deltabk.sampling import Box
from deltabk.sim import (
    ZERO_INPUT,
    ExpressionSignal,
    PiecewiseConstantSignal,
    export_csv,
    export_pair_csv,
    gas_decay_check,
    grid_steps,
    integrate,
    iss_bound_check,
    parse_csv,
    random_pair_states,
    random_schedule,
    sup_norm_difference,
)

from .fixtures import generator_controller, linear_scalar_loop, scalar_controller

DECAY = VectorField(1, lambda x, u: [-x[0]])


# ---------- Integrator ----------


def test_exponential_decay_is_accurate():
    record = integrate(DECAY, [1.0], t_end=1.0, h=1e-3)
    assert len(record) == 1001
    assert record.times[-1] == pytest.approx(1.0, abs=1e-12)
    assert abs(record.final_state[0] - math.exp(-1.0)) <= 1e-9
    assert not record.escaped


def test_constant_field_stays_put():
    still = VectorField(2, lambda x, u: [0.0, 0.0])
    record = integrate(still, [0.5, -2.0], t_end=0.5, h=0.1)
    assert np.array_equal(record.states, np.tile([0.5, -2.0], (6, 1)))


def test_rk4_has_fourth_order_convergence():
    steps = [1e-2, 5e-3, 2.5e-3]
    errors = [
        abs(integrate(DECAY, [1.0], t_end=1.0, h=h).final_state[0] - math.exp(-1.0))
        for h in steps
    ]
    slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
    assert slope >= 3.8


def test_input_drives_the_state():
    # x' = u with u = 1 gives x(t) = t exactly.
    record = integrate(
        VectorField(1, lambda x, u: [u]),
        [0.0],
        PiecewiseConstantSignal.constant(1.0),
        t_end=1.0,
        h=0.1,
    )
    assert record.final_state[0] == pytest.approx(1.0, rel=1e-12)
    assert np.all(record.inputs == 1.0)


def test_expression_input_uses_stage_times():
    # x' = 2t integrates to t^2 exactly under RK4.
    record = integrate(
        VectorField(1, lambda x, u: [u]),
        [0.0],
        ExpressionSignal.from_text("2*t"),
        t_end=1.0,
        h=0.25,
    )
    assert record.final_state[0] == pytest.approx(1.0, rel=1e-12)


def test_zero_horizon_gives_initial_state_only():
    record = integrate(DECAY, [0.7], t_end=0.0, h=0.1)
    assert len(record) == 1
    assert record.states.tolist() == [[0.7]]


def test_escape_box_stops_integration():
    growth = VectorField(1, lambda x, u: [x[0]])
    record = integrate(growth, [1.0], t_end=2.0, h=0.01, escape_box=Box.cube(1, 2.0))
    assert record.escaped
    assert "escape box" in record.message
    assert 0 < len(record) < 201
    assert np.all(np.abs(record.states) <= 2.0)


def test_blow_up_is_reported_as_non_finite():
    blow_up = VectorField(1, lambda x, u: [x[0] * x[0] * x[0]])
    record = integrate(blow_up, [1.0], t_end=5.0, h=0.1)
    assert record.escaped
    assert "non-finite" in record.message


def test_domain_error_stops_integration():
    field = VectorField(1, lambda x, u: [autodiff.ln(x[0])])
    record = integrate(field, [0.5], t_end=2.0, h=0.01)
    assert record.escaped
    assert "ln of a nonpositive value" in record.message


def test_initial_state_dimension_is_checked():
    with pytest.raises(ValueError, match="1 entries"):
        integrate(DECAY, [1.0, 2.0], t_end=1.0, h=0.1)


@pytest.mark.parametrize(
    "t_end, h, message",
    [
        (1.0, 0.0, "positive"),
        (-1.0, 0.1, "nonnegative"),
        (1.05, 0.1, "not a multiple"),
    ],
)
def test_grid_validation(t_end, h, message):
    with pytest.raises(ValueError, match=message):
        grid_steps(t_end, h)


def test_grid_steps():
    assert grid_steps(5.0, 1e-3) == 5000
    assert grid_steps(0.3, 0.1) == 3


# ---------- Input signals ----------


def test_piecewise_constant_signal_values():
    signal = PiecewiseConstantSignal.from_pairs([[0.0, 0.0], [1.0, 0.1], [2.0, -0.5]])
    assert signal.value(0.0) == 0.0
    assert signal.value(0.999) == 0.0
    assert signal.value(1.0) == 0.1
    # Breakpoints reached by accumulated grid times still switch.
    assert signal.value(sum([0.1] * 10)) == 0.1
    assert signal.value(100.0) == -0.5
    assert signal.breakpoints == (0.0, 1.0, 2.0)
    assert signal.stage_values(1.5, 0.1) == (0.1, 0.1, 0.1)
    assert signal.to_text() == "schedule [0, 0], [1, 0.1], [2, -0.5]"


def test_schedule_is_zero_before_its_first_breakpoint():
    signal = PiecewiseConstantSignal.from_pairs([[0.5, 1.0], [1.0, -1.0]])
    assert signal.value(0.0) == 0.0
    assert signal.value(0.499) == 0.0
    assert signal.value(0.5) == 1.0
    assert signal.value(2.0) == -1.0


@pytest.mark.parametrize(
    "pairs, message",
    [
        ([], "at least one"),
        ([[-0.5, 1.0]], "nonnegative"),
        ([[0.0, 1.0], [0.0, 2.0]], "strictly increasing"),
        ([[0.0, math.inf]], "finite"),
    ],
)
def test_piecewise_constant_signal_validation(pairs, message):
    with pytest.raises(ValueError, match=message):
        PiecewiseConstantSignal.from_pairs(pairs)


def test_breakpoints_must_lie_on_the_grid():
    signal = PiecewiseConstantSignal.from_pairs([[0.0, 0.0], [0.15, 1.0]])
    with pytest.raises(ValueError, match="not a multiple of h"):
        integrate(DECAY, [1.0], signal, t_end=1.0, h=0.1)


def test_expression_signal_only_uses_time():
    assert ExpressionSignal.from_text("sin(pi*t)").value(0.5) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="may only use t"):
        ExpressionSignal.from_text("x1 + t")


def test_sup_norm_difference():
    step = PiecewiseConstantSignal.from_pairs([[0.0, 0.0], [0.5, 0.1]])
    assert sup_norm_difference(ZERO_INPUT, step, 1.0, 0.1) == pytest.approx(0.1)
    assert sup_norm_difference(step, step, 1.0, 0.1) == 0.0
    wave = ExpressionSignal.from_text("sin(t)")
    gap = sup_norm_difference(wave, ZERO_INPUT, 2.0, 0.5)
    assert math.sin(1.5) <= gap <= 1.0


def test_sup_norm_difference_stops_at_t_end():
    late = PiecewiseConstantSignal.from_pairs([[0.0, 0.0], [1.5, 1.0]])
    assert sup_norm_difference(late, ZERO_INPUT, 1.0, 0.5) == 0.0
    ramp = ExpressionSignal.from_text("t")
    assert sup_norm_difference(ramp, ZERO_INPUT, 1.0, 0.5) == 1.0
    assert sup_norm_difference(ramp, ZERO_INPUT, 0.0, 0.5) == 0.0


def test_random_schedule_is_on_grid_and_bounded():
    rng = np.random.default_rng(4)
    signal = random_schedule(rng, 2.0, 0.01, pieces=5, amplitude=0.2)
    signal.check_grid(0.01)
    assert signal.breakpoints[0] == 0.0
    assert all(abs(v) <= 0.2 for _, v in signal.schedule)
    assert all(t < 2.0 for t in signal.breakpoints)


# ---------- CSV ----------


def test_csv_layout_and_round_trip():
    record = integrate(
        VectorField(2, lambda x, u: [x[1], -x[0] + u]),
        [1.0, 0.0],
        PiecewiseConstantSignal.constant(0.25),
        t_end=0.2,
        h=0.1,
    )
    text = export_csv(record)
    lines = text.split("\n")
    assert lines[0] == "t,x1,x2,u"
    assert len(lines) == 5 and lines[-1] == ""
    assert "\r" not in text
    back = parse_csv(text)
    assert np.array_equal(back.times, record.times)
    assert np.array_equal(back.states, record.states)
    assert np.array_equal(back.inputs, record.inputs)


def test_csv_header_is_checked():
    with pytest.raises(ValueError, match="header"):
        parse_csv("time,x1,u\n0,1,0\n")


# ---------- Pair checks ----------


def test_scalar_pair_follows_the_envelope():
    ctrl = scalar_controller()
    report = gas_decay_check(
        ctrl, ctrl.closed_loop(), [0.8], [-0.3], t_end=2.0, h=0.01
    )
    assert report.passed
    assert report.kind == "gas"
    assert report.equality_gap <= 1e-9
    assert report.distances[0] == pytest.approx(1.1)
    assert report.distances[-1] == pytest.approx(1.1 * math.exp(-2.0), rel=1e-8)


def test_identical_states_stay_identical():
    ctrl = scalar_controller()
    report = gas_decay_check(ctrl, ctrl.closed_loop(), [0.4], [0.4], t_end=1.0, h=0.1)
    assert report.passed
    assert np.all(report.distances == 0.0)


def test_scalar_pair_with_different_inputs_meets_iss_bound():
    ctrl = scalar_controller()
    report = iss_bound_check(
        ctrl,
        linear_scalar_loop(2.0),
        [0.2],
        [0.2],
        ZERO_INPUT,
        PiecewiseConstantSignal.constant(0.3),
        t_end=2.0,
        h=0.01,
    )
    assert report.passed
    assert report.input_gap == 0.3
    # The offset response equals the input part of the bound.
    expected = (1.0 - math.exp(-2.0)) * 0.3
    assert report.distances[-1] == pytest.approx(expected, rel=1e-8)


def test_escaped_pair_raises():
    ctrl = scalar_controller()
    with pytest.raises(TrajectoryEscapeError, match="escape box") as info:
        gas_decay_check(
            ctrl,
            ctrl.closed_loop(),
            [1.0],
            [0.0],
            t_end=1.0,
            h=0.1,
            escape_box=Box.cube(1, 0.5),
        )
    assert info.value.record.escaped


def test_generator_pair_decays_at_contraction_rate():
    ctrl = generator_controller()
    [(x0, x0_prime)] = random_pair_states(ctrl, 1, seed=42, radius=0.5)
    report = gas_decay_check(
        ctrl,
        ctrl.closed_loop(),
        x0,
        x0_prime,
        t_end=1.0,
        h=0.01,
        escape_box=escape_box(),
    )
    assert report.passed, report.to_dict()


def test_generator_pair_in_form_coordinates():
    ctrl = generator_controller()
    [(y0, y0_prime)] = random_pair_states(
        ctrl, 1, seed=3, radius=0.5, form_coordinates=True
    )
    report = gas_decay_check(
        ctrl,
        ctrl.transformed_closed_loop(),
        y0,
        y0_prime,
        t_end=1.0,
        h=0.01,
        form_coordinates=True,
    )
    assert report.passed, report.to_dict()


def test_generator_pair_with_input_step_meets_iss_bound():
    ctrl = generator_controller()
    report = iss_bound_check(
        ctrl,
        ctrl.closed_loop(),
        [0.1, -0.1, 0.05],
        [0.1, -0.1, 0.05],
        ZERO_INPUT,
        PiecewiseConstantSignal.from_pairs([[0.0, 0.0], [0.5, 0.1]]),
        t_end=1.0,
        h=0.01,
        escape_box=escape_box(),
    )
    assert report.passed, report.to_dict()
    assert report.input_gap == pytest.approx(0.1)
    data = report.to_dict()
    assert data["kind"] == "iss"
    assert data["grid_points"] == 101


def test_random_pairs_lie_in_the_error_ball():
    ctrl = generator_controller()
    pairs = random_pair_states(ctrl, 4, seed=5, radius=0.6)
    assert pairs == random_pair_states(ctrl, 4, seed=5, radius=0.6)
    for x0, x0_prime in pairs:
        for x in (x0, x0_prime):
            assert np.linalg.norm([float(v) for v in ctrl.isometry(x)]) <= 0.6 + 1e-9


def test_pair_csv_header():
    ctrl = scalar_controller()
    report = gas_decay_check(ctrl, ctrl.closed_loop(), [0.5], [0.1], t_end=0.2, h=0.1)
    text = export_pair_csv(report)
    assert text.splitlines()[0] == "t,x1,x1_prime,u,u_prime,distance,bound"
    assert len(text.splitlines()) == 4


def test_pair_reports_serialize_to_json():
    ctrl = scalar_controller()
    gas = gas_decay_check(ctrl, ctrl.closed_loop(), [0.5], [0.1], t_end=0.2, h=0.1)
    iss = iss_bound_check(
        ctrl,
        linear_scalar_loop(2.0),
        [0.2],
        [0.2],
        ZERO_INPUT,
        PiecewiseConstantSignal.constant(0.3),
        t_end=0.2,
        h=0.1,
    )
    gas_data = json.loads(json.dumps(gas.to_dict()))
    iss_data = json.loads(json.dumps(iss.to_dict()))
    assert gas_data["checks"]["decay_equality"] is True
    assert gas_data["passed"] is True
    assert iss_data["checks"]["iss_bound"] is True
    assert iss_data["input_gap"] == 0.3


def test_generator_endpoint_is_stable_under_step_halving():
    ctrl = generator_controller()
    x0 = [0.3, -0.4, 0.2]
    coarse = integrate(ctrl.closed_loop(), x0, t_end=1.0, h=1e-3)
    fine = integrate(ctrl.closed_loop(), x0, t_end=1.0, h=5e-4)
    assert len(fine) == 2 * len(coarse) - 1
    gap = np.max(np.abs(coarse.final_state - fine.final_state))
    assert gap < 1e-8


@pytest.mark.slow
def test_generator_pairs_over_full_horizon():
    ctrl = generator_controller()
    rng = np.random.default_rng(42)
    for x0, x0_prime in random_pair_states(ctrl, 20, seed=42, radius=0.9):
        report = gas_decay_check(
            ctrl, ctrl.closed_loop(), x0, x0_prime, escape_box=escape_box()
        )
        assert report.passed, report.to_dict()
    for x0, x0_prime in random_pair_states(ctrl, 50, seed=43, radius=0.6):
        report = iss_bound_check(
            ctrl,
            ctrl.closed_loop(),
            x0,
            x0_prime,
            random_schedule(rng, 5.0, 1e-3, pieces=5, amplitude=0.2),
            random_schedule(rng, 5.0, 1e-3, pieces=5, amplitude=0.2),
            escape_box=escape_box(),
        )
        assert report.passed, report.to_dict()
