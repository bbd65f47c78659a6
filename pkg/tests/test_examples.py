import math

import numpy as np
import pytest

from deltabk.commons import ConfigError, ValidationError
from deltabk.examples import (
    BUILTIN_SYSTEMS,
    DEFAULT_BOX,
    GeneratorParameters,
    builtin_system,
    equilibrium_form_state,
    escape_box,
    generator_system,
    scalar_demo,
    two_state_demo,
)
from deltabk.examples import oracles
from deltabk.model import ParametricStrictFeedbackSystem, StrictFeedbackSystem
from deltabk.sampling import Box

from .fixtures import DEFAULT_PARAMS


# ---------- Generator parameters ----------


@pytest.mark.parametrize(
    "overrides, message",
    [
        ({"Vs": 0.0}, "Vs\\*G_gen"),
        ({"G_gen": 0.0}, "Vs\\*G_gen"),
        ({"I": 0.0}, "requires I"),
        ({"Kc": 0.0}, "requires Kc"),
        ({"E": math.nan}, "E must be finite"),
        ({"d0": math.inf}, "d0 must be finite"),
    ],
)
def test_generator_parameters_reject(overrides, message):
    with pytest.raises(ValidationError, match=message):
        GeneratorParameters(**overrides)


def test_generator_parameters_from_mapping():
    params = GeneratorParameters.from_mapping({"E": 2, "d0": 1.0})
    assert params.E == 2.0
    assert params.d0 == 1.0
    assert params.as_params()["Kc"] == 1.0


def test_generator_parameters_reject_unknown_names():
    with pytest.raises(ValidationError, match="unknown generator parameters: Q"):
        GeneratorParameters.from_mapping({"Q": 1.0})


# ---------- Generator system ----------


def test_generator_system_defaults():
    sys = generator_system()
    assert isinstance(sys, StrictFeedbackSystem)
    assert sys.name == "generator"
    assert sys.n == 3
    assert sys.box == DEFAULT_BOX
    assert sys.params["d0"] == pytest.approx(math.pi / 3)


def test_generator_box_must_avoid_singular_angle():
    with pytest.raises(ValidationError, match="vanishes for x1"):
        generator_system(GeneratorParameters(d0=0.0))


def test_generator_accepts_narrow_box():
    box = Box.from_intervals([[-0.2, 0.2], [-1.0, 1.0], [-1.0, 1.0]])
    assert generator_system(box=box).box == box


def test_escape_box_brackets_safe_angles():
    box = escape_box()
    assert box.lower[0] == pytest.approx(-math.pi / 3 + 0.05)
    assert box.upper[0] == pytest.approx(2 * math.pi / 3 - 0.05)
    assert box.lower[1:] == (-math.inf, -math.inf)
    assert not box.is_bounded()
    assert box.contains([0.0, 1e6, -1e6])
    assert not box.contains([-math.pi / 3, 0.0, 0.0])


def test_equilibrium_form_state_is_a_rest_point():
    y = list(equilibrium_form_state())
    assert y[2] == pytest.approx(math.sin(math.pi / 3) - 1.0)
    field = oracles.transformed_field(DEFAULT_PARAMS, y, 0.0)
    assert field[0] == 0.0
    assert field[1] == pytest.approx(0.0, abs=1e-15)


def test_metric_oracle_at_operating_point():
    expected = np.array([[4.25, 2.5, 1.5], [2.5, 2.0, 1.0], [1.5, 1.0, 1.0]])
    actual = np.array(oracles.metric_oracle(DEFAULT_PARAMS, [0.0, 0.0, 0.0]))
    assert actual == pytest.approx(expected, abs=1e-15)
    assert np.linalg.det(actual) == pytest.approx(1.0)


# ---------- Demos and registry ----------


def test_scalar_demo():
    sys = scalar_demo()
    assert isinstance(sys, ParametricStrictFeedbackSystem)
    assert sys.n == 1
    assert sys.b == ()
    assert sys.name == "scalar-demo"


def test_two_state_demo():
    sys = two_state_demo()
    assert sys.n == 2
    assert sys.b == (1.0,)
    assert sys.vector_field()([0.5, -0.25], 0.3) == pytest.approx(
        [math.sin(0.5) - 0.25, 0.3]
    )


@pytest.mark.parametrize("name", sorted(BUILTIN_SYSTEMS))
def test_builtin_systems_by_name(name):
    assert builtin_system(name).name == name


def test_unknown_builtin_system():
    with pytest.raises(ConfigError, match="unknown built-in system 'pendulum'"):
        builtin_system("pendulum")
