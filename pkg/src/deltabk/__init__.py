"""deltabk - backstepping synthesis of incrementally stable controllers."""

from importlib.metadata import PackageNotFoundError, version

from .commons import (
    DEFAULT_ALPHA,
    DEFAULT_LAMBDA,
    ConfigError,
    DeltaBkError,
    DomainError,
    ExpressionSyntaxError,
    SingularJacobianError,
    TrajectoryEscapeError,
    UnboundVariableError,
    ValidationError,
)
from .expr import evaluate, free_variables, parse, to_text
from .autodiff import Dual, directional_derivative, gradient, hessian, jacobian
from .sampling import Box
from .model import (
    CoordinateMap,
    ParametricStrictFeedbackSystem,
    StrictFeedbackSystem,
    TransformedSystem,
    VectorField,
    invert_coordinates,
    to_parametric,
    transform_coordinates,
    vector_field,
)
from .synthesis import (
    MetricField,
    SynthesizedController,
    controller_for,
    error_dynamics_matrix,
    invert_psi,
    metric_from_psi,
    metric_recursive,
    psi_map,
    pullback_metric,
    riemannian_distance,
    strict_feedback_controller,
    synthesize,
)
from .verify import (
    DefectResult,
    Tolerances,
    VerificationReport,
    input_defect,
    lyapunov_derivative,
    lyapunov_value,
    positive_definite,
    state_defect,
    verify_region,
)
from .sim import (
    ExpressionSignal,
    PiecewiseConstantSignal,
    TrajectoryRecord,
    export_csv,
    gas_decay_check,
    integrate,
    iss_bound_check,
)
from .config import RunConfig, load_config

try:
    __version__ = version("deltabk")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0+editable"

__all__ = [
    "DEFAULT_ALPHA",
    "DEFAULT_LAMBDA",
    "Box",
    "ConfigError",
    "CoordinateMap",
    "DefectResult",
    "DeltaBkError",
    "DomainError",
    "Dual",
    "ExpressionSignal",
    "ExpressionSyntaxError",
    "MetricField",
    "ParametricStrictFeedbackSystem",
    "PiecewiseConstantSignal",
    "RunConfig",
    "SingularJacobianError",
    "StrictFeedbackSystem",
    "SynthesizedController",
    "Tolerances",
    "TrajectoryEscapeError",
    "TrajectoryRecord",
    "TransformedSystem",
    "UnboundVariableError",
    "ValidationError",
    "VectorField",
    "VerificationReport",
    "controller_for",
    "directional_derivative",
    "error_dynamics_matrix",
    "evaluate",
    "export_csv",
    "free_variables",
    "gas_decay_check",
    "gradient",
    "hessian",
    "input_defect",
    "integrate",
    "invert_coordinates",
    "invert_psi",
    "iss_bound_check",
    "jacobian",
    "load_config",
    "lyapunov_derivative",
    "lyapunov_value",
    "metric_from_psi",
    "metric_recursive",
    "parse",
    "positive_definite",
    "psi_map",
    "pullback_metric",
    "riemannian_distance",
    "state_defect",
    "strict_feedback_controller",
    "synthesize",
    "to_parametric",
    "to_text",
    "transform_coordinates",
    "vector_field",
    "verify_region",
]
