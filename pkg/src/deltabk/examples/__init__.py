"""Built-in models exposed by name on the command line."""

from typing import Callable

from ..commons import ConfigError
from ..model import System
from .demos import scalar_demo, two_state_demo
from .generator import (
    DEFAULT_BOX,
    GeneratorParameters,
    equilibrium_form_state,
    escape_box,
    generator_system,
)

BUILTIN_SYSTEMS: dict[str, Callable[[], System]] = {
    "generator": generator_system,
    "scalar-demo": scalar_demo,
    "two-state-demo": two_state_demo,
}


def builtin_system(name: str) -> System:
    try:
        factory = BUILTIN_SYSTEMS[name]
    except KeyError:
        raise ConfigError(
            f"unknown built-in system {name!r}; "
            f"choose one of {', '.join(sorted(BUILTIN_SYSTEMS))}"
        ) from None
    return factory()


__all__ = [
    "BUILTIN_SYSTEMS",
    "DEFAULT_BOX",
    "GeneratorParameters",
    "builtin_system",
    "equilibrium_form_state",
    "escape_box",
    "generator_system",
    "scalar_demo",
    "two_state_demo",
]
