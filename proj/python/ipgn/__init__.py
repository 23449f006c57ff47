from ._ipgn import (
    ConfigError,
    InteriorViolation,
    IpmConfig,
    ModelProblem,
    ProblemConfig,
    fraction_to_boundary,
    solve,
    spectral,
)

__all__ = [
    "ConfigError",
    "InteriorViolation",
    "IpmConfig",
    "ModelProblem",
    "ProblemConfig",
    "fraction_to_boundary",
    "solve",
    "spectral",
]
