"""Python bindings for the ustatbench C++ core."""

from ._ustatbench import (
    EXIT_ASSERTION,
    EXIT_CONFIG,
    EXIT_OK,
    ArgumentError,
    ConfigError,
    DegenerateError,
    Error,
    EstimationError,
    ExperimentError,
    InputError,
    ResourceError,
    UnsupportedError,
    prefix_u,
    run_cli,
    run_experiment,
    sample,
    sup_abs_wiener_cdf,
    version,
)

__version__ = version()

__all__ = [
    "EXIT_ASSERTION",
    "EXIT_CONFIG",
    "EXIT_OK",
    "ArgumentError",
    "ConfigError",
    "DegenerateError",
    "Error",
    "EstimationError",
    "ExperimentError",
    "InputError",
    "ResourceError",
    "UnsupportedError",
    "prefix_u",
    "run_cli",
    "run_experiment",
    "sample",
    "sup_abs_wiener_cdf",
    "version",
]
