"""AC load-flow solver and neural surrogates."""

from loadflow._core import (
    Error,
    NonConvergenceError,
    checkpoint_info,
    dataset_columns,
    generate,
    predict,
    read_dataset,
    rng_algorithm,
    solve,
    train,
    validate_case,
    write_dataset,
)

__all__ = [
    "Error",
    "NonConvergenceError",
    "checkpoint_info",
    "dataset_columns",
    "generate",
    "predict",
    "read_dataset",
    "rng_algorithm",
    "solve",
    "train",
    "validate_case",
    "write_dataset",
]
