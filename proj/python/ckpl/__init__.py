"""Corrective-knowledge prompt learning, Python front end over the C++ core."""

from ._ckpl import (
    CkplError,
    ExperimentConfig,
    Mode,
    SyntheticTaskSpec,
    TrainConfig,
    ablate,
    base_error,
    check_objective_gradients,
    ckg_loss,
    cosine_lr,
    cosine_similarity,
    difficulty,
    evaluate_run,
    load_config,
    run,
    save_config,
    softmax_with_temperature,
    write_task,
)

__all__ = [
    "CkplError",
    "ExperimentConfig",
    "Mode",
    "SyntheticTaskSpec",
    "TrainConfig",
    "ablate",
    "base_error",
    "check_objective_gradients",
    "ckg_loss",
    "cosine_lr",
    "cosine_similarity",
    "difficulty",
    "evaluate_run",
    "load_config",
    "run",
    "save_config",
    "softmax_with_temperature",
    "write_task",
]
