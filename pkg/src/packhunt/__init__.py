"""Predator-prey multi-agent actor-critic training with a team
cooperation bonus, plus the deterministic particle world and experiment
harness used to compare the plain and bonus-gated algorithms."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .env import (
    Action,
    ConfigurationError,
    PredatorPreyWorld,
    WorldConfig,
    WorldState,
    boundary_penalty,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    compare,
    load_experiment_config,
    paired_sign_test,
    run_experiment,
)
from .maddpg import (
    AgentLearner,
    BufferNotReady,
    EvalResult,
    MaddpgTrainer,
    Minibatch,
    ReplayBuffer,
    TrainConfig,
    Transition,
    cooperation_bonus,
    evaluate,
    train,
)
from .metrics import MetricsRow, read_metrics_csv, trajectory_bytes, write_metrics_csv
from .nets import (
    AdamState,
    Mlp,
    adam_step,
    gumbel_softmax_sample,
    mlp_backward,
    mlp_forward,
    mlp_init,
    soft_update,
    softmax,
)
from .plots import emit_plots, moving_average

__all__ = [
    "Action",
    "AdamState",
    "AgentLearner",
    "BufferNotReady",
    "CheckpointError",
    "ConfigError",
    "ConfigurationError",
    "EvalResult",
    "ExperimentConfig",
    "MaddpgTrainer",
    "MetricsRow",
    "Minibatch",
    "Mlp",
    "PredatorPreyWorld",
    "ReplayBuffer",
    "TrainConfig",
    "Transition",
    "WorldConfig",
    "WorldState",
    "adam_step",
    "boundary_penalty",
    "compare",
    "cooperation_bonus",
    "emit_plots",
    "evaluate",
    "gumbel_softmax_sample",
    "load_checkpoint",
    "load_experiment_config",
    "mlp_backward",
    "mlp_forward",
    "mlp_init",
    "moving_average",
    "paired_sign_test",
    "read_metrics_csv",
    "run_experiment",
    "save_checkpoint",
    "soft_update",
    "softmax",
    "train",
    "trajectory_bytes",
    "write_metrics_csv",
]
