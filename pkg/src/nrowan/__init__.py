"""NROWAN-DQN: NoisyNet-DQN with output-layer noise reduction and online weight adjustment."""

from .agent import AgentConfig, QNetwork, default_config, evaluate, train, train_and_evaluate
from .envs import make_env
from .harness import ExperimentConfig, compare, emit_curves, run_experiment, sweep

__all__ = [
    "AgentConfig",
    "ExperimentConfig",
    "QNetwork",
    "compare",
    "default_config",
    "emit_curves",
    "evaluate",
    "make_env",
    "run_experiment",
    "sweep",
    "train",
    "train_and_evaluate",
]
