"""V-MPO: on-policy maximum a posteriori policy optimization on numpy."""

from .config import TrainConfig, config_reference, load_config, parse_config
from .checkpoint import Checkpoint, CheckpointError
from .trainer import Trainer, TrainingError, evaluate, train

__all__ = [
    "Checkpoint", "CheckpointError", "TrainConfig", "Trainer", "TrainingError",
    "config_reference", "evaluate", "load_config", "parse_config", "train",
]
__version__ = "0.1.0"
