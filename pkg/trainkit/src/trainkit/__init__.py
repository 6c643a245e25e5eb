"""Behavioral-cloning trainer for smooth sinusoidal control networks."""

from trainkit.config import TrainConfig
from trainkit.dataset import Dataset, make_dataset
from trainkit.scenario import ConfigError, CwSetup, LabelError, load_config

__all__ = [
    "TrainConfig", "Dataset", "make_dataset", "ConfigError", "CwSetup",
    "LabelError", "load_config",
]
