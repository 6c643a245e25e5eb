"""Run configuration shared by dataset generation and fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one dataset-plus-training run.

    `k` is the number of segments each trajectory is cut into, one sample
    per segment; `sizes` are the exact (train, val, test) sample counts.
    The optimizer drops the learning rate by `decay` whenever the
    validation loss fails to improve by 1% over `patience` epochs.
    """

    epochs: int = 300
    batch: int = 1000
    lr: float = 1e-4
    decay: float = 0.6
    patience: int = 10
    omega: float = 30.0
    layers: tuple = (32, 32, 32, 32, 32)
    k: int = 100
    sizes: tuple = (10000, 1000, 100)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "sizes", tuple(self.sizes))
        for name in ("epochs", "batch", "patience", "k"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        for name in ("lr", "omega"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) \
                    or not math.isfinite(float(v)) or v <= 0.0:
                raise ValueError(f"{name} must be a positive number, got {v!r}")
        if not isinstance(self.decay, float) or not 0.0 < self.decay < 1.0:
            raise ValueError(f"decay must sit inside (0, 1), got {self.decay!r}")
        if not self.layers or any(
                not isinstance(w, int) or isinstance(w, bool) or w < 1
                for w in self.layers):
            raise ValueError(f"layers must be positive widths, got {self.layers!r}")
        if len(self.sizes) != 3 or any(
                not isinstance(s, int) or isinstance(s, bool) or s < 1
                for s in self.sizes):
            raise ValueError(
                f"sizes must be three positive counts, got {self.sizes!r}")

    @classmethod
    def toy(cls) -> "TrainConfig":
        """Desk-scale preset: three sine layers of 16, minutes not hours."""
        return cls(epochs=20, batch=128, lr=1e-3, layers=(16, 16, 16),
                   k=8, sizes=(2048, 512, 100))
