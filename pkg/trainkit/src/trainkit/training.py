"""SIREN fitting on a cloned-controller dataset, torch backend.

The network matches the verifier's evaluation exactly: inputs pass
through an affine scale, each hidden layer applies sin(omega (W x + b)),
and a final linear layer emits raw control components. Training is plain
AdamW (no AMSgrad) on mean squared error with a reduce-on-plateau
learning rate: multiply by `decay` when the validation loss fails to
improve by 1% over `patience` epochs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
import torch

from trainkit.config import TrainConfig
from trainkit.dataset import Dataset

__all__ = ["DivergenceError", "TrainResult", "train", "export_doc"]


class DivergenceError(RuntimeError):
    """Training loss left the finite range."""


@dataclass(frozen=True)
class TrainResult:
    """Final losses, the per-epoch curve, and the exported weights doc."""

    val_mse: float
    baseline_mse: float
    test_mse: float
    curve: tuple
    weights: dict


class _Siren(torch.nn.Module):
    def __init__(self, dims, omega, generator):
        super().__init__()
        self.omega = float(omega)
        self.hidden = torch.nn.ModuleList(
            torch.nn.Linear(dims[i], dims[i + 1])
            for i in range(len(dims) - 2))
        self.final = torch.nn.Linear(dims[-2], dims[-1])
        with torch.no_grad():
            # first layer +-1/fan_in, the rest +-sqrt(6/fan_in)/omega
            for i, lin in enumerate([*self.hidden, self.final]):
                fan_in = lin.weight.shape[1]
                bound = 1.0 / fan_in if i == 0 \
                    else math.sqrt(6.0 / fan_in) / self.omega
                lin.weight.uniform_(-bound, bound, generator=generator)
                lin.bias.zero_()

    def forward(self, x):
        for lin in self.hidden:
            x = torch.sin(self.omega * lin(x))
        return self.final(x)


def _input_scale(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Affine map taking the sampling envelope onto the unit box."""
    span = ds.envelope_hi - ds.envelope_lo
    fac = 2.0 / span
    off = -(ds.envelope_hi + ds.envelope_lo) / span
    return off, fac


def export_doc(model: _Siren, off, fac, normalize: bool = False) -> dict:
    """The shared weights schema: scales, sine layers, one linear layer."""
    layers = []
    for lin in model.hidden:
        layers.append({"type": "siren", "omega": model.omega,
                       "W": [[float(v) for v in row]
                             for row in lin.weight.detach()],
                       "b": [float(v) for v in lin.bias.detach()]})
    layers.append({"type": "linear",
                   "W": [[float(v) for v in row]
                         for row in model.final.weight.detach()],
                   "b": [float(v) for v in model.final.bias.detach()]})
    out_dim = model.final.weight.shape[0]
    return {
        "input_scale": {"offset": [float(v) for v in off],
                        "scale": [float(v) for v in fac]},
        "output_scale": {"offset": [0.0] * out_dim,
                         "scale": [1.0] * out_dim},
        "normalize_output": bool(normalize),
        "layers": layers,
    }


def train(cfg: TrainConfig, ds: Dataset, seed: int = 0, weights_path=None,
          curve_path=None, normalize: bool = False) -> TrainResult:
    """Fit a network to the dataset; optionally write weights and curve.

    Raises DivergenceError the first epoch either loss stops being finite.
    """
    if not len(ds.train_x):
        raise ValueError("empty training split")
    off, fac = _input_scale(ds)
    to_t = lambda a: torch.tensor(a, dtype=torch.float32)
    xt, yt = to_t(ds.train_x * fac + off), to_t(ds.train_y)
    xv, yv = to_t(ds.val_x * fac + off), to_t(ds.val_y)
    xs, ys = to_t(ds.test_x * fac + off), to_t(ds.test_y)

    g = torch.Generator().manual_seed(seed)
    dims = (xt.shape[1], *cfg.layers, yt.shape[1])
    model = _Siren(dims, cfg.omega, g)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr, amsgrad=False)
    sched = torch.optim.lr_scheduler.ReduceLROnPlateau(
        opt, mode="min", factor=cfg.decay, patience=cfg.patience,
        threshold=0.01, threshold_mode="rel")
    loss_fn = torch.nn.MSELoss()

    curve = []
    for epoch in range(1, cfg.epochs + 1):
        lr_now = float(opt.param_groups[0]["lr"])
        perm = torch.randperm(len(xt), generator=g)
        total = 0.0
        for s in range(0, len(xt), cfg.batch):
            idx = perm[s:s + cfg.batch]
            opt.zero_grad()
            loss = loss_fn(model(xt[idx]), yt[idx])
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        train_mse = total / len(xt)
        with torch.no_grad():
            val_mse = float(loss_fn(model(xv), yv))
        if not (math.isfinite(train_mse) and math.isfinite(val_mse)):
            raise DivergenceError(
                f"loss left the finite range at epoch {epoch}: "
                f"train {train_mse}, val {val_mse}")
        sched.step(val_mse)
        curve.append((epoch, lr_now, train_mse, val_mse))

    with torch.no_grad():
        # yardstick: the best constant predictor, fitted on train labels
        const = yt.mean(dim=0)
        baseline = float(loss_fn(const.expand_as(yv), yv))
        test_mse = float(loss_fn(model(xs), ys))
        final_val = float(loss_fn(model(xv), yv))

    doc = export_doc(model, off, fac, normalize)
    if weights_path is not None:
        with open(weights_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
    if curve_path is not None:
        with open(curve_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "lr", "train_mse", "val_mse"])
            for row in curve:
                w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])
    return TrainResult(val_mse=final_val, baseline_mse=baseline,
                       test_mse=test_mse, curve=tuple(curve), weights=doc)
