"""Segmented-trajectory sampling into supervised state/control pairs.

Each closed-loop trajectory is cut into k equal segments over its flight
time and contributes one uniformly drawn state per segment, labeled by
the controller being cloned. The test split always uses k = 1, one
sample per trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from trainkit import scenario as sn

__all__ = ["Dataset", "make_dataset"]


@dataclass(frozen=True)
class Dataset:
    """Three supervised splits plus the sampling envelope they obey.

    `skipped` counts samples the labeler declined or that left the
    envelope; they are replaced, so the split sizes stay exact.
    """

    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    envelope_lo: np.ndarray
    envelope_hi: np.ndarray
    skipped: int


def _interp(times, states, t):
    i = int(np.searchsorted(times, t, side="right")) - 1
    i = min(max(i, 0), len(times) - 2)
    w = (t - times[i]) / (times[i + 1] - times[i])
    return (1.0 - w) * states[i] + w * states[i + 1]


def _start_state(setup, rng):
    x0 = list(setup.nominal)
    for j, var in enumerate(setup.variables):
        x0[var] = setup.center[j] + setup.half_width[j] \
            * float(rng.uniform(-1.0, 1.0))
    return x0


def _collect(setup, size, k, labeler, rng, lo, hi, skipped):
    xs: list = []
    ys: list = []
    while len(xs) < size:
        times, states = sn.simulate(setup, _start_state(setup, rng))
        tof = sn.flight_time(setup, times, states)
        if tof is None:
            continue
        for seg in range(k):
            if len(xs) >= size:
                break
            t = float(rng.uniform(seg * tof / k, (seg + 1) * tof / k))
            x = _interp(times, states, t)
            if not (np.all(np.isfinite(x)) and np.all(lo <= x)
                    and np.all(x <= hi)):
                skipped[0] += 1
                continue
            try:
                y = labeler(list(x))
            except sn.LabelError:
                skipped[0] += 1
                continue
            y = np.asarray(y, dtype=float)
            if y.ndim != 1 or not np.all(np.isfinite(y)):
                skipped[0] += 1
                continue
            xs.append(np.asarray(x, dtype=float))
            ys.append(y)
    return np.array(xs), np.array(ys)


def make_dataset(setup: sn.CwSetup, cfg, labeler=None, seed: int = 0) -> Dataset:
    """Draw exact train/val/test sizes from fresh closed-loop trajectories.

    `labeler` maps one state to a control vector and may raise LabelError
    to decline a sample; the default clones the config's analytic law.
    """
    if labeler is None:
        if setup.gain is None:
            raise sn.ConfigError(
                "config controller provides no analytic labels; "
                "pass an explicit labeler")
        labeler = lambda x: sn.control(setup, x)
    rng = np.random.default_rng(seed)
    lo, hi = sn.envelope(setup)
    skipped = [0]
    train = _collect(setup, cfg.sizes[0], cfg.k, labeler, rng, lo, hi, skipped)
    val = _collect(setup, cfg.sizes[1], cfg.k, labeler, rng, lo, hi, skipped)
    # the held-out split draws one state per trajectory
    test = _collect(setup, cfg.sizes[2], 1, labeler, rng, lo, hi, skipped)
    return Dataset(train_x=train[0], train_y=train[1],
                   val_x=val[0], val_y=val[1],
                   test_x=test[0], test_y=test[1],
                   envelope_lo=lo, envelope_hi=hi, skipped=skipped[0])
