"""Smooth feedback controllers evaluable over floats or Taylor polynomials.

Two families live here. `SirenNetwork` is a sinusoidal network: each hidden
layer computes sin(omega * (W x + b)) and the final layer is linear, so the
whole map is entire and expands through the polynomial intrinsics unchanged.
`AnalyticController` is a saturated state-feedback law used by tests and
scenarios that need a smooth controller without any trained weights.

Weights travel in a JSON schema (see `save`/`load`): affine input and output
scalings, a `normalize_output` flag, and a layer list ending in a linear
layer.  `forward` runs the identical code path for floats and polynomials.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import dapoly as da

__all__ = [
    "WeightsError",
    "MissingFieldError",
    "DimensionMismatchError",
    "NonFiniteWeightError",
    "NormalizationError",
    "AffineScale",
    "SirenLayer",
    "LinearLayer",
    "SirenNetwork",
    "AnalyticController",
    "forward",
    "analytic_control",
    "init",
    "load",
    "save",
    "to_json",
    "from_json",
]

# below this output norm at the expansion center, a unit direction is
# numerically meaningless and the caller should flag the subdomain
NORM_FLOOR = 1e-6


class WeightsError(ValueError):
    """A weights file violates the schema."""


class MissingFieldError(WeightsError):
    """A required field is absent."""


class DimensionMismatchError(WeightsError):
    """Layer dimensions do not chain."""


class NonFiniteWeightError(WeightsError):
    """A weight, bias, or scale entry is NaN or infinite."""


class NormalizationError(RuntimeError):
    """Output norm too small at the expansion center to normalize."""


def _check_finite(values, what: str) -> None:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteWeightError(f"non-finite entry in {what}")


def _rows(W) -> tuple:
    out = []
    width = None
    for row in W:
        row = tuple(float(v) for v in row)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DimensionMismatchError("ragged weight matrix")
        out.append(row)
    if not out or width == 0:
        raise DimensionMismatchError("empty weight matrix")
    return tuple(out)


@dataclass(frozen=True)
class AffineScale:
    """Componentwise map y_i = scale_i * x_i + offset_i."""

    offset: tuple
    scale: tuple

    def __post_init__(self):
        object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))
        object.__setattr__(self, "scale", tuple(float(v) for v in self.scale))
        if len(self.offset) != len(self.scale):
            raise DimensionMismatchError("offset and scale lengths differ")
        _check_finite(self.offset, "scale offset")
        _check_finite(self.scale, "scale factors")

    @property
    def dim(self) -> int:
        return len(self.offset)

    def apply(self, x: Sequence) -> list:
        if len(x) != self.dim:
            raise DimensionMismatchError(
                f"affine scale expects {self.dim} inputs, got {len(x)}")
        return [s * v + o for v, o, s in zip(x, self.offset, self.scale)]

    @classmethod
    def identity(cls, dim: int) -> "AffineScale":
        return cls((0.0,) * dim, (1.0,) * dim)


@dataclass(frozen=True)
class SirenLayer:
    """y = sin(omega * (W x + b))."""

    weights: tuple
    bias: tuple
    omega: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "weights", _rows(self.weights))
        object.__setattr__(self, "bias", tuple(float(v) for v in self.bias))
        object.__setattr__(self, "omega", float(self.omega))
        if len(self.bias) != len(self.weights):
            raise DimensionMismatchError("bias length differs from row count")
        _check_finite([v for row in self.weights for v in row], "weights")
        _check_finite(self.bias, "bias")
        if not math.isfinite(self.omega) or self.omega <= 0.0:
            raise WeightsError(f"omega must be positive, got {self.omega}")

    @property
    def in_dim(self) -> int:
        return len(self.weights[0])

    @property
    def out_dim(self) -> int:
        return len(self.weights)

    def apply(self, x: Sequence) -> list:
        return [da.sin(self.omega * (_dot(row, x) + b))
                for row, b in zip(self.weights, self.bias)]


@dataclass(frozen=True)
class LinearLayer:
    """y = W x + b, no activation."""

    weights: tuple
    bias: tuple

    def __post_init__(self):
        object.__setattr__(self, "weights", _rows(self.weights))
        object.__setattr__(self, "bias", tuple(float(v) for v in self.bias))
        if len(self.bias) != len(self.weights):
            raise DimensionMismatchError("bias length differs from row count")
        _check_finite([v for row in self.weights for v in row], "weights")
        _check_finite(self.bias, "bias")

    in_dim = SirenLayer.in_dim
    out_dim = SirenLayer.out_dim

    def apply(self, x: Sequence) -> list:
        return [_dot(row, x) + b for row, b in zip(self.weights, self.bias)]


def _dot(row: tuple, x: Sequence):
    acc = row[0] * x[0]
    for w, v in zip(row[1:], x[1:]):
        acc = acc + w * v
    return acc


@dataclass(frozen=True)
class SirenNetwork:
    layers: tuple
    final: LinearLayer
    input_scale: AffineScale
    output_scale: AffineScale
    normalize_output: bool = False

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        dim = self.input_scale.dim
        for i, layer in enumerate(self.layers):
            if layer.in_dim != dim:
                raise DimensionMismatchError(
                    f"layer {i} expects {layer.in_dim} inputs, got {dim}")
            dim = layer.out_dim
        if self.final.in_dim != dim:
            raise DimensionMismatchError(
                f"final layer expects {self.final.in_dim} inputs, got {dim}")
        if self.output_scale.dim != self.final.out_dim:
            raise DimensionMismatchError(
                "output scale length differs from final layer width")

    @property
    def input_dim(self) -> int:
        return self.input_scale.dim

    @property
    def output_dim(self) -> int:
        return self.final.out_dim


@dataclass(frozen=True)
class AnalyticController:
    """u_i = scale * tanh((G x)_i / scale).

    Linear state feedback pushed through tanh, so the control stays smooth,
    vanishes at the origin, and is bounded by `scale` componentwise.  `gain`
    is the full feedback matrix G; `pd` builds the common diagonal case.
    """

    gain: tuple
    scale: float = 1.0

    def __post_init__(self):
        rows = tuple(tuple(float(v) for v in row) for row in self.gain)
        object.__setattr__(self, "gain", rows)
        object.__setattr__(self, "scale", float(self.scale))
        if not rows or not rows[0]:
            raise ValueError("gain matrix must be non-empty")
        if any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("ragged gain matrix")
        _check_finite([v for r in rows for v in r], "gain")
        if not math.isfinite(self.scale) or self.scale <= 0.0:
            raise ValueError(f"saturation scale must be positive, got {self.scale}")

    @classmethod
    def pd(cls, kp: Sequence[float], kd: Sequence[float],
           scale: float = 1.0) -> "AnalyticController":
        """Diagonal gains on a (positions, velocities) state:
        u_i = scale * tanh((-kp_i*x_i - kd_i*x_{d+i}) / scale)."""
        kp, kd = tuple(kp), tuple(kd)
        if len(kp) != len(kd):
            raise ValueError("kp and kd lengths differ")
        if not kp:
            raise ValueError("need at least one axis")
        d = len(kp)
        rows = []
        for i in range(d):
            row = [0.0] * (2 * d)
            row[i] = -float(kp[i])
            row[d + i] = -float(kd[i])
            rows.append(row)
        return cls(tuple(rows), scale)

    @property
    def in_dim(self) -> int:
        return len(self.gain[0])

    @property
    def out_dim(self) -> int:
        return len(self.gain)


def analytic_control(ctrl: AnalyticController, x: Sequence) -> list:
    if len(x) != ctrl.in_dim:
        raise ValueError(f"state length {len(x)} != {ctrl.in_dim}")
    return [ctrl.scale * da.tanh(_dot(row, x) * (1.0 / ctrl.scale))
            for row in ctrl.gain]


def forward(net: SirenNetwork, x: Sequence) -> list:
    """Run the network on floats or Taylor polynomials (same code path)."""
    if len(x) != net.input_dim:
        raise DimensionMismatchError(
            f"network expects {net.input_dim} inputs, got {len(x)}")
    y = net.input_scale.apply(list(x))
    for layer in net.layers:
        y = layer.apply(y)
    y = net.final.apply(y)
    y = net.output_scale.apply(y)
    if net.normalize_output:
        y = _unit(y)
    return y


def _unit(y: list) -> list:
    nsq = y[0] * y[0]
    for v in y[1:]:
        nsq = nsq + v * v
    center = nsq.const if isinstance(nsq, da.TaylorPoly) else nsq
    if center <= NORM_FLOOR ** 2:
        raise NormalizationError(
            f"output norm {math.sqrt(max(center, 0.0)):.3e} below "
            f"{NORM_FLOOR:.0e} at the expansion center")
    inv = da.reciprocal(da.sqrt(nsq))
    return [v * inv for v in y]


def init(dims: Sequence[int], omega: float = 30.0, seed: int = 0) -> SirenNetwork:
    """Fresh network: dims = (input, hidden..., output), >= 1 hidden layer.

    First-layer weights are uniform on +-1/fan_in; all later layers
    (including the final linear one) on +-sqrt(6/fan_in)/omega.  Biases
    start at zero.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 3:
        raise ValueError("need at least (input, hidden, output) sizes")
    if any(d < 1 for d in dims):
        raise ValueError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    layers = []
    for i in range(len(dims) - 2):
        fan_in = dims[i]
        bound = 1.0 / fan_in if i == 0 else math.sqrt(6.0 / fan_in) / omega
        W = rng.uniform(-bound, bound, size=(dims[i + 1], fan_in))
        layers.append(SirenLayer(W.tolist(), [0.0] * dims[i + 1], omega))
    fan_in = dims[-2]
    bound = math.sqrt(6.0 / fan_in) / omega
    W = rng.uniform(-bound, bound, size=(dims[-1], fan_in))
    final = LinearLayer(W.tolist(), [0.0] * dims[-1])
    return SirenNetwork(tuple(layers), final,
                        AffineScale.identity(dims[0]),
                        AffineScale.identity(dims[-1]))


def _need(doc: dict, key: str, where: str = "weights file"):
    if not isinstance(doc, dict) or key not in doc:
        raise MissingFieldError(f"{where} lacks '{key}'")
    return doc[key]


def _scale_from_json(doc: dict, key: str) -> AffineScale:
    sub = _need(doc, key)
    return AffineScale(_need(sub, "offset", key), _need(sub, "scale", key))


def from_json(doc: dict) -> SirenNetwork:
    in_scale = _scale_from_json(doc, "input_scale")
    out_scale = _scale_from_json(doc, "output_scale")
    normalize = _need(doc, "normalize_output")
    if not isinstance(normalize, bool):
        raise WeightsError("normalize_output must be a boolean")
    raw_layers = _need(doc, "layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise WeightsError("layers must be a non-empty list")
    layers = []
    for i, entry in enumerate(raw_layers):
        kind = _need(entry, "type", f"layer {i}")
        W = _need(entry, "W", f"layer {i}")
        b = _need(entry, "b", f"layer {i}")
        last = i == len(raw_layers) - 1
        if kind == "siren":
            if last:
                raise WeightsError("final layer must be linear")
            layers.append(SirenLayer(W, b, _need(entry, "omega", f"layer {i}")))
        elif kind == "linear":
            if not last:
                raise WeightsError("linear layers are final-only")
            return SirenNetwork(tuple(layers), LinearLayer(W, b),
                                in_scale, out_scale, normalize)
        else:
            raise WeightsError(f"unknown layer type '{kind}'")
    raise WeightsError("final layer must be linear")


def to_json(net: SirenNetwork) -> dict:
    layers = [{"type": "siren", "omega": l.omega,
               "W": [list(row) for row in l.weights], "b": list(l.bias)}
              for l in net.layers]
    layers.append({"type": "linear",
                   "W": [list(row) for row in net.final.weights],
                   "b": list(net.final.bias)})
    return {
        "input_scale": {"offset": list(net.input_scale.offset),
                        "scale": list(net.input_scale.scale)},
        "output_scale": {"offset": list(net.output_scale.offset),
                         "scale": list(net.output_scale.scale)},
        "normalize_output": net.normalize_output,
        "layers": layers,
    }


def load(path) -> SirenNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise WeightsError(f"not valid JSON: {exc}") from exc
    return from_json(doc)


def save(net: SirenNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json(net), fh, indent=1, sort_keys=True)
        fh.write("\n")
