"""Scenario configs and the rendezvous simulation behind the labeler.

This kit and the verifier share exactly two file formats, scenario
configs and weights JSON, and no code. The planar relative-motion
dynamics are therefore implemented again here, deliberately small:
fixed-step RK4 on a 4-state is plenty for generating labeled samples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConfigError", "LabelError", "CwSetup", "load_config", "tracking_gains",
    "control", "simulate", "flight_time", "envelope",
]

STEPS_PER_WINDOW = 480


class ConfigError(ValueError):
    """Scenario config missing, unreadable, or malformed."""


class LabelError(RuntimeError):
    """A labeler declined one sampled state."""


@dataclass(frozen=True)
class CwSetup:
    """Planar rendezvous scenario decoded from one config document.

    `gain`/`sat_scale` describe the analytic feedback law when the config
    carries one; configs that point at network weights leave them None and
    require a user-supplied labeler.
    """

    n: float
    a_t: float
    t_max: float
    nominal: tuple
    center: tuple
    half_width: tuple
    variables: tuple
    position_scale: float
    velocity_scale: float
    gain: tuple | None
    sat_scale: float | None


def _need(doc, key, where="config"):
    if not isinstance(doc, dict) or key not in doc:
        raise ConfigError(f"{where} lacks '{key}'")
    return doc[key]


def _number(doc, key, where="config"):
    v = _need(doc, key, where)
    if not isinstance(v, (int, float)) or isinstance(v, bool) \
            or not math.isfinite(float(v)):
        raise ConfigError(f"{where}.{key} must be a finite number")
    return float(v)


def tracking_gains(n: float, a_t: float, omega0: float, zeta: float) -> tuple:
    """Feedback matrix whose tanh argument cancels the orbital coupling and
    places the unsaturated loop at (omega0, zeta) on both axes."""
    if a_t <= 0.0:
        raise ConfigError("tracking gains need a_t > 0")
    kp = omega0 * omega0 / a_t
    kd = 2.0 * zeta * omega0 / a_t
    return (
        (-kp - 3.0 * n * n / a_t, 0.0, -kd, -2.0 * n / a_t),
        (0.0, -kp, 2.0 * n / a_t, -kd),
    )


def _decode_gain(doc: dict, n: float, a_t: float):
    kind = _need(doc, "kind", "controller")
    if kind == "analytic-tracking":
        gains = tracking_gains(n, a_t, _number(doc, "omega0", "controller"),
                               _number(doc, "zeta", "controller"))
        return gains, float(doc.get("scale", 1.0))
    if kind == "analytic":
        raw = _need(doc, "gain", "controller")
        try:
            gains = tuple(tuple(float(v) for v in row) for row in raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"controller.gain: {exc}") from exc
        if len(gains) != 2 or any(len(r) != 4 for r in gains):
            raise ConfigError("controller.gain must be 2 rows of 4")
        return gains, float(doc.get("scale", 1.0))
    if kind == "siren":
        # weights-file controllers carry no analytic law to clone
        return None, None
    raise ConfigError(f"unknown controller kind '{kind}'")


def from_doc(doc: dict) -> CwSetup:
    if _need(doc, "scenario") != "cw":
        raise ConfigError("only the 'cw' scenario has a labeler here")
    params = _need(doc, "params")
    n = _number(params, "n", "params")
    a_t = _number(params, "a_t", "params")
    t_max = _number(params, "t_max", "params")
    if n <= 0.0 or a_t < 0.0 or t_max <= 0.0:
        raise ConfigError("params must satisfy n > 0, a_t >= 0, t_max > 0")
    nominal = tuple(float(v) for v in _need(doc, "nominal"))
    if len(nominal) != 4 or any(not math.isfinite(v) for v in nominal):
        raise ConfigError("nominal must be four finite numbers")
    dom = _need(doc, "domain")
    center = tuple(float(v) for v in _need(dom, "center", "domain"))
    hw = tuple(float(v) for v in _need(dom, "half_width", "domain"))
    variables = tuple(int(v) for v in _need(dom, "variables", "domain"))
    if not center or len(center) != len(hw) or len(center) != len(variables):
        raise ConfigError("domain center/half_width/variables disagree")
    if any(h <= 0.0 for h in hw) or any(not 0 <= v < 4 for v in variables) \
            or len(set(variables)) != len(variables):
        raise ConfigError("domain needs positive widths over distinct state "
                          "indices")
    metric = _need(doc, "metric")
    ps = _number(metric, "position_scale", "metric")
    vs = _number(metric, "velocity_scale", "metric")
    if ps <= 0.0 or vs <= 0.0:
        raise ConfigError("metric scales must be positive")
    gain, sat = _decode_gain(_need(doc, "controller"), n, a_t)
    return CwSetup(n=n, a_t=a_t, t_max=t_max, nominal=nominal, center=center,
                   half_width=hw, variables=variables, position_scale=ps,
                   velocity_scale=vs, gain=gain, sat_scale=sat)


def load_config(path) -> CwSetup:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return from_doc(doc)


def control(setup: CwSetup, x) -> list:
    """The analytic feedback law: componentwise saturated linear feedback."""
    if setup.gain is None:
        raise LabelError("config controller provides no analytic labels")
    s = setup.sat_scale
    return [s * math.tanh((row[0] * x[0] + row[1] * x[1] + row[2] * x[2]
                           + row[3] * x[3]) / s) for row in setup.gain]


def _rhs(setup: CwSetup, x, u):
    n = setup.n
    return (
        x[2],
        x[3],
        3.0 * n * n * x[0] + 2.0 * n * x[3] + setup.a_t * u[0],
        -2.0 * n * x[2] + setup.a_t * u[1],
    )


def _deriv(setup: CwSetup, x):
    return _rhs(setup, x, control(setup, x))


def simulate(setup: CwSetup, x0) -> tuple[np.ndarray, np.ndarray]:
    """Closed-loop RK4 grid over [0, t_max]: (times, states) arrays."""
    dt = setup.t_max / STEPS_PER_WINDOW
    x = tuple(float(v) for v in x0)
    states = [x]
    for _ in range(STEPS_PER_WINDOW):
        k1 = _deriv(setup, x)
        k2 = _deriv(setup, tuple(v + 0.5 * dt * d for v, d in zip(x, k1)))
        k3 = _deriv(setup, tuple(v + 0.5 * dt * d for v, d in zip(x, k2)))
        k4 = _deriv(setup, tuple(v + dt * d for v, d in zip(x, k3)))
        x = tuple(v + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d)
                  for v, a, b, c, d in zip(x, k1, k2, k3, k4))
        states.append(x)
    times = np.linspace(0.0, setup.t_max, STEPS_PER_WINDOW + 1)
    return times, np.array(states)


def flight_time(setup: CwSetup, times: np.ndarray, states: np.ndarray):
    """Time of the interior closest approach, None when the weighted
    distance is still falling (or already rising) at the window edges."""
    w = np.array([setup.position_scale] * 2 + [setup.velocity_scale] * 2)
    metric = np.sum((states / w) ** 2, axis=1)
    i = int(np.argmin(metric))
    if i == 0 or i == len(metric) - 1:
        return None
    return float(times[i])


def envelope(setup: CwSetup) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned region every drawn sample must land in.

    Positions sweep from their initial range toward the target at the
    origin, so the hull of that range and zero, padded 25%, covers them.
    Velocities start near nominal and obey the accelerate-from-rest bound
    sqrt(2 a_t d) over the position diagonal d, padded the same way.
    """
    lo = np.array(setup.nominal, dtype=float)
    hi = lo.copy()
    for j, var in enumerate(setup.variables):
        lo[var] = setup.center[j] - setup.half_width[j]
        hi[var] = setup.center[j] + setup.half_width[j]
    spans = []
    for i in (0, 1):
        a, b = min(lo[i], 0.0), max(hi[i], 0.0)
        pad = 0.25 * (b - a)
        lo[i], hi[i] = a - pad, b + pad
        spans.append(b - a)
    d = math.hypot(*spans)
    v_cap = math.sqrt(2.0 * setup.a_t * d) if setup.a_t > 0.0 else 1.0
    for i in (2, 3):
        a, b = lo[i] - v_cap, hi[i] + v_cap
        pad = 0.25 * (b - a)
        lo[i], hi[i] = a - pad, b + pad
    return lo, hi
