"""Concrete dynamics and event scenarios.

Two families: planar relative motion about a circular reference orbit with a
smooth feedback controller steering toward the target, and an interplanetary
two-body transfer watched for a sphere-of-influence crossing against a
Keplerian planet ephemeris.  Everything here evaluates over floats or Taylor
polynomials alike, so the same right-hand sides feed both pointwise checks
and jet transport.

A scenario object bundles dynamics, controller, event definition, and metric,
and exposes `expand(domain, order)` producing the per-subdomain polynomial
maps the splitting loop consumes, plus `pointwise(x0)` for sampled ground
truth.  Scenario configs travel as JSON (see `load_config`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import ads
from . import controllers as ct
from . import dapoly as da
from . import eventmap as em
from . import flow

__all__ = [
    "ConfigError",
    "FAILURES",
    "CwParams",
    "TwoBodyParams",
    "KeplerElements",
    "EventMetric",
    "cw_rhs",
    "two_body_rhs",
    "kepler_solve",
    "kepler_state",
    "squared_length",
    "residual_weights",
    "soi_events",
    "cw_tracking_gains",
    "CwScenario",
    "TwoBodyScenario",
    "default_cw_scenario",
    "default_cw_config",
    "load_config",
    "build_setup",
    "VerifySetup",
]


class ConfigError(ValueError):
    """A scenario config violates the schema."""


# -- parameter sets ---------------------------------------------------------


@dataclass(frozen=True)
class CwParams:
    """Planar relative motion about a circular orbit.

    n: mean motion (rad/s); a_t: thrust acceleration (m/s^2); t_max:
    detection window (s).
    """

    n: float
    a_t: float
    t_max: float

    def __post_init__(self):
        if self.n <= 0.0:
            raise ValueError(f"mean motion must be positive, got {self.n}")
        if self.a_t < 0.0:
            raise ValueError(f"thrust acceleration must be >= 0, got {self.a_t}")
        if self.t_max <= 0.0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")


@dataclass(frozen=True)
class TwoBodyParams:
    """Heliocentric transfer with thrust and mass flow (canonical units)."""

    mu: float
    thrust: float
    v_exhaust: float
    dry_mass: float
    epoch: float
    t_max: float
    r_soi: float

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.r_soi <= 0.0:
            raise ValueError(f"r_soi must be positive, got {self.r_soi}")
        if self.thrust < 0.0 or self.v_exhaust <= 0.0:
            raise ValueError("thrust must be >= 0 and v_exhaust > 0")


@dataclass(frozen=True)
class KeplerElements:
    """Classical elements at epoch t = 0: a, e, inclination, node, argument
    of periapsis, mean anomaly (angles in radians)."""

    a: float
    e: float
    inc: float = 0.0
    raan: float = 0.0
    argp: float = 0.0
    m0: float = 0.0

    def __post_init__(self):
        if self.a <= 0.0:
            raise ValueError(f"semi-major axis must be positive, got {self.a}")
        if not 0.0 <= self.e < 1.0:
            raise ValueError(f"need 0 <= e < 1, got {self.e}")


@dataclass(frozen=True)
class EventMetric:
    """What gets bounded on the event manifold.

    kind "squared-length": quadratic form dx' W dx on the event state.
    kind "soi-relative-velocity": speed relative to the planet at the event.
    """

    kind: str
    threshold: float
    weights: tuple = ()

    def __post_init__(self):
        if self.kind not in ("squared-length", "soi-relative-velocity"):
            raise ValueError(f"unknown metric kind '{self.kind}'")
        rows = tuple(tuple(float(v) for v in row) for row in self.weights)
        object.__setattr__(self, "weights", rows)
        if self.kind == "squared-length":
            W = np.asarray(rows, dtype=float)
            if W.ndim != 2 or W.shape[0] != W.shape[1]:
                raise ValueError("weights must be a square matrix")
            if not np.allclose(W, W.T, atol=1e-12):
                raise ValueError("weights must be symmetric")
            if np.any(np.linalg.eigvalsh(W) <= 0.0):
                raise ValueError("weights must be positive definite")


def residual_weights(scales: Sequence[float]) -> tuple:
    """Diagonal quadratic-form weights 0.5 / s_i^2, so a residual sitting at
    one scale unit in a single component contributes 0.5."""
    return tuple(
        tuple(0.5 / float(s) ** 2 if i == j else 0.0
              for j in range(len(scales)))
        for i, s in enumerate(scales))


# -- right-hand sides -------------------------------------------------------


def cw_rhs(x: Sequence, u: Sequence, p: CwParams) -> list:
    """Relative-motion derivative for state (x, y, vx, vy) and a control
    direction u scaled by the thrust acceleration."""
    if all(not isinstance(v, da.TaylorPoly) for v in u):
        norm = math.hypot(u[0], u[1])
        if norm > 1.0 + 1e-9:
            raise ValueError(f"control direction norm {norm} exceeds 1")
    n = p.n
    return [
        x[2],
        x[3],
        3.0 * n * n * x[0] + 2.0 * n * x[3] + p.a_t * u[0],
        -2.0 * n * x[2] + p.a_t * u[1],
    ]


def two_body_rhs(x: Sequence, u: Sequence, p: TwoBodyParams) -> list:
    """Derivative of (r, v, m) under a central body plus thrust along u."""
    m = x[6]
    mc = m.const if isinstance(m, da.TaylorPoly) else m
    if mc <= p.dry_mass:
        raise flow.PropagationError(f"mass {mc} at or below dry mass", t=0.0, h=0.0)
    r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
    inv_r3 = da.reciprocal(r2) * da.reciprocal(da.sqrt(r2))
    acc = p.thrust * da.reciprocal(m) if p.thrust else 0.0
    out = [x[3], x[4], x[5]]
    for i in range(3):
        grav = -p.mu * x[i] * inv_r3
        out.append(grav + acc * u[i] if p.thrust else grav)
    out.append(-p.thrust / p.v_exhaust if p.thrust else 0.0)
    return out


# -- ephemeris --------------------------------------------------------------


def kepler_solve(m_anom: float, e: float, tol: float = 1e-13,
                 max_iter: int = 50) -> float:
    """Eccentric anomaly from M = E - e sin E by Newton, bisection fallback."""
    m_anom = math.remainder(m_anom, 2.0 * math.pi)
    E = m_anom if e < 0.8 else math.pi * (1.0 if m_anom >= 0 else -1.0)
    for _ in range(max_iter):
        f = E - e * math.sin(E) - m_anom
        if abs(f) < tol:
            return E
        E -= f / (1.0 - e * math.cos(E))
    # Newton stalled; the function is monotone so bisection always lands
    lo, hi = m_anom - e, m_anom + e
    for _ in range(200):
        E = 0.5 * (lo + hi)
        if E - e * math.sin(E) - m_anom > 0.0:
            hi = E
        else:
            lo = E
        if hi - lo < tol:
            return E
    raise ArithmeticError(f"Kepler solve failed for M={m_anom}, e={e}")


def _rotation(el: KeplerElements) -> np.ndarray:
    cO, sO = math.cos(el.raan), math.sin(el.raan)
    ci, si = math.cos(el.inc), math.sin(el.inc)
    cw, sw = math.cos(el.argp), math.sin(el.argp)
    # Rz(raan) Rx(inc) Rz(argp), orbital plane to inertial
    return np.array([
        [cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si],
        [sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si],
        [sw * si, cw * si, ci],
    ])


def kepler_state(el: KeplerElements, mu: float, t):
    """Planet position and velocity at time t; t may be a Taylor polynomial,
    in which case the ephemeris comes back as polynomials in time."""
    n = math.sqrt(mu / el.a ** 3)
    m_anom = el.m0 + n * t
    if isinstance(t, da.TaylorPoly):
        E = da.constant(kepler_solve(m_anom.const, el.e),
                        t.nvars, t.order)
        # E = M + e sin E is a contraction for e < 1; polish to fixed point
        for _ in range(2 * t.order + 4):
            E = m_anom + el.e * da.sin(E)
    else:
        E = kepler_solve(m_anom, el.e)
    cE, sE = da.cos(E), da.sin(E)
    root = math.sqrt(1.0 - el.e ** 2)
    xp = el.a * (cE - el.e)
    yp = el.a * root * sE
    r = el.a * (1.0 - el.e * cE)
    rate = el.a * n * da.reciprocal(r) if isinstance(r, da.TaylorPoly) \
        else el.a * n / r
    vxp = -el.a * rate * sE
    vyp = el.a * root * rate * cE
    R = _rotation(el)
    pos = [R[i][0] * xp + R[i][1] * yp for i in range(3)]
    vel = [R[i][0] * vxp + R[i][1] * vyp for i in range(3)]
    return pos, vel


# -- event metrics ----------------------------------------------------------


def squared_length(dx: Sequence, weights: Sequence) -> object:
    """Quadratic form dx' W dx over floats or polynomials."""
    acc = 0.0
    for i, row in enumerate(weights):
        for j, w in enumerate(row):
            if w:
                acc = acc + w * dx[i] * dx[j]
    return acc


def soi_events(x: Sequence, t, p: TwoBodyParams, planet: KeplerElements):
    """Crossing value ||r - r_p|| - r_soi and relative speed ||v - v_p||."""
    pos, vel = kepler_state(planet, p.mu, t)
    dr = [x[i] - pos[i] for i in range(3)]
    dv = [x[3 + i] - vel[i] for i in range(3)]
    dist = da.sqrt(dr[0] * dr[0] + dr[1] * dr[1] + dr[2] * dr[2])
    speed = da.sqrt(dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2])
    return dist - p.r_soi, speed


# -- controllers wired into the loop ----------------------------------------


def cw_tracking_gains(p: CwParams, omega0: float, zeta: float) -> tuple:
    """Feedback matrix whose tanh argument cancels the orbital coupling and
    places the unsaturated closed loop at (omega0, zeta) on both axes."""
    if p.a_t <= 0.0:
        raise ValueError("tracking gains need a_t > 0")
    kp = omega0 * omega0 / p.a_t
    kd = 2.0 * zeta * omega0 / p.a_t
    n = p.n
    return (
        (-kp - 3.0 * n * n / p.a_t, 0.0, -kd, -2.0 * n / p.a_t),
        (0.0, -kp, 2.0 * n / p.a_t, -kd),
    )


def _control_fn(controller):
    if isinstance(controller, ct.AnalyticController):
        return lambda x: ct.analytic_control(controller, x)
    if isinstance(controller, ct.SirenNetwork):
        return lambda x: ct.forward(controller, x)
    raise TypeError(f"unsupported controller type {type(controller).__name__}")


# -- scenario objects -------------------------------------------------------


def _two_pass_event_time(sys, x0, spec, t_max, order, step):
    """Detect, refine, then refine once more from a freshly propagated
    record; the second pass removes the detector's propagation error.
    The returned record holds the state at the final refined time."""
    rec = em.detect(sys, x0, spec, t_max, ctrl=step)
    if rec is None:
        return None
    t_e = em.refine(sys, rec, spec, max(order, 2))
    state = flow.propagate(sys, x0, 0.0, t_e, ctrl=step, keep_log=False).state
    again = em.EventRecord(t_e=t_e, x_e=list(state),
                           value=float(spec.value(state, t_e)))
    t_e = em.refine(sys, again, spec, max(order, 2))
    state = flow.propagate(sys, x0, 0.0, t_e, ctrl=step, keep_log=False).state
    final = em.EventRecord(t_e=t_e, x_e=list(state),
                           value=float(spec.value(state, t_e)))
    return t_e, final


# everything a pipeline stage may raise on a pathological subdomain or sample
FAILURES = (em.RefinementError, da.SingularMapError, da.IntrinsicDomainError,
            flow.PropagationError, ct.NormalizationError)


@dataclass(frozen=True)
class CwScenario:
    """Relative-motion rendezvous watched for the closest weighted approach.

    The domain spans deviations of the state components listed in
    `domain_vars` (positions by default); the rest stay pinned at the
    nominal state.  `output_scales` nondimensionalize the event-map
    components (x, y, vx, vy, t) for splitting decisions.
    """

    params: CwParams
    controller: object
    nominal: tuple
    metric: EventMetric
    domain_vars: tuple = (0, 1)
    output_scales: tuple = (5.0, 5.0, 0.01, 0.01, 3600.0)
    step: flow.StepControl = field(default_factory=flow.StepControl)

    def __post_init__(self):
        object.__setattr__(self, "nominal", tuple(float(v) for v in self.nominal))
        object.__setattr__(self, "domain_vars", tuple(self.domain_vars))
        object.__setattr__(self, "output_scales",
                           tuple(float(s) for s in self.output_scales))
        if len(self.nominal) != 4:
            raise ValueError("nominal state must have 4 components")
        if len(self.output_scales) != 5:
            raise ValueError("need 5 output scales (state + time)")
        if not self.domain_vars or sorted(set(self.domain_vars)) != \
                sorted(self.domain_vars) or \
                any(not 0 <= v < 4 for v in self.domain_vars):
            raise ValueError("domain_vars must be distinct state indices")
        if self.metric.kind != "squared-length":
            raise ValueError("relative-motion scenarios bound a squared length")

    @property
    def metric_threshold(self) -> float:
        return self.metric.threshold

    def system(self) -> flow.OdeSystem:
        control = _control_fn(self.controller)
        p = self.params
        return flow.OdeSystem(4, lambda x, t: cw_rhs(x, control(x), p),
                              name="relative-motion")

    def event_spec(self) -> em.EventSpec:
        W = self.metric.weights
        return em.EventSpec(value=lambda x, t: squared_length(x, W),
                            mode="minimum")

    def _center_state(self, dom: ads.Domain) -> list:
        x0 = list(self.nominal)
        for j, var in enumerate(self.domain_vars):
            x0[var] = dom.center[j]
        return x0

    def pointwise(self, x0: Sequence, order: int = 4):
        """Ground-truth event for one initial state: (t_e, state, metric)."""
        sys = self.system()
        spec = self.event_spec()
        hit = _two_pass_event_time(sys, list(x0), spec, self.params.t_max,
                                   order, self.step)
        if hit is None:
            return None
        t_e, rec = hit
        return t_e, rec.x_e, rec.value

    def sample_truth(self, x0: Sequence, order: int = 4):
        """Event outputs and metric for one initial state, ordered like the
        expansion outputs; None when no event is found."""
        hit = self.pointwise(x0, order)
        if hit is None:
            return None
        t_e, x_e, value = hit
        return tuple(x_e) + (t_e,), float(value)

    def expand(self, dom: ads.Domain, order: int) -> ads.Expansion:
        if dom.nvars != len(self.domain_vars):
            return ads.Expansion(
                "failed", f"domain has {dom.nvars} variables, "
                f"scenario expects {len(self.domain_vars)}")
        sys = self.system()
        spec = self.event_spec()
        x0 = self._center_state(dom)
        nv = dom.nvars + 1
        try:
            hit = _two_pass_event_time(sys, x0, spec, self.params.t_max,
                                       order, self.step)
            if hit is None:
                return ads.Expansion(
                    "no-event", "no interior metric minimum in the window")
            t_e, _ = hit
            seeds = []
            for i in range(4):
                if i in self.domain_vars:
                    j = self.domain_vars.index(i)
                    seeds.append(x0[i] + dom.half_width[j]
                                 * da.variable(j, nv, order))
                else:
                    seeds.append(x0[i])
            res = em.build_event_map_seeded(sys, seeds, spec, t_e, order,
                                            ctrl=self.step)
        except FAILURES as exc:
            return ads.Expansion("failed", f"{type(exc).__name__}: {exc}")
        comps = list(res.state.components) + [res.time]
        outputs = da.TaylorMap(comps)
        trigger = da.TaylorMap([c * (1.0 / s)
                                for c, s in zip(comps, self.output_scales)])
        metric_poly = squared_length(res.state.components, self.metric.weights)
        return ads.Expansion("ok", trigger=trigger, outputs=outputs,
                             output_names=("x", "y", "vx", "vy", "t_e"),
                             metric=metric_poly, condition=res.condition)


@dataclass(frozen=True)
class TwoBodyScenario:
    """Transfer watched for a terminal sphere-of-influence crossing; the
    metric is the relative speed at entry."""

    params: TwoBodyParams
    controller: object
    planet: KeplerElements
    nominal: tuple
    threshold: float
    domain_vars: tuple = (3, 4, 5)
    output_scales: tuple = (1.0, 1.0, 1.0, 1.0)
    step: flow.StepControl = field(default_factory=flow.StepControl)

    def __post_init__(self):
        object.__setattr__(self, "nominal", tuple(float(v) for v in self.nominal))
        object.__setattr__(self, "domain_vars", tuple(self.domain_vars))
        object.__setattr__(self, "output_scales",
                           tuple(float(s) for s in self.output_scales))
        if len(self.nominal) != 7:
            raise ValueError("nominal state must have 7 components")
        if len(self.output_scales) != 4:
            raise ValueError("need 4 output scales (velocity + time)")
        if any(not 0 <= v < 7 for v in self.domain_vars):
            raise ValueError("domain_vars must be state indices")

    @property
    def metric_threshold(self) -> float:
        return self.threshold

    def system(self) -> flow.OdeSystem:
        p = self.params
        if self.controller is None or p.thrust == 0.0:
            return flow.OdeSystem(
                7, lambda x, t: two_body_rhs(x, (0.0, 0.0, 0.0), p),
                name="ballistic-transfer")
        control = _control_fn(self.controller)
        return flow.OdeSystem(7, lambda x, t: two_body_rhs(x, control(x), p),
                              name="transfer")

    def event_spec(self) -> em.EventSpec:
        p, planet = self.params, self.planet
        return em.EventSpec(
            value=lambda x, t: soi_events(x, t, p, planet)[0],
            mode="crossing", terminal=True)

    def pointwise(self, x0: Sequence, order: int = 4):
        sys = self.system()
        spec = self.event_spec()
        hit = _two_pass_event_time(sys, list(x0), spec, self.params.t_max,
                                   order, self.step)
        if hit is None:
            return None
        t_e, rec = hit
        _, speed = soi_events(rec.x_e, t_e, self.params, self.planet)
        return t_e, rec.x_e, speed

    def sample_truth(self, x0: Sequence, order: int = 4):
        """Velocity-and-time outputs plus the relative speed for one initial
        state; None when the crossing never happens."""
        hit = self.pointwise(x0, order)
        if hit is None:
            return None
        t_e, x_e, speed = hit
        return tuple(x_e[3:6]) + (t_e,), float(speed)

    def expand(self, dom: ads.Domain, order: int) -> ads.Expansion:
        if dom.nvars != len(self.domain_vars):
            return ads.Expansion(
                "failed", f"domain has {dom.nvars} variables, "
                f"scenario expects {len(self.domain_vars)}")
        sys = self.system()
        spec = self.event_spec()
        x0 = list(self.nominal)
        for j, var in enumerate(self.domain_vars):
            x0[var] = dom.center[j]
        nv = dom.nvars + 1
        try:
            hit = _two_pass_event_time(sys, x0, spec, self.params.t_max,
                                       order, self.step)
            if hit is None:
                return ads.Expansion("no-event", "no crossing in the window")
            t_e, _ = hit
            seeds = []
            for i in range(7):
                if i in self.domain_vars:
                    j = self.domain_vars.index(i)
                    seeds.append(x0[i] + dom.half_width[j]
                                 * da.variable(j, nv, order))
                else:
                    seeds.append(x0[i])
            res = em.build_event_map_seeded(sys, seeds, spec, t_e, order,
                                            ctrl=self.step)
            _, speed = soi_events(res.state.components, res.time,
                                  self.params, self.planet)
        except FAILURES as exc:
            return ads.Expansion("failed", f"{type(exc).__name__}: {exc}")
        # positional components stay out of the map; velocity and time only
        comps = [res.state.components[3 + i] for i in range(3)] + [res.time]
        outputs = da.TaylorMap(comps)
        trigger = da.TaylorMap([c * (1.0 / s)
                                for c, s in zip(comps, self.output_scales)])
        return ads.Expansion("ok", trigger=trigger, outputs=outputs,
                             output_names=("dvx", "dvy", "dvz", "t_e"),
                             metric=speed, condition=res.condition)


# -- defaults and config I/O ------------------------------------------------

# documented assumptions, overridable in config: low-orbit mean motion,
# thrust authority high enough to keep the tanh unsaturated over the domain
# (weaker thrust lets the tidal term escape the compensation), and closed
# loop placed so the weighted miss dips at about 3.34 h inside a 4 h window
CW_DEFAULTS = {
    "n": 1.1314e-3,
    "a_t": 0.05,
    "t_max": 14400.0,
    "omega0": 3.0414e-4,
    "zeta": 0.75,
    "nominal": (500.0, -500.0, 0.0, 0.0),
    "half_width": (55.0, 150.0),
    "position_scale": 5.0,
    "velocity_scale": 0.01,
    "threshold": 1.0,
}


def default_cw_scenario(**overrides):
    """The stock rendezvous scenario plus its root domain."""
    d = dict(CW_DEFAULTS)
    d.update(overrides)
    p = CwParams(n=d["n"], a_t=d["a_t"], t_max=d["t_max"])
    gains = cw_tracking_gains(p, d["omega0"], d["zeta"])
    # componentwise bound 1/sqrt(2) keeps the direction norm at most 1
    controller = ct.AnalyticController(gains, scale=2.0 ** -0.5)
    scales = (d["position_scale"],) * 2 + (d["velocity_scale"],) * 2
    metric = EventMetric("squared-length", d["threshold"],
                         residual_weights(scales))
    scen = CwScenario(
        params=p, controller=controller, nominal=tuple(d["nominal"]),
        metric=metric,
        output_scales=scales + (3600.0,))
    root = ads.Domain(tuple(d["nominal"][:2]), tuple(d["half_width"]))
    return scen, root


def default_cw_config() -> dict:
    """Config document equivalent to `default_cw_scenario()`."""
    d = CW_DEFAULTS
    return {
        "schema_version": 1,
        "scenario": "cw",
        "params": {"n": d["n"], "a_t": d["a_t"], "t_max": d["t_max"]},
        "nominal": list(d["nominal"]),
        "domain": {"center": list(d["nominal"][:2]),
                   "half_width": list(d["half_width"]),
                   "variables": [0, 1]},
        "metric": {"kind": "squared-length",
                   "position_scale": d["position_scale"],
                   "velocity_scale": d["velocity_scale"],
                   "threshold": d["threshold"]},
        "controller": {"kind": "analytic-tracking",
                       "omega0": d["omega0"], "zeta": d["zeta"],
                       "scale": 2.0 ** -0.5},
        "ads": {"order": 4, "e_tol": 1e-4, "n_max": 15},
    }


@dataclass(frozen=True)
class VerifySetup:
    """Everything a verification run needs, decoded from one config."""

    scenario: object
    root: ads.Domain
    cfg: ads.AdsConfig
    echo: dict


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


def _build_controller(doc: dict, params, base_dir):
    kind = _need(doc, "kind", "controller")
    if kind == "analytic":
        gain = _need(doc, "gain", "controller")
        try:
            return ct.AnalyticController(tuple(tuple(r) for r in gain),
                                         scale=float(doc.get("scale", 1.0)))
        except ValueError as exc:
            raise ConfigError(f"controller: {exc}") from exc
    if kind == "analytic-tracking":
        if not isinstance(params, CwParams):
            raise ConfigError("analytic-tracking needs the cw scenario")
        gains = cw_tracking_gains(params, _number(doc, "omega0", "controller"),
                                  _number(doc, "zeta", "controller"))
        return ct.AnalyticController(gains,
                                     scale=float(doc.get("scale", 1.0)))
    if kind == "siren":
        path = _need(doc, "weights_path", "controller")
        full = base_dir / path if base_dir is not None else path
        try:
            return ct.load(full)
        except OSError as exc:
            raise ConfigError(f"cannot read weights file {full}: {exc}") from exc
        except ct.WeightsError as exc:
            raise ConfigError(f"weights file {full}: {exc}") from exc
    raise ConfigError(f"unknown controller kind '{kind}'")


def _build_domain(doc: dict) -> tuple:
    center = _need(doc, "center", "domain")
    hw = _need(doc, "half_width", "domain")
    variables = _need(doc, "variables", "domain")
    try:
        dom = ads.Domain(tuple(center), tuple(hw))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"domain: {exc}") from exc
    if len(variables) != dom.nvars:
        raise ConfigError("domain.variables length must match center")
    return dom, tuple(int(v) for v in variables)


def _build_ads(doc: dict) -> ads.AdsConfig:
    try:
        return ads.AdsConfig(order=int(_number(doc, "order", "ads")),
                             e_tol=_number(doc, "e_tol", "ads"),
                             n_max=int(_number(doc, "n_max", "ads")))
    except ValueError as exc:
        raise ConfigError(f"ads: {exc}") from exc


def build_setup(doc: dict, base_dir=None) -> VerifySetup:
    """Decode a config document into a runnable setup."""
    version = _need(doc, "schema_version")
    if version != 1:
        raise ConfigError(f"unsupported schema_version {version}")
    kind = _need(doc, "scenario")
    if kind == "cw":
        praw = _need(doc, "params")
        try:
            params = CwParams(n=_number(praw, "n", "params"),
                              a_t=_number(praw, "a_t", "params"),
                              t_max=_number(praw, "t_max", "params"))
        except ValueError as exc:
            raise ConfigError(f"params: {exc}") from exc
        nominal = _need(doc, "nominal")
        if not isinstance(nominal, list) or len(nominal) != 4:
            raise ConfigError("nominal must be a 4-entry list")
        dom, variables = _build_domain(_need(doc, "domain"))
        mraw = _need(doc, "metric")
        mkind = _need(mraw, "kind", "metric")
        if mkind != "squared-length":
            raise ConfigError(f"cw scenario needs a squared-length metric, "
                              f"got '{mkind}'")
        if "weights" in mraw:
            weights = tuple(tuple(r) for r in mraw["weights"])
        else:
            scales = ((_number(mraw, "position_scale", "metric"),) * 2
                      + (_number(mraw, "velocity_scale", "metric"),) * 2)
            weights = residual_weights(scales)
        try:
            metric = EventMetric("squared-length",
                                 _number(mraw, "threshold", "metric"), weights)
        except ValueError as exc:
            raise ConfigError(f"metric: {exc}") from exc
        controller = _build_controller(_need(doc, "controller"), params,
                                       base_dir)
        kwargs = {}
        if "integrator" in doc:
            iraw = doc["integrator"]
            try:
                kwargs["step"] = flow.StepControl(
                    abs_tol=float(iraw.get("abs_tol", 1e-12)),
                    rel_tol=float(iraw.get("rel_tol", 1e-12)))
            except ValueError as exc:
                raise ConfigError(f"integrator: {exc}") from exc
        if "output_scales" in doc:
            kwargs["output_scales"] = tuple(doc["output_scales"])
        try:
            scen = CwScenario(params=params, controller=controller,
                              nominal=tuple(nominal), metric=metric,
                              domain_vars=variables, **kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return VerifySetup(scen, dom, _build_ads(_need(doc, "ads")), dict(doc))
    raise ConfigError(f"unknown scenario kind '{kind}'")


def load_config(path) -> VerifySetup:
    import pathlib
    p = pathlib.Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return build_setup(doc, base_dir=p.parent)
