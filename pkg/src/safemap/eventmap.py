"""Event detection, refinement, and event-map construction.

An event is either a threshold crossing of a scalar value function or a
closest approach (an interior minimum of the value along the trajectory).
Detection brackets the event on the accepted-step grid, refinement solves
for the precise time with a one-variable polynomial inversion, and
build_event_map re-expresses the event state and event time as polynomials
in the initial-state deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import dapoly as da
from . import flow

MODES = ("minimum", "crossing")

# inversion is declared singular below this fraction of the coefficient scale
LINEAR_TOL = 1e-12


class RefinementError(Exception):
    """The one-variable event inversion could not be carried out."""


@dataclass
class EventSpec:
    """A scalar event condition evaluable over floats and polynomials.

    value(x, t) must accept the state as a sequence of either floats or
    TaylorPoly entries with a matching time argument. In crossing mode the
    event manifold is value = threshold; in minimum mode it is the
    stationarity d(value)/dt = 0 of a closest approach.
    """

    value: Callable
    mode: str = "crossing"
    threshold: float = 0.0
    terminal: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class EventRecord:
    t_e: float
    x_e: list[float]
    value: float
    refined: bool = False


class EventMap(tuple):
    """(state, time) event expansion with the inversion diagnostic."""

    def __new__(cls, state: da.TaylorMap, time: da.TaylorPoly, condition: float):
        return super().__new__(cls, (state, time))

    def __init__(self, state, time, condition):
        self.condition = condition

    state = property(lambda self: self[0])
    time = property(lambda self: self[1])


class _Stop(Exception):
    pass


def detect(sys: flow.OdeSystem, x0: Sequence[float], spec: EventSpec,
           t_max: float, t0: float = 0.0,
           ctrl: flow.StepControl = flow.StepControl()) -> EventRecord | None:
    """Scan the accepted-step grid for the event; None if nothing is found.

    Minimum mode keeps the step with the lowest value seen so far and
    reports None when that lowest value sits on the first or the final
    sample, since the approach then never turns around inside (t0, t_max).
    Crossing mode reports the first step whose bracket straddles the
    threshold; a terminal spec stops the propagation there.
    """
    if not t_max > t0:
        raise ValueError(f"need t_max > t0, got t0={t0}, t_max={t_max}")
    x0 = [float(v) for v in x0]
    v0 = float(spec.value(x0, t0))
    found: list[EventRecord] = []

    if spec.mode == "minimum":
        best = EventRecord(t0, x0, v0)

        def watch(t, x):
            nonlocal best
            v = float(spec.value(x, t))
            if v < best.value:
                best = EventRecord(t, [float(c) for c in x], v)

        res = flow.propagate(sys, x0, t0, t_max, ctrl, monitor=watch)
        if best.t_e == t0 or best.t_e == res.t:
            return None
        return best

    prev = v0 - spec.threshold
    if prev == 0.0:
        return EventRecord(t0, x0, v0)

    def watch(t, x):
        nonlocal prev
        v = float(spec.value(x, t)) - spec.threshold
        if not found and (v == 0.0 or prev * v < 0.0):
            found.append(EventRecord(t, [float(c) for c in x], v + spec.threshold))
            if spec.terminal:
                raise _Stop
        prev = v

    try:
        flow.propagate(sys, x0, t0, t_max, ctrl, monitor=watch)
    except _Stop:
        pass
    return found[0] if found else None


def _manifold_poly(spec: EventSpec, e_poly, time_var: int):
    if not isinstance(e_poly, da.TaylorPoly):
        raise RefinementError(
            "event value function returned a scalar for polynomial inputs")
    if spec.mode == "crossing":
        return e_poly - spec.threshold
    return da.derivative(e_poly, time_var)


def refine(sys: flow.OdeSystem, rec: EventRecord, spec: EventSpec,
           k: int) -> float:
    """Sharpen the detected time by inverting the one-variable expansion.

    Picard-expands the detected state in the time deviation, builds the
    event value as a polynomial in that deviation, inverts it, and reads
    off the root. The record is rewritten in place with the refined time
    and the expansion's state there. Minimum mode solves the stationarity
    condition instead and demands a positive second derivative.
    """
    need = 2 if spec.mode == "minimum" else 1
    if k < need:
        raise ValueError(f"order {k} is too low for mode {spec.mode!r}")
    m = flow.picard_expand(sys, [float(v) for v in rec.x_e], rec.t_e, k,
                           time_var=0, nvars=1, order=k)
    t_poly = da.variable(0, 1, k, center=rec.t_e)
    e_poly = spec.value(list(m.components), t_poly)
    target = _manifold_poly(spec, e_poly, 0)

    f0 = target.const
    dev = target - f0
    scale = max(1.0, float(np.max(np.abs(target.coeffs))))
    if abs(dev.coefficient((1,))) < LINEAR_TOL * scale:
        raise RefinementError(
            f"event inversion is singular (linear coefficient "
            f"{dev.coefficient((1,)):.3e} against scale {scale:.3g})")
    inv = da.invert(da.TaylorMap([dev]))
    dt = float(da.evaluate(inv[0], [-f0]))
    if not math.isfinite(dt):
        raise RefinementError("refined time is not finite")
    if spec.mode == "minimum":
        d2 = float(da.evaluate(da.derivative(da.derivative(e_poly, 0), 0), [dt]))
        if not d2 > 0.0:
            raise RefinementError(
                f"stationary point is degenerate (second derivative {d2:.3e})")

    rec.x_e = [float(v) for v in m.evaluate([dt])]
    rec.t_e = rec.t_e + dt
    rec.value = float(spec.value(rec.x_e, rec.t_e))
    rec.refined = True
    return rec.t_e


def build_event_map_seeded(sys: flow.OdeSystem, seeds: Sequence,
                           spec: EventSpec, t_event: float, k: int,
                           t0: float = 0.0,
                           ctrl: flow.StepControl = flow.StepControl(),
                           reference_point: Sequence[float] | None = None,
                           ) -> EventMap:
    """Event expansion from polynomial initial-state seeds.

    The seeds parameterize the initial state by uncertainty variables
    (typically unit box deviations, so a seed looks like centre +
    half_width * variable); the last variable of their algebra is reserved
    for the time deviation and must not appear in them. Fixed state
    components may be plain floats. Propagates the seeds to the refined
    event time, Picard-expands in the time deviation, inverts the square
    map [manifold value, uncertainty deviations] and substitutes the
    manifold condition back, leaving polynomials in the uncertainty
    variables only. Any leftover manifold residual at the centre becomes a
    constant time correction applied to both the state and the returned
    time polynomial, so a slightly off t_event still lands on the manifold.
    """
    if len(seeds) != sys.dimension:
        raise ValueError(f"got {len(seeds)} seeds for dimension {sys.dimension}")
    polys = [v for v in seeds if isinstance(v, da.TaylorPoly)]
    if not polys:
        raise ValueError("seeds need at least one polynomial entry")
    nv, n_ord = polys[0].nvars, polys[0].order
    if nv < 2:
        raise ValueError("the seed algebra needs a time variable on top of "
                         "the uncertainty variables")
    tvar = nv - 1
    for p in polys:
        if any(e[tvar] != 0 for e, _ in p.terms()):
            raise ValueError("seeds must not involve the reserved time variable")

    res = flow.propagate(sys, list(seeds), t0, t_event, ctrl)
    m = flow.picard_expand(sys, res.state, t_event, k, time_var=tvar)
    t_poly = da.variable(tvar, nv, n_ord, center=t_event)
    e_poly = spec.value(list(m.components), t_poly)
    manifold = _manifold_poly(spec, e_poly, tvar)

    e0 = manifold.const
    concat = da.TaylorMap([manifold - e0] +
                          [da.variable(i, nv, n_ord) for i in range(tvar)])
    condition = float(np.linalg.cond(concat.linear_matrix(), 1))
    inv = da.invert(concat)

    # set the manifold value to its actual root, then forget that variable
    t_dt = da.recenter(inv[tvar], [-e0] + [0.0] * tvar, [0.0] + [1.0] * tvar)
    t_dt = da.drop_variable(t_dt, 0)
    # the correction's constant part moves the expansion onto the root, so
    # the state must see it too, not just the reported time
    centered = da.TaylorMap([da.shift_center(c, tvar, t_dt.const)
                             for c in m.components])
    inner = da.TaylorMap([da.variable(i, tvar, n_ord) for i in range(tvar)] +
                         [t_dt - t_dt.const],
                         reference_point=reference_point)
    state = centered.compose(inner)
    return EventMap(state, t_dt + t_event, condition)


def build_event_map(sys: flow.OdeSystem, x0_ref: Sequence[float],
                    spec: EventSpec, t_event: float, k: int,
                    t0: float = 0.0,
                    ctrl: flow.StepControl = flow.StepControl()) -> EventMap:
    """Expand the event state and time in the full initial-state deviation.

    Every state component gets its own deviation variable; see
    build_event_map_seeded for domains with fewer uncertain directions.
    """
    d = sys.dimension
    if len(x0_ref) != d:
        raise ValueError(f"reference state has {len(x0_ref)} entries "
                         f"for dimension {d}")
    seeds = [da.variable(i, d + 1, k, center=float(x0_ref[i]))
             for i in range(d)]
    return build_event_map_seeded(sys, seeds, spec, t_event, k, t0, ctrl,
                                  reference_point=[float(v) for v in x0_ref])
