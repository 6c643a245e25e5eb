"""Adaptive Dormand-Prince 8(7) propagation over generic scalar states.

The stepper is written against plain Python arithmetic, so the state entries
can be floats or TaylorPoly objects interchangeably; with polynomial entries
the result is the Taylor expansion of the flow around the reference
trajectory. Step acceptance uses the embedded 7th-order error estimate. In
polynomial mode the error is judged on the zero-order coefficients by default
(the expansion follows its reference trajectory), switchable to a full
coefficient norm.

The tableau is loaded from data/dp87_tableau.json, the golden copy of the
published 13-stage coefficients.
"""

from __future__ import annotations

import importlib.resources
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import dapoly
from .dapoly import TaylorMap, TaylorPoly


def _load_tableau() -> dict:
    ref = importlib.resources.files("safemap").joinpath("data/dp87_tableau.json")
    with ref.open("r") as f:
        return json.load(f)


TABLEAU = _load_tableau()
_C: list[float] = TABLEAU["c"]
_A: list[list[float]] = TABLEAU["a"]
_B8: list[float] = TABLEAU["b8"]
_B7: list[float] = TABLEAU["b7"]
_STAGES: int = TABLEAU["stages"]
# error weights: difference between the 8th- and 7th-order solutions
_BERR: list[float] = [b8 - b7 for b8, b7 in zip(_B8, _B7)]


class PropagationError(RuntimeError):
    def __init__(self, message: str, t: float = math.nan, h: float = math.nan):
        super().__init__(message)
        self.t = t
        self.h = h


@dataclass(frozen=True)
class OdeSystem:
    """Autonomous-form right-hand side: f(state, t) -> derivative list.

    The controller is baked into f, so the closed loop is a plain ODE. The
    state entries are generic scalars; f must stick to arithmetic the
    polynomial type supports (+, -, *, and the dapoly intrinsics).
    """

    dimension: int
    f: Callable[[Sequence, float | TaylorPoly], list]
    name: str = "ode"


@dataclass(frozen=True)
class StepControl:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    safety_factor: float = 0.9
    h_min: float | None = None      # default 1e-14 * (tf - t0), set per run
    h_max: float | None = None      # default tf - t0
    h_initial: float | None = None  # default (tf - t0) / 100
    error_norm: str = "const"       # "const": zero-order coefficients; "full": all

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.error_norm not in ("const", "full"):
            raise ValueError(f"unknown error_norm {self.error_norm!r}")


@dataclass
class StepRecord:
    t: float
    h: float
    state_const: tuple[float, ...]


@dataclass
class PropagationResult:
    state: list
    t: float
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def accepted_steps(self) -> int:
        return len(self.steps)


def _const_of(v) -> float:
    return v.const if isinstance(v, TaylorPoly) else float(v)


def _magnitude(v, mode: str) -> float:
    if isinstance(v, TaylorPoly):
        if mode == "const":
            return abs(v.const)
        return float(np.sum(np.abs(v.coeffs)))
    return abs(v)


def step_log_csv(steps: Sequence[StepRecord]) -> str:
    """CSV export of the accepted-step log: t, h, zero-order state."""
    if not steps:
        return "t,h\n"
    d = len(steps[0].state_const)
    header = "t,h," + ",".join(f"x{i}" for i in range(d))
    lines = [header]
    for rec in steps:
        lines.append(f"{rec.t:.17g},{rec.h:.17g}," +
                     ",".join(f"{x:.17g}" for x in rec.state_const))
    return "\n".join(lines) + "\n"


def propagate(sys: OdeSystem, x0: Sequence, t0: float, tf: float,
              ctrl: StepControl = StepControl(),
              monitor: Callable[[float, list], None] | None = None,
              keep_log: bool = True) -> PropagationResult:
    """Integrate from t0 to tf with the embedded 8(7) pair.

    Returns the final state (polynomial states give the flow expansion
    around the reference trajectory) plus the accepted-step log. The monitor
    callback fires after every accepted step with (t, state).
    """
    if not tf > t0:
        raise ValueError(f"need tf > t0, got t0={t0}, tf={tf}")
    if len(x0) != sys.dimension:
        raise ValueError(f"state has {len(x0)} entries for dimension {sys.dimension}")
    span = tf - t0
    h_min = ctrl.h_min if ctrl.h_min is not None else 1e-14 * span
    h_max = ctrl.h_max if ctrl.h_max is not None else span
    h = ctrl.h_initial if ctrl.h_initial is not None else span / 100.0
    h = min(h, h_max)
    x = list(x0)
    t = t0
    steps: list[StepRecord] = []
    nstages = _STAGES
    dim = sys.dimension

    while t < tf:
        if h < h_min:
            raise PropagationError(
                f"step size underflow (h={h:.3e} < h_min={h_min:.3e}) at t={t:.6e}",
                t=t, h=h)
        # stretch the last step a little so no sub-h_min sliver remains
        final = tf - t <= 1.05 * h
        hs = tf - t if final else h
        k = [sys.f(x, t)]
        for s in range(1, nstages):
            a_row = _A[s]
            ys = []
            for i in range(dim):
                acc = x[i]
                for j in range(s):
                    aij = a_row[j]
                    if aij != 0.0:
                        acc = acc + (hs * aij) * k[j][i]
                ys.append(acc)
            k.append(sys.f(ys, t + _C[s] * hs))

        err = 0.0
        x_new = []
        for i in range(dim):
            acc = x[i]
            e = None
            for s in range(nstages):
                b = _B8[s]
                if b != 0.0:
                    acc = acc + (hs * b) * k[s][i]
                be = _BERR[s]
                if be != 0.0:
                    e = (hs * be) * k[s][i] if e is None else e + (hs * be) * k[s][i]
            x_new.append(acc)
            mag = _magnitude(e, ctrl.error_norm)
            scale = ctrl.abs_tol + ctrl.rel_tol * max(
                abs(_const_of(x[i])), abs(_const_of(acc)))
            err = max(err, mag / scale)
            c_new = _const_of(acc)
            if not math.isfinite(c_new):
                raise PropagationError(
                    f"non-finite state during integration at t={t:.6e}", t=t, h=hs)

        if err <= 1.0:
            t = tf if final else t + hs
            x = x_new
            if keep_log:
                steps.append(StepRecord(t, hs, tuple(_const_of(v) for v in x)))
            if monitor is not None:
                monitor(t, x)
            grow = 5.0 if err == 0.0 else min(
                5.0, ctrl.safety_factor * err ** (-0.125))
            h = min(hs * max(grow, 0.2), h_max)
        else:
            h = hs * max(0.2, ctrl.safety_factor * err ** (-0.125))

    return PropagationResult(state=x, t=t, steps=steps)


def picard_expand(sys: OdeSystem, x_ref: Sequence, t_ref: float, k: int,
                  time_var: int | None = None,
                  nvars: int | None = None, order: int | None = None) -> TaylorMap:
    """Expand the solution around (x_ref, t_ref) in the time deviation.

    x_ref entries are polynomials or floats (promoted to constants). The
    algebra is taken from the first polynomial entry, or from the explicit
    nvars/order arguments when the seed is all floats. The deviation
    variable is time_var (default: the last variable). Each sweep of

        x <- x_ref + integral of f(x, t_ref + dt)

    gains one exact order; exactly k sweeps are performed, so the result is
    the exact k-th order expansion in dt.
    """
    if len(x_ref) != sys.dimension:
        raise ValueError(f"state has {len(x_ref)} entries for dimension {sys.dimension}")
    polys = [v for v in x_ref if isinstance(v, TaylorPoly)]
    if polys:
        alg_nvars, alg_order = polys[0].nvars, polys[0].order
    elif nvars is not None and order is not None:
        alg_nvars, alg_order = nvars, order
    else:
        raise ValueError("picard_expand needs a polynomial entry or explicit "
                         "nvars/order to fix the algebra")
    if k > alg_order:
        raise ValueError(f"requested Picard order {k} exceeds truncation order {alg_order}")
    tv = alg_nvars - 1 if time_var is None else time_var
    if not 0 <= tv < alg_nvars:
        raise ValueError(f"time variable {tv} out of range for nvars={alg_nvars}")
    base = [v if isinstance(v, TaylorPoly) else
            dapoly.constant(float(v), alg_nvars, alg_order) for v in x_ref]
    t_poly = dapoly.variable(tv, alg_nvars, alg_order, center=t_ref)
    x = list(base)
    for _ in range(k):
        dot = sys.f(x, t_poly)
        x_next = []
        for i in range(sys.dimension):
            di = dot[i]
            if not isinstance(di, TaylorPoly):
                di = dapoly.constant(float(di), alg_nvars, alg_order)
            x_next.append(base[i] + dapoly.antiderivative(di, tv))
        x = x_next
        for p in x:
            if not np.all(np.isfinite(p.coeffs)):
                raise PropagationError("non-finite coefficients during Picard iteration")
    return TaylorMap(x)
