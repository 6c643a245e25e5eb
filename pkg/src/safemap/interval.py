"""Interval arithmetic and range bounding of Taylor polynomials.

Plain closed intervals in double precision. Endpoints are not directed-rounded;
instead every operation widens its result by a small relative padding (default
1e-12) so that floating-point evaluation error cannot break containment at the
tolerances used in the tests. Division is deliberately absent: the bounding
pipeline arranges all event metrics as polynomials, sums and products suffice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import dapoly

PADDING_DEFAULT = 1e-12


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval endpoints must be finite, got [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"interval endpoints out of order: [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= x <= self.hi + slack

    def __repr__(self):
        return f"[{self.lo:.17g}, {self.hi:.17g}]"


@dataclass(frozen=True)
class IntervalBox:
    components: tuple[Interval, ...]

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, i: int) -> Interval:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)


@dataclass(frozen=True)
class RemainderEstimate:
    """Non-negative per-component widening applied on top of polynomial bounds."""

    per_component: tuple[float, ...]

    def __post_init__(self):
        for r in self.per_component:
            if not (math.isfinite(r) and r >= 0.0):
                raise ValueError(f"remainder entries must be finite and >= 0, got {r}")

    def __len__(self) -> int:
        return len(self.per_component)


def _padded(lo: float, hi: float, padding: float) -> Interval:
    eps = padding * max(abs(lo), abs(hi))
    return Interval(lo - eps, hi + eps)


def iadd(a: Interval, b: Interval, padding: float = PADDING_DEFAULT) -> Interval:
    return _padded(a.lo + b.lo, a.hi + b.hi, padding)


def isub(a: Interval, b: Interval, padding: float = PADDING_DEFAULT) -> Interval:
    return _padded(a.lo - b.hi, a.hi - b.lo, padding)


def imul(a: Interval, b: Interval, padding: float = PADDING_DEFAULT) -> Interval:
    products = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return _padded(min(products), max(products), padding)


def bound_poly(p: dapoly.TaylorPoly, padding: float = PADDING_DEFAULT) -> Interval:
    """Range enclosure of p over the unit box [-1,1]^m.

    Every monomial with nonzero degree has range [-1,1] there, so the
    polynomial is contained in the constant term plus/minus the L1 norm of
    the remaining coefficients. Conservative (dependency problem) but exact
    for a single monomial.
    """
    c = p.coeffs
    radius = float(np.sum(np.abs(c[1:])))
    center = float(c[0])
    return _padded(center - radius, center + radius, padding)


def bound_map(m: dapoly.TaylorMap, rem: RemainderEstimate,
              padding: float = PADDING_DEFAULT) -> IntervalBox:
    """Component-wise bound_poly widened by the remainder estimate."""
    if len(rem) != len(m):
        raise ValueError(
            f"remainder has {len(rem)} entries for a {len(m)}-component map")
    comps = []
    for poly, r in zip(m, rem.per_component):
        base = bound_poly(poly, padding)
        comps.append(Interval(base.lo - r, base.hi + r))
    return IntervalBox(tuple(comps))


def range_oracle(p: dapoly.TaylorPoly, samples: int, seed: int) -> Interval:
    """Sampled min/max of p over the unit box; a subset of the true range,
    used to validate bound_poly from below."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(samples, p.nvars))
    vals = dapoly.evaluate_batch(p, pts)
    return Interval(float(vals.min()), float(vals.max()))
