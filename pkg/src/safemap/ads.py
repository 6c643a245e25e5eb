"""Automatic domain splitting.

A subdomain's event expansion carries an estimated truncation error: the
L1 mass of each polynomial order is fitted by an exponential and read one
order past the truncation. Subdomains whose estimate exceeds the
tolerance are halved along the variable contributing the largest
extrapolated error and re-expanded from the child centres, until the
estimate passes or the split budget is exhausted. The work queue is
depth-first, left child first; results are ordered by lineage so worker
scheduling cannot change the output.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import dapoly as da
from . import interval as iv


@dataclass(frozen=True)
class Domain:
    """An axis-aligned box in physical units plus its split history."""

    center: tuple[float, ...]
    half_width: tuple[float, ...]
    lineage: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "half_width",
                           tuple(float(h) for h in self.half_width))
        object.__setattr__(self, "lineage", tuple(
            (int(j), str(s)) for j, s in self.lineage))
        if len(self.center) != len(self.half_width):
            raise ValueError("center and half_width lengths differ")
        if any(not h > 0 for h in self.half_width):
            raise ValueError("half widths must be positive")
        if any(s not in ("L", "R") for _, s in self.lineage):
            raise ValueError("lineage sides must be 'L' or 'R'")

    @property
    def nvars(self) -> int:
        return len(self.center)

    @property
    def depth(self) -> int:
        return len(self.lineage)

    def box(self) -> list[tuple[float, float]]:
        return [(c - h, c + h) for c, h in zip(self.center, self.half_width)]

    def volume(self) -> float:
        return math.prod(2.0 * h for h in self.half_width)

    def contains(self, point: Sequence[float], slack: float = 0.0) -> bool:
        return all(abs(p - c) <= h + slack for p, c, h in
                   zip(point, self.center, self.half_width))

    def path_key(self) -> tuple[int, ...]:
        """Left-to-right order of tree leaves (L before R at every level)."""
        return tuple(0 if s == "L" else 1 for _, s in self.lineage)


@dataclass(frozen=True)
class AdsConfig:
    order: int
    e_tol: float
    n_max: int

    def __post_init__(self):
        if self.order < 2:
            raise ValueError(f"order must be at least 2, got {self.order}")
        if not self.e_tol > 0:
            raise ValueError(f"e_tol must be positive, got {self.e_tol}")
        if self.n_max < 0:
            raise ValueError(f"n_max must be non-negative, got {self.n_max}")


@dataclass
class OrderSizes:
    """L1 coefficient mass per polynomial order, with the fitted model."""

    sizes: tuple[float, ...]
    fit_a: float | None = None
    fit_b: float | None = None
    extrapolated: float | None = None


class MapError(NamedTuple):
    per_component: tuple[float, ...]
    worst: float


class SplitChoice(NamedTuple):
    variable: int
    degenerate: bool
    scores: tuple[float, ...]


def order_sizes(p: da.TaylorPoly) -> OrderSizes:
    """S_i = sum of |coefficients| over the monomials of total degree i."""
    mags = np.abs(p.coeffs)
    starts = p.alg.degree_start
    sizes = tuple(float(mags[starts[i]:starts[i + 1]].sum())
                  for i in range(p.order + 1))
    return OrderSizes(sizes)


def _fit_nonzero(sizes: Sequence[float], n: int) -> tuple[float, float, float]:
    """ln-least-squares of the exponential model through the non-zero sizes.

    Returns (A, B, E(n+1)); fewer than two usable points means the
    polynomial is constant or degenerate and the extrapolation is 0.
    """
    pts = [(i, s) for i, s in enumerate(sizes[:n + 1]) if s > 0.0]
    if len(pts) < 2:
        return 0.0, 0.0, 0.0
    xs = np.array([i for i, _ in pts], dtype=float)
    ys = np.log([s for _, s in pts])
    b, a = np.polyfit(xs, ys, 1)
    return float(np.exp(a)), float(b), float(np.exp(a + b * (n + 1)))


def fit_and_extrapolate(sizes: OrderSizes, n: int) -> float:
    """Estimated order-(n+1) size E(n+1) = A exp(B (n+1)); stores the fit."""
    a, b, e = _fit_nonzero(sizes.sizes, n)
    sizes.fit_a = a
    sizes.fit_b = b
    sizes.extrapolated = e
    return e


def map_error(m: da.TaylorMap, n: int) -> MapError:
    per = tuple(fit_and_extrapolate(order_sizes(c), n) for c in m.components)
    return MapError(per, max(per))


def split_direction(m: da.TaylorMap, n: int) -> SplitChoice:
    """Variable whose factored-out coefficient sizes extrapolate worst.

    For each variable the coefficient mass is regrouped by the degree in
    that variable alone, fitted, and extrapolated; components are
    aggregated by their maximum. Ties break toward the lowest index.
    """
    nv = m.nvars
    scores = [0.0] * nv
    for comp in m.components:
        mags = np.abs(comp.coeffs)
        exps = comp.alg.exp_array
        for j in range(nv):
            sizes = np.bincount(exps[:, j], weights=mags, minlength=n + 1)
            e = _fit_nonzero(sizes, n)[2]
            if e > scores[j]:
                scores[j] = e
    best = max(range(nv), key=lambda j: (scores[j], -j))
    degenerate = scores[best] == 0.0
    return SplitChoice(0 if degenerate else best, degenerate, tuple(scores))


def split(dom: Domain, j: int) -> tuple[Domain, Domain]:
    """Halve the domain along variable j; the left child takes the lower half."""
    if not 0 <= j < dom.nvars:
        raise ValueError(f"split variable {j} out of range for {dom.nvars}")
    hw = list(dom.half_width)
    hw[j] = hw[j] / 2.0
    lo = list(dom.center)
    hi = list(dom.center)
    lo[j] -= hw[j]
    hi[j] += hw[j]
    return (Domain(tuple(lo), tuple(hw), dom.lineage + ((j, "L"),)),
            Domain(tuple(hi), tuple(hw), dom.lineage + ((j, "R"),)))


@dataclass
class Expansion:
    """What a scenario hands back for one subdomain.

    trigger holds the dimensionless state-on-manifold map driving split
    decisions; outputs holds the physical event outputs (event time last)
    that get interval bounds; metric is the scalar safety figure on the
    manifold. A status other than "ok" carries only the message.
    """

    status: str
    message: str = ""
    trigger: da.TaylorMap | None = None
    outputs: da.TaylorMap | None = None
    output_names: tuple[str, ...] = ()
    metric: da.TaylorPoly | None = None
    condition: float = float("nan")

    def __post_init__(self):
        if self.status not in ("ok", "no-event", "failed"):
            raise ValueError(f"unknown expansion status {self.status!r}")
        if self.status == "ok":
            missing = [n for n, v in (("trigger", self.trigger),
                                      ("outputs", self.outputs),
                                      ("metric", self.metric)) if v is None]
            if missing:
                raise ValueError(f"ok expansion lacks {', '.join(missing)}")
            if self.output_names and len(self.output_names) != len(self.outputs):
                raise ValueError("output_names length mismatch")


@dataclass
class SubdomainResult:
    domain: Domain
    status: str
    verdict: str
    message: str = ""
    bounds: iv.IntervalBox | None = None
    remainder: iv.RemainderEstimate | None = None
    metric_bound: iv.Interval | None = None
    output_names: tuple[str, ...] = ()
    split_error: float = float("nan")
    condition: float = float("nan")


def _finalize(dom: Domain, exp: Expansion, err: MapError | None,
              threshold: float) -> SubdomainResult:
    if exp.status != "ok":
        return SubdomainResult(dom, exp.status, "indeterminate",
                               message=exp.message, condition=exp.condition)
    # bounds come from the physical outputs, each widened by its own
    # extrapolated truncation size
    out_rem = iv.RemainderEstimate(tuple(
        fit_and_extrapolate(order_sizes(c), exp.outputs.order)
        for c in exp.outputs.components))
    bounds = iv.bound_map(exp.outputs, out_rem)
    raw = iv.bound_poly(exp.metric)
    m_rem = fit_and_extrapolate(order_sizes(exp.metric), exp.metric.order)
    metric_bound = iv.Interval(raw.lo - m_rem, raw.hi + m_rem)
    verdict = "safe" if metric_bound.hi <= threshold else "unsafe"
    return SubdomainResult(dom, "ok", verdict, bounds=bounds,
                           remainder=out_rem, metric_bound=metric_bound,
                           output_names=tuple(exp.output_names),
                           split_error=err.worst, condition=exp.condition)


def _process(dom: Domain, exp: Expansion, cfg: AdsConfig, threshold: float):
    """Either a finalized result or the two children to expand next."""
    if exp.status != "ok":
        return _finalize(dom, exp, None, threshold), None
    err = map_error(exp.trigger, cfg.order)
    if err.worst <= cfg.e_tol or dom.depth >= cfg.n_max:
        return _finalize(dom, exp, err, threshold), None
    return None, split(dom, split_direction(exp.trigger, cfg.order).variable)


def _expand_task(args):
    scenario, dom, order = args
    return scenario.expand(dom, order)


def run(scenario, root: Domain, cfg: AdsConfig,
        workers: int = 1) -> list[SubdomainResult]:
    """Split until every subdomain passes the tolerance or its budget.

    The scenario must provide expand(domain, order) -> Expansion and a
    metric_threshold. Children partition their parent exactly, so the
    returned subdomains tile the root; they are ordered left-to-right by
    lineage regardless of worker count.
    """
    threshold = scenario.metric_threshold
    results: list[SubdomainResult] = []
    if workers <= 1:
        stack = [root]
        while stack:
            dom = stack.pop()
            done, children = _process(dom, scenario.expand(dom, cfg.order),
                                      cfg, threshold)
            if done is not None:
                results.append(done)
            else:
                stack.append(children[1])
                stack.append(children[0])
    else:
        frontier = [root]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            while frontier:
                exps = list(pool.map(
                    _expand_task,
                    [(scenario, d, cfg.order) for d in frontier]))
                nxt: list[Domain] = []
                for dom, exp in zip(frontier, exps):
                    done, children = _process(dom, exp, cfg, threshold)
                    if done is not None:
                        results.append(done)
                    else:
                        nxt.extend(children)
                frontier = nxt
    results.sort(key=lambda r: r.domain.path_key())
    return results


def tree_json(results: Sequence[SubdomainResult]) -> dict:
    """Subdomain tree as plain data: lineage, box, error sizes, status."""
    subs = []
    for r in results:
        subs.append({
            "lineage": [[j, s] for j, s in r.domain.lineage],
            "box": [[lo, hi] for lo, hi in r.domain.box()],
            "status": r.status,
            "verdict": r.verdict,
            "split_error": r.split_error,
            "remainder": list(r.remainder.per_component) if r.remainder else None,
        })
    return {"subdomains": subs}
