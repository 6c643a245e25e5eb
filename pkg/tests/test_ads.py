"""Tests for order-size estimation, split selection, and the ADS loop."""

import json
import math
from dataclasses import dataclass

import numpy as np
import pytest

from safemap import ads
from safemap import dapoly as da
from safemap import eventmap as em
from safemap import flow


DRIFT = flow.OdeSystem(2, lambda x, t: [x[1], 0.0], name="drift")
CROSS = em.EventSpec(value=lambda x, t: x[0], mode="crossing")


@dataclass
class DriftScenario:
    """Constant-velocity wall crossing; outputs are arrival speed and time.

    The event time (1 - w0 d0 ...) / (v + w1 d1) carries a full geometric
    series, which gives the splitter something real to chew on.
    """

    metric_threshold: float = 1.2
    t_max: float = 6.0

    def expand(self, dom: ads.Domain, order: int) -> ads.Expansion:
        c, h = dom.center, dom.half_width
        try:
            rec = em.detect(DRIFT, list(c), CROSS, self.t_max,
                            ctrl=flow.StepControl(h_max=0.25))
            if rec is None:
                return ads.Expansion("no-event", "no crossing in the window")
            t_star = em.refine(DRIFT, rec, CROSS, order)
            seeds = [c[0] + h[0] * da.variable(0, 3, order),
                     c[1] + h[1] * da.variable(1, 3, order)]
            res = em.build_event_map_seeded(DRIFT, seeds, CROSS, t_star, order)
        except (em.RefinementError, da.SingularMapError,
                flow.PropagationError) as exc:
            return ads.Expansion("failed", str(exc))
        state, tmap = res
        outputs = da.TaylorMap([state[1], tmap])
        return ads.Expansion("ok", trigger=outputs, outputs=outputs,
                             output_names=("v", "t"),
                             metric=state[1] * state[1],
                             condition=res.condition)


@dataclass
class FailingChildren:
    """Delegates at the root, reports failure for every deeper domain."""

    inner: DriftScenario
    metric_threshold: float = 1.2

    def expand(self, dom, order):
        if dom.depth > 0:
            return ads.Expansion("failed", "synthetic child failure")
        return self.inner.expand(dom, order)


ROOT = ads.Domain((-1.0, 1.0), (0.2, 0.1))


def assert_partition(results, root):
    vol = sum(r.domain.volume() for r in results)
    assert vol == pytest.approx(root.volume(), rel=1e-12)
    boxes = [r.domain.box() for r in results]
    for b in boxes:
        for (lo, hi), (rlo, rhi) in zip(b, root.box()):
            assert lo >= rlo - 1e-12 and hi <= rhi + 1e-12
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            overlap = 1.0
            for (alo, ahi), (blo, bhi) in zip(boxes[i], boxes[j]):
                overlap *= max(0.0, min(ahi, bhi) - max(alo, blo))
            assert overlap == 0.0


class TestDomain:
    def test_geometry(self):
        d = ads.Domain((1.0, -2.0), (0.5, 1.5))
        assert d.box() == [(0.5, 1.5), (-3.5, -0.5)]
        assert d.volume() == pytest.approx(3.0)
        assert d.contains((1.4, -0.6))
        assert not d.contains((1.6, -0.6))
        assert d.depth == 0 and d.path_key() == ()

    def test_validation(self):
        with pytest.raises(ValueError):
            ads.Domain((0.0,), (1.0, 1.0))
        with pytest.raises(ValueError):
            ads.Domain((0.0,), (0.0,))
        with pytest.raises(ValueError):
            ads.Domain((0.0,), (1.0,), ((0, "M"),))


class TestAdsConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ads.AdsConfig(order=1, e_tol=1.0, n_max=3)
        with pytest.raises(ValueError):
            ads.AdsConfig(order=3, e_tol=0.0, n_max=3)
        with pytest.raises(ValueError):
            ads.AdsConfig(order=3, e_tol=1.0, n_max=-1)
        assert ads.AdsConfig(order=3, e_tol=math.inf, n_max=0).e_tol == math.inf


class TestOrderSizes:
    def test_mixed_poly(self):
        p = (da.constant(1.0, 2, 2) + 2.0 * da.variable(0, 2, 2)
             - 3.0 * da.variable(1, 2, 2)
             + 0.5 * da.variable(0, 2, 2) * da.variable(1, 2, 2))
        assert ads.order_sizes(p).sizes == (1.0, 5.0, 0.5)

    def test_zero_poly(self):
        assert ads.order_sizes(da.TaylorPoly(2, 3)).sizes == (0.0,) * 4

    def test_pure_cubic(self):
        p = da.variable(0, 1, 3) ** 3
        assert ads.order_sizes(p).sizes == (0.0, 0.0, 0.0, 1.0)


class TestFitAndExtrapolate:
    def test_exact_geometric(self):
        os = ads.OrderSizes((1.0, 0.1, 0.01))
        e = ads.fit_and_extrapolate(os, 2)
        assert e == pytest.approx(1e-3, rel=1e-10)
        assert os.fit_a == pytest.approx(1.0, rel=1e-10)
        assert os.fit_b == pytest.approx(math.log(0.1), rel=1e-10)
        assert os.extrapolated == e

    def test_flat(self):
        assert ads.fit_and_extrapolate(ads.OrderSizes((1.0, 1.0, 1.0)), 2) \
            == pytest.approx(1.0)

    def test_degenerate_rules(self):
        assert ads.fit_and_extrapolate(ads.OrderSizes((1.0, 0.0, 0.0)), 2) == 0.0
        assert ads.fit_and_extrapolate(ads.OrderSizes((0.0, 0.0)), 1) == 0.0

    def test_skips_interior_zeros(self):
        # the fit runs over non-zero entries only
        os = ads.OrderSizes((1.0, 0.0, 0.01))
        e = ads.fit_and_extrapolate(os, 2)
        assert e == pytest.approx(10 ** -3.0, rel=1e-9)

    def test_halving_scales_exactly(self):
        # dividing S_i by 2^i shifts the fitted slope by -ln 2, so the
        # extrapolation drops by exactly 2^(n+1)
        base = (2.0, 0.7, 0.3, 0.05)
        halved = tuple(s / 2 ** i for i, s in enumerate(base))
        e0 = ads.fit_and_extrapolate(ads.OrderSizes(base), 3)
        e1 = ads.fit_and_extrapolate(ads.OrderSizes(halved), 3)
        assert e1 / e0 == pytest.approx(1.0 / 2 ** 4, rel=1e-9)

    def test_random_geometric_recovered(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            a = rng.uniform(0.5, 5.0)
            ratio = rng.uniform(0.05, 0.8)
            n = int(rng.integers(2, 7))
            sizes = tuple(a * ratio ** i for i in range(n + 1))
            e = ads.fit_and_extrapolate(ads.OrderSizes(sizes), n)
            assert e == pytest.approx(a * ratio ** (n + 1), rel=1e-8)


class TestMapError:
    def test_constant_map(self):
        m = da.TaylorMap([da.constant(3.0, 2, 3), da.constant(-1.0, 2, 3)])
        err = ads.map_error(m, 3)
        assert err.per_component == (0.0, 0.0)
        assert err.worst == 0.0

    def test_max_over_components(self):
        flat = da.constant(1.0, 1, 2)
        geo = (da.constant(1.0, 1, 2) + 0.1 * da.variable(0, 1, 2)
               + 0.01 * da.variable(0, 1, 2) ** 2)
        err = ads.map_error(da.TaylorMap([flat, geo]), 2)
        assert err.per_component[0] == 0.0
        assert err.per_component[1] == pytest.approx(1e-3, rel=1e-9)
        assert err.worst == err.per_component[1]


class TestSplitDirection:
    def test_hand_oracle(self):
        q = 10.0 * da.variable(0, 2, 4) ** 4 + da.variable(1, 2, 4)
        choice = ads.split_direction(da.TaylorMap([q]), 4)
        assert choice.variable == 0
        assert not choice.degenerate
        assert choice.scores[0] == pytest.approx(10 ** 1.25, rel=1e-9)
        assert choice.scores[1] == pytest.approx(1e-4, rel=1e-9)

    def test_symmetric_tie_breaks_low(self):
        q = (da.variable(0, 2, 3) + da.variable(0, 2, 3) ** 3
             + da.variable(1, 2, 3) + da.variable(1, 2, 3) ** 3)
        assert ads.split_direction(da.TaylorMap([q]), 3).variable == 0

    def test_univariate(self):
        q = da.variable(0, 1, 3) + 0.5 * da.variable(0, 1, 3) ** 2
        assert ads.split_direction(da.TaylorMap([q]), 3).variable == 0

    def test_degenerate_zero_map(self):
        choice = ads.split_direction(da.TaylorMap([da.TaylorPoly(2, 3)]), 3)
        assert choice.variable == 0
        assert choice.degenerate

    def test_aggregates_components_by_max(self):
        a = da.variable(0, 2, 4) + 10.0 * da.variable(0, 2, 4) ** 4
        b = da.variable(1, 2, 4) + 50.0 * da.variable(1, 2, 4) ** 4
        assert ads.split_direction(da.TaylorMap([a, b]), 4).variable == 1

    def test_single_order_cannot_fit(self):
        # one populated order gives the per-variable fit nothing to work with
        q = 10.0 * da.variable(0, 2, 4) ** 4
        choice = ads.split_direction(da.TaylorMap([q]), 4)
        assert choice.degenerate and choice.scores == (0.0, 0.0)


class TestSplit:
    def test_basic(self):
        dom = ads.Domain((0.0,), (1.0,))
        left, right = ads.split(dom, 0)
        assert left.center == (-0.5,) and right.center == (0.5,)
        assert left.half_width == (0.5,) == right.half_width
        assert left.lineage == ((0, "L"),) and right.lineage == ((0, "R"),)
        assert left.depth == 1

    def test_dyadic_edge_reachable(self):
        # splitting [445, 555] m along x three times (R, R, L) produces the
        # box [527.5, 541.25] with both edges exact in binary
        dom = ads.Domain((500.0, -500.0), (55.0, 150.0))
        dom = ads.split(dom, 0)[1]
        dom = ads.split(dom, 0)[1]
        dom = ads.split(dom, 0)[0]
        lo, hi = dom.box()[0]
        assert lo == 527.5 and hi == 541.25
        assert lo >= 450.0 and hi <= 541.25

    def test_bad_variable(self):
        with pytest.raises(ValueError):
            ads.split(ads.Domain((0.0,), (1.0,)), 1)


class TestExpansionType:
    def test_ok_requires_payload(self):
        with pytest.raises(ValueError, match="lacks"):
            ads.Expansion("ok")
        with pytest.raises(ValueError):
            ads.Expansion("exploded")

    def test_failure_carries_message(self):
        e = ads.Expansion("failed", "boom")
        assert e.message == "boom"


class TestRun:
    def test_tolerance_inf_single_domain(self):
        cfg = ads.AdsConfig(order=3, e_tol=math.inf, n_max=10)
        results = ads.run(DriftScenario(), ROOT, cfg)
        assert len(results) == 1
        assert results[0].status == "ok"
        assert results[0].domain == ROOT

    def test_budget_zero_single_domain(self):
        cfg = ads.AdsConfig(order=3, e_tol=1e-15, n_max=0)
        results = ads.run(DriftScenario(), ROOT, cfg)
        assert len(results) == 1

    def test_partition_and_tolerance(self):
        cfg = ads.AdsConfig(order=4, e_tol=2e-6, n_max=6)
        results = ads.run(DriftScenario(), ROOT, cfg)
        assert len(results) > 1
        assert_partition(results, ROOT)
        for r in results:
            assert r.status == "ok"
            assert r.split_error <= cfg.e_tol or r.domain.depth == cfg.n_max
            assert math.isfinite(r.condition)
            assert r.metric_bound is not None
            want = "safe" if r.metric_bound.hi <= 1.2 else "unsafe"
            assert r.verdict == want

    def test_results_ordered_by_lineage(self):
        cfg = ads.AdsConfig(order=4, e_tol=2e-6, n_max=6)
        results = ads.run(DriftScenario(), ROOT, cfg)
        keys = [r.domain.path_key() for r in results]
        assert keys == sorted(keys)

    def test_deterministic(self):
        cfg = ads.AdsConfig(order=4, e_tol=2e-6, n_max=6)
        a = json.dumps(ads.tree_json(ads.run(DriftScenario(), ROOT, cfg)),
                       sort_keys=True)
        b = json.dumps(ads.tree_json(ads.run(DriftScenario(), ROOT, cfg)),
                       sort_keys=True)
        assert a == b

    def test_workers_match_serial(self):
        cfg = ads.AdsConfig(order=3, e_tol=1e-4, n_max=4)
        serial = ads.run(DriftScenario(), ROOT, cfg, workers=1)
        parallel = ads.run(DriftScenario(), ROOT, cfg, workers=2)
        assert json.dumps(ads.tree_json(serial), sort_keys=True) == \
            json.dumps(ads.tree_json(parallel), sort_keys=True)

    def test_no_event_finalizes(self):
        sc = DriftScenario(t_max=0.05)
        cfg = ads.AdsConfig(order=3, e_tol=1e-9, n_max=5)
        results = ads.run(sc, ROOT, cfg)
        assert len(results) == 1
        assert results[0].status == "no-event"
        assert results[0].verdict == "indeterminate"
        assert results[0].bounds is None

    def test_failed_children_kept(self):
        sc = FailingChildren(DriftScenario())
        cfg = ads.AdsConfig(order=3, e_tol=1e-15, n_max=3)
        results = ads.run(sc, ROOT, cfg)
        assert len(results) == 2
        assert all(r.status == "failed" for r in results)
        assert all(r.verdict == "indeterminate" for r in results)
        assert all("synthetic" in r.message for r in results)
        assert_partition(results, ROOT)

    def test_threshold_extremes(self):
        cfg = ads.AdsConfig(order=3, e_tol=1e-5, n_max=3)
        always = ads.run(DriftScenario(metric_threshold=math.inf), ROOT, cfg)
        assert all(r.verdict == "safe" for r in always)
        never = ads.run(DriftScenario(metric_threshold=0.0), ROOT, cfg)
        assert all(r.verdict == "unsafe" for r in never)

    def test_child_error_shrinks(self):
        sc = DriftScenario()
        exp = sc.expand(ROOT, 4)
        parent = ads.map_error(exp.trigger, 4).worst
        j = ads.split_direction(exp.trigger, 4).variable
        for child in ads.split(ROOT, j):
            cerr = ads.map_error(sc.expand(child, 4).trigger, 4).worst
            assert cerr <= parent

    def test_sampled_points_covered_once(self):
        cfg = ads.AdsConfig(order=4, e_tol=2e-6, n_max=6)
        results = ads.run(DriftScenario(), ROOT, cfg)
        rng = np.random.default_rng(314)
        lows = [lo for lo, _ in ROOT.box()]
        highs = [hi for _, hi in ROOT.box()]
        for _ in range(200):
            p = rng.uniform(lows, highs)
            owners = sum(r.domain.contains(p) for r in results)
            assert owners >= 1


class TestTreeJson:
    def test_shape(self):
        cfg = ads.AdsConfig(order=3, e_tol=1e-4, n_max=3)
        results = ads.run(DriftScenario(), ROOT, cfg)
        tree = ads.tree_json(results)
        assert len(tree["subdomains"]) == len(results)
        first = tree["subdomains"][0]
        assert set(first) == {"lineage", "box", "status", "verdict",
                              "split_error", "remainder"}
        json.dumps(tree)
