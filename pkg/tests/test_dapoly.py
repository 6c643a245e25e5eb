"""Tests for the truncated polynomial algebra."""

import math

import numpy as np
import pytest

from safemap import dapoly as da


def poly_from(terms, nvars, order):
    p = da.zero(nvars, order)
    c = p.coeffs.copy()
    for exps, val in terms.items():
        c[p.alg.index_of[exps]] = val
    return da.TaylorPoly(nvars, order, c)


class TestLayout:
    def test_graded_lex_order(self):
        p = da.zero(2, 2)
        assert p.alg.exponents == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))

    def test_size(self):
        # C(m + n, n) coefficients
        assert da.zero(3, 4).alg.size == 35
        assert da.zero(4, 4).alg.size == 70
        assert da.zero(1, 0).alg.size == 1

    def test_linear_slice_positions(self):
        p = da.variable(1, 3, 2)
        assert p.coeffs[2] == 1.0
        assert np.count_nonzero(p.coeffs) == 1


class TestVariable:
    def test_with_center(self):
        p = da.variable(0, 2, 4, center=1.5)
        assert p.const == 1.5
        assert p.coefficient((1, 0)) == 1.0
        assert np.count_nonzero(p.coeffs) == 2

    def test_identity_case(self):
        p = da.variable(0, 1, 2)
        assert p.const == 0.0
        assert p.coefficient((1,)) == 1.0

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            da.variable(2, 2, 4)

    def test_order_zero_rejected(self):
        with pytest.raises(ValueError):
            da.variable(0, 2, 0)


class TestMul:
    def test_square_binomial(self):
        p = 1 + da.variable(0, 1, 2)
        q = p * p
        assert np.allclose(q.coeffs, [1.0, 2.0, 1.0])

    def test_truncation_drops_top(self):
        d = da.variable(0, 1, 1)
        q = (1 + d) * (1 - d)
        assert np.allclose(q.coeffs, [1.0, 0.0])

    def test_two_vars(self):
        d1 = da.variable(0, 2, 2)
        d2 = da.variable(1, 2, 2)
        q = (d1 + d2) * (d1 + d2)
        assert q.coefficient((2, 0)) == 1.0
        assert q.coefficient((1, 1)) == 2.0
        assert q.coefficient((0, 2)) == 1.0
        assert q.const == 0.0

    def test_algebra_mismatch(self):
        with pytest.raises(da.AlgebraMismatchError):
            da.variable(0, 1, 2) * da.variable(0, 2, 2)


class TestIntrinsics:
    def test_sin_maclaurin(self):
        p = da.sin(da.variable(0, 1, 3))
        assert np.allclose(p.coeffs, [0.0, 1.0, 0.0, -1.0 / 6.0])

    def test_exp_series(self):
        p = da.exp(da.variable(0, 1, 2))
        assert np.allclose(p.coeffs, [1.0, 1.0, 0.5])

    def test_reciprocal_geometric(self):
        p = da.reciprocal(1 + da.variable(0, 1, 2))
        assert np.allclose(p.coeffs, [1.0, -1.0, 1.0])

    def test_sqrt_shifted(self):
        # sqrt(4 + d) = 2 + d/4 - d^2/64 + d^3/512 - ...
        p = da.sqrt(4 + da.variable(0, 1, 3))
        assert np.allclose(p.coeffs, [2.0, 0.25, -1.0 / 64.0, 1.0 / 512.0])

    def test_reciprocal_zero_constant_rejected(self):
        with pytest.raises(da.IntrinsicDomainError):
            da.reciprocal(da.variable(0, 1, 2))

    def test_sqrt_negative_rejected(self):
        with pytest.raises(da.IntrinsicDomainError):
            da.sqrt(-1 + da.variable(0, 1, 2))

    def test_float_passthrough(self):
        assert da.sin(0.3) == math.sin(0.3)
        assert da.exp(-1.2) == math.exp(-1.2)
        assert da.tanh(0.7) == math.tanh(0.7)

    def test_power_integer(self):
        d = da.variable(0, 1, 4)
        p = da.power(1 + d, 3)
        assert np.allclose(p.coeffs, [1.0, 3.0, 3.0, 1.0, 0.0])

    def test_power_negative_integer(self):
        p = da.power(2 + da.variable(0, 1, 2), -1)
        q = da.reciprocal(2 + da.variable(0, 1, 2))
        assert np.allclose(p.coeffs, q.coeffs)

    def test_power_non_integer_matches_pointwise(self):
        p = 2 + da.variable(0, 1, 5)
        q = da.power(p, 1.5)
        for dx in (-0.05, 0.02, 0.07):
            assert da.evaluate(q, [dx]) == pytest.approx((2 + dx) ** 1.5, abs=1e-9)

    def test_tanh_matches_pointwise_both_signs(self):
        for c in (-1.3, -0.2, 0.0, 0.4, 2.0):
            p = da.tanh(c + da.variable(0, 1, 6))
            assert p.const == pytest.approx(math.tanh(c), abs=1e-15)
            for dx in (-0.05, 0.05):
                assert da.evaluate(p, [dx]) == pytest.approx(
                    math.tanh(c + dx), abs=1e-10)

    def test_intrinsic_order_of_accuracy(self):
        # residual of the truncated jet shrinks like |dx|^(n+1)
        order = 4
        base = 0.3 + da.variable(0, 1, order) + 0.5 * da.power(da.variable(0, 1, order), 2)
        for f, fref in ((da.sin, math.sin), (da.exp, math.exp)):
            q = f(base)
            errs = []
            for dx in (0.4, 0.2, 0.1, 0.05):
                errs.append(abs(da.evaluate(q, [dx]) - fref(0.3 + dx + 0.5 * dx * dx)))
            for e0, e1 in zip(errs, errs[1:]):
                ratio = e0 / e1
                # expect ~2^(n+1) = 32
                assert 12.0 < ratio < 80.0, (f.__name__, errs)


class TestCompose:
    def test_identity_right(self):
        rng = np.random.default_rng(7)
        p = da.TaylorPoly(2, 3, rng.standard_normal(da.zero(2, 3).alg.size))
        ident = [da.variable(0, 2, 3), da.variable(1, 2, 3)]
        q = da.compose(p, ident)
        assert np.allclose(q.coeffs, p.coeffs, atol=1e-14)

    def test_identity_left(self):
        q_in = da.variable(0, 1, 3) + 0.3 * da.power(da.variable(0, 1, 3), 2)
        out = da.compose(da.variable(0, 1, 3), [q_in])
        assert np.allclose(out.coeffs, q_in.coeffs)

    def test_square_of_shifted(self):
        # outer y^2, inner d + d^2, order 3: (d + d^2)^2 = d^2 + 2d^3 + O(4)
        y = da.variable(0, 1, 3)
        outer = y * y
        inner = da.variable(0, 1, 3) + da.power(da.variable(0, 1, 3), 2)
        q = da.compose(outer, [inner])
        assert np.allclose(q.coeffs, [0.0, 0.0, 1.0, 2.0])

    def test_arity_mismatch(self):
        with pytest.raises(da.CompositionError):
            da.compose(da.variable(0, 2, 3), [da.variable(0, 1, 3)])

    def test_nonzero_constant_rejected(self):
        with pytest.raises(da.CompositionError):
            da.compose(da.variable(0, 1, 3), [1 + da.variable(0, 1, 3)])


class TestInvert:
    def test_identity(self):
        ident = da.identity_map(3, 4)
        inv = da.invert(ident)
        for a, b in zip(inv, ident):
            assert np.allclose(a.coeffs, b.coeffs, atol=1e-14)

    def test_series_reversion_1d(self):
        d = da.variable(0, 1, 2)
        m = da.TaylorMap([2 * d + d * d])
        g = da.invert(m)
        assert np.allclose(g[0].coeffs, [0.0, 0.5, -0.125])
        # composing back gives the identity
        back = m.compose(g)
        assert np.allclose(back[0].coeffs, [0.0, 1.0, 0.0], atol=1e-14)

    def test_linear_diagonal(self):
        m = da.TaylorMap([2 * da.variable(0, 2, 3), 4 * da.variable(1, 2, 3)])
        g = da.invert(m)
        assert g[0].coefficient((1, 0)) == pytest.approx(0.5)
        assert g[1].coefficient((0, 1)) == pytest.approx(0.25)

    def test_singular_reports_condition(self):
        m = da.TaylorMap([da.variable(0, 2, 2) + da.variable(1, 2, 2),
                          da.variable(0, 2, 2) + da.variable(1, 2, 2)])
        with pytest.raises(da.SingularMapError) as exc:
            da.invert(m)
        assert exc.value.condition > 1e12 or not np.isfinite(exc.value.condition)

    def test_rectangular_rejected(self):
        with pytest.raises(da.SingularMapError):
            da.invert(da.TaylorMap([da.variable(0, 2, 2)]))

    def test_nonzero_constant_rejected(self):
        with pytest.raises(da.CompositionError):
            da.invert(da.TaylorMap([1 + da.variable(0, 1, 2)]))

    def test_random_roundtrip_property(self):
        # invert o compose = identity within 1e-10 for well-conditioned maps
        rng = np.random.default_rng(42)
        for trial in range(20):
            m_vars = int(rng.integers(1, 5))
            order = int(rng.integers(2, 7))
            size = da.zero(m_vars, order).alg.size
            comps = []
            lin = np.eye(m_vars) + 0.2 * rng.standard_normal((m_vars, m_vars))
            for i in range(m_vars):
                c = 0.1 * rng.standard_normal(size)
                c[0] = 0.0
                c[1:1 + m_vars] = lin[i]
                comps.append(da.TaylorPoly(m_vars, order, c))
            m = da.TaylorMap(comps)
            g = da.invert(m)
            ident = da.identity_map(m_vars, order)
            for left in (m.compose(g), g.compose(m)):
                for i in range(m_vars):
                    resid = left[i].coeffs - ident[i].coeffs
                    assert np.max(np.abs(resid)) < 1e-10, (trial, m_vars, order)


class TestCalculus:
    def test_antiderivative_linear(self):
        p = 1 + 2 * da.variable(0, 1, 2)
        q = da.antiderivative(p, 0)
        assert np.allclose(q.coeffs, [0.0, 1.0, 1.0])

    def test_antiderivative_constant(self):
        q = da.antiderivative(da.constant(3.5, 2, 3), 0)
        assert q.coefficient((1, 0)) == 3.5
        assert np.count_nonzero(q.coeffs) == 1

    def test_antiderivative_truncates_top_order(self):
        p = da.power(da.variable(0, 1, 3), 3)
        q = da.antiderivative(p, 0)
        assert np.allclose(q.coeffs, 0.0)

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            da.antiderivative(da.constant(1.0, 2, 2), 2)

    def test_derivative_recovers_input(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            nv = int(rng.integers(1, 4))
            order = int(rng.integers(1, 6))
            p = da.TaylorPoly(nv, order, rng.standard_normal(da.zero(nv, order).alg.size))
            var = int(rng.integers(0, nv))
            back = da.derivative(da.antiderivative(p, var), var)
            # equality except the top order, which the antiderivative dropped
            trunc = p.truncated(order - 1)
            assert np.allclose(back.coeffs, trunc.coeffs, atol=1e-13)


class TestEvaluate:
    def test_constant_term(self):
        p = poly_from({(0,): 1.0, (1,): 2.0, (2,): -3.0}, 1, 2)
        assert da.evaluate(p, [0.0]) == 1.0

    def test_at_one(self):
        p = poly_from({(0,): 1.0, (1,): 2.0, (2,): -3.0}, 1, 2)
        assert da.evaluate(p, [1.0]) == pytest.approx(0.0, abs=1e-15)

    def test_identity_map(self):
        m = da.identity_map(3, 2)
        dx = [0.3, -0.7, 0.1]
        assert np.allclose(m.evaluate(dx), dx)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            da.evaluate(da.constant(1.0, 2, 2), [0.1])

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(11)
        p = da.TaylorPoly(3, 4, rng.standard_normal(35))
        pts = rng.uniform(-1, 1, size=(50, 3))
        batch = da.evaluate_batch(p, pts)
        single = np.array([da.evaluate(p, pt) for pt in pts])
        assert np.allclose(batch, single, atol=1e-14)


class TestRecenter:
    def test_linear(self):
        q = da.recenter(da.variable(0, 1, 2), [-0.5], [0.5])
        assert np.allclose(q.coeffs, [-0.5, 0.5, 0.0])

    def test_quadratic(self):
        p = da.power(da.variable(0, 1, 2), 2)
        q = da.recenter(p, [0.5], [0.5])
        assert np.allclose(q.coeffs, [0.25, 0.5, 0.25])

    def test_identity_substitution(self):
        rng = np.random.default_rng(5)
        p = da.TaylorPoly(2, 3, rng.standard_normal(10))
        q = da.recenter(p, [0.0, 0.0], [1.0, 1.0])
        assert np.allclose(q.coeffs, p.coeffs, atol=1e-14)

    def test_child_outside_parent_rejected(self):
        with pytest.raises(ValueError):
            da.recenter(da.variable(0, 1, 2), [0.7], [0.5])

    def test_exactness_property(self):
        # evaluate(recenter(p, o, s), dx) == evaluate(p, o + s*dx) to 1e-12
        rng = np.random.default_rng(17)
        for _ in range(10):
            nv = int(rng.integers(1, 4))
            order = int(rng.integers(1, 6))
            p = da.TaylorPoly(nv, order, rng.standard_normal(da.zero(nv, order).alg.size))
            s = rng.uniform(0.2, 0.5, nv)
            o = rng.uniform(-0.4, 0.4, nv)
            q = da.recenter(p, o, s)
            for _ in range(5):
                dx = rng.uniform(-1, 1, nv)
                assert da.evaluate(q, dx) == pytest.approx(
                    da.evaluate(p, o + s * dx), abs=1e-12)


class TestShiftCenter:
    def test_linear(self):
        q = da.shift_center(da.variable(0, 1, 2), 0, 3.5)
        assert np.allclose(q.coeffs, [3.5, 1.0, 0.0])

    def test_square_binomial(self):
        p = da.power(da.variable(0, 1, 3), 2)
        q = da.shift_center(p, 0, 10.0)
        assert np.allclose(q.coeffs, [100.0, 20.0, 1.0, 0.0])

    def test_only_named_variable_moves(self):
        p = da.variable(0, 2, 2) * da.variable(1, 2, 2)
        q = da.shift_center(p, 1, 2.0)
        assert q.coefficient((1, 0)) == pytest.approx(2.0)
        assert q.coefficient((1, 1)) == pytest.approx(1.0)
        assert q.const == 0.0

    def test_zero_shift_is_identity(self):
        p = da.sin(da.variable(0, 1, 5))
        assert da.shift_center(p, 0, 0.0) is p

    def test_unrestricted_magnitude(self):
        # shifts are physical offsets, not unit-box coordinates
        q = da.shift_center(da.variable(0, 1, 1), 0, 1e6)
        assert q.const == 1e6

    def test_exactness_property(self):
        # evaluate(shift_center(p, v, a), dx) == evaluate(p, dx + a*e_v)
        rng = np.random.default_rng(23)
        for _ in range(10):
            nv = int(rng.integers(1, 4))
            order = int(rng.integers(1, 6))
            p = da.TaylorPoly(nv, order,
                              rng.standard_normal(da.zero(nv, order).alg.size))
            v = int(rng.integers(0, nv))
            a = float(rng.uniform(-2.0, 2.0))
            q = da.shift_center(p, v, a)
            for _ in range(5):
                dx = rng.uniform(-1.0, 1.0, nv)
                moved = dx.copy()
                moved[v] += a
                assert da.evaluate(q, dx) == pytest.approx(
                    da.evaluate(p, moved), abs=1e-10)

    def test_bad_variable(self):
        with pytest.raises(ValueError):
            da.shift_center(da.variable(0, 2, 2), 2, 1.0)

    def test_bad_amount(self):
        with pytest.raises(ValueError):
            da.shift_center(da.variable(0, 1, 2), 0, float("nan"))


class TestRingAxioms:
    def test_distributive_property(self):
        rng = np.random.default_rng(100)
        for _ in range(15):
            nv = int(rng.integers(1, 4))
            order = int(rng.integers(0, 6))
            size = da.zero(nv, order).alg.size
            a, b, c = (da.TaylorPoly(nv, order, rng.standard_normal(size))
                       for _ in range(3))
            left = a * (b + c)
            right = a * b + a * c
            scale = np.max(np.abs(left.coeffs)) + 1.0
            assert np.max(np.abs(left.coeffs - right.coeffs)) / scale < 1e-12

    def test_commutative_associative(self):
        rng = np.random.default_rng(101)
        size = da.zero(2, 4).alg.size
        a, b, c = (da.TaylorPoly(2, 4, rng.standard_normal(size)) for _ in range(3))
        assert np.allclose((a * b).coeffs, (b * a).coeffs, atol=1e-13)
        assert np.allclose(((a * b) * c).coeffs, (a * (b * c)).coeffs, atol=1e-12)


class TestSerialization:
    def test_text_format_graded_lex(self):
        p = poly_from({(0, 0): 1.0, (1, 0): 2.0, (1, 1): -0.5}, 2, 2)
        text = da.to_text(p)
        assert text == "0 0 1\n1 0 2\n1 1 -0.5\n"

    def test_round_trip(self):
        rng = np.random.default_rng(23)
        p = da.TaylorPoly(3, 3, rng.standard_normal(20))
        q = da.from_text(da.to_text(p), 3, 3)
        assert np.allclose(p.coeffs, q.coeffs, atol=0.0)

    def test_bad_line_rejected(self):
        with pytest.raises(ValueError):
            da.from_text("0 1\n", 2, 2)
        with pytest.raises(ValueError):
            da.from_text("3 0.5\n", 1, 2)


class TestHelpers:
    def test_drop_variable(self):
        p = poly_from({(0, 0): 2.0, (1, 0): 3.0, (0, 1): 4.0, (1, 1): 5.0}, 2, 2)
        q = da.drop_variable(p, 1)
        assert q.nvars == 1
        assert np.allclose(q.coeffs, [2.0, 3.0, 0.0])

    def test_order_sizes_slices(self):
        p = poly_from({(0, 0): 1.0, (1, 0): 2.0, (0, 1): -3.0, (1, 1): 0.5}, 2, 2)
        assert np.allclose(p.order_part(1), [2.0, -3.0])
        assert np.allclose(p.order_part(2), [0.0, 0.5, 0.0])

    def test_scalar_division(self):
        p = (2 * da.variable(0, 1, 1)) / 4.0
        assert p.coefficient((1,)) == 0.5
        with pytest.raises(TypeError):
            _ = p / da.variable(0, 1, 1)
