"""Truncated multivariate Taylor polynomial algebra.

A TaylorPoly holds the coefficients of a polynomial in m variables truncated
at total degree n, stored densely in graded lexicographic order: terms sorted
by total degree, then lexicographically by exponent tuple with the first
variable strongest (for m=2, n=2: 1, x0, x1, x0^2, x0*x1, x1^2). All
operations return new objects; coefficient arrays are never mutated in place.

Arithmetic (+, -, *), composition, inversion, antiderivation and the
elementary intrinsics (sin, cos, exp, sqrt, reciprocal, power) are closed on
the same (nvars, order) algebra. The intrinsics also accept plain floats so
dynamics and controller code can be written once and evaluated either
numerically or over polynomials.
"""

from __future__ import annotations

import math
from typing import Iterable, Iterator, Sequence

import numpy as np

# Coefficients below this magnitude are snapped to zero to keep denormals
# from breeding through long multiply chains.
COEFF_EPS = 1e-300

# Condition-number limit for the linear part during map inversion.
COND_LIMIT = 1e12


class AlgebraMismatchError(ValueError):
    """Operands live in different (nvars, order) algebras."""


class CompositionError(ValueError):
    """Inner map unsuitable for composition (wrong arity or nonzero constants)."""


class SingularMapError(ValueError):
    """Linear part of a map is singular or too ill-conditioned to invert."""

    def __init__(self, message: str, condition: float = math.inf):
        super().__init__(message)
        self.condition = condition


class IntrinsicDomainError(ValueError):
    """Constant term outside the domain of the requested intrinsic."""


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    # exponent tuples of fixed total degree, lexicographically descending
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class _Algebra:
    """Shared index tables for one (nvars, order) pair. Cached module-wide."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1:
            raise ValueError(f"nvars must be >= 1, got {nvars}")
        if order < 0:
            raise ValueError(f"order must be >= 0, got {order}")
        self.nvars = nvars
        self.order = order
        exps: list[tuple[int, ...]] = []
        self.degree_start = [0]
        for d in range(order + 1):
            exps.extend(_compositions(d, nvars))
            self.degree_start.append(len(exps))
        self.exponents = tuple(exps)
        self.size = len(exps)
        self.index_of = {e: i for i, e in enumerate(exps)}
        self.exp_array = np.array(exps, dtype=np.int64)
        self.degrees = self.exp_array.sum(axis=1)
        # incremental-monomial tables: each index > 0 descends from the index
        # with one unit removed from its first nonzero variable
        parent = np.zeros(self.size, dtype=np.int64)
        parent_var = np.zeros(self.size, dtype=np.int64)
        for i in range(1, self.size):
            e = list(exps[i])
            v = next(j for j, ej in enumerate(e) if ej > 0)
            e[v] -= 1
            parent[i] = self.index_of[tuple(e)]
            parent_var[i] = v
        self.parent = parent
        self.parent_var = parent_var
        self._mul_table: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        self._diff_tables: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._anti_tables: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def mul_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._mul_table is None:
            # mixed-radix code is additive because componentwise sums stay <= order
            radix = self.order + 1
            codes = (self.exp_array * (radix ** np.arange(self.nvars))).sum(axis=1)
            sort_idx = np.argsort(codes)
            sorted_codes = codes[sort_idx]
            ii, jj = np.nonzero(self.degrees[:, None] + self.degrees[None, :] <= self.order)
            kcode = codes[ii] + codes[jj]
            kk = sort_idx[np.searchsorted(sorted_codes, kcode)]
            self._mul_table = (ii, jj, kk)
        return self._mul_table

    def diff_table(self, var: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        tab = self._diff_tables.get(var)
        if tab is None:
            src, dst, fac = [], [], []
            for i, e in enumerate(self.exponents):
                if e[var] > 0:
                    t = list(e)
                    t[var] -= 1
                    src.append(i)
                    dst.append(self.index_of[tuple(t)])
                    fac.append(float(e[var]))
            tab = (np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                   np.array(fac))
            self._diff_tables[var] = tab
        return tab

    def anti_table(self, var: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        tab = self._anti_tables.get(var)
        if tab is None:
            src, dst, fac = [], [], []
            for i, e in enumerate(self.exponents):
                if self.degrees[i] < self.order:
                    t = list(e)
                    t[var] += 1
                    src.append(i)
                    dst.append(self.index_of[tuple(t)])
                    fac.append(1.0 / t[var])
            tab = (np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                   np.array(fac))
            self._anti_tables[var] = tab
        return tab


_ALGEBRAS: dict[tuple[int, int], _Algebra] = {}


def _algebra(nvars: int, order: int) -> _Algebra:
    key = (nvars, order)
    alg = _ALGEBRAS.get(key)
    if alg is None:
        alg = _Algebra(nvars, order)
        _ALGEBRAS[key] = alg
    return alg


def _clean(coeffs: np.ndarray) -> np.ndarray:
    mask = np.abs(coeffs) < COEFF_EPS
    if mask.any():
        coeffs = np.where(mask, 0.0, coeffs)
    return coeffs


class TaylorPoly:
    """One polynomial in the (nvars, order) truncated algebra."""

    __slots__ = ("alg", "coeffs")

    def __init__(self, nvars: int, order: int, coeffs: Sequence[float] | None = None):
        self.alg = _algebra(nvars, order)
        if coeffs is None:
            self.coeffs = np.zeros(self.alg.size)
        else:
            c = np.asarray(coeffs, dtype=float)
            if c.shape != (self.alg.size,):
                raise ValueError(
                    f"expected {self.alg.size} coefficients for nvars={nvars} "
                    f"order={order}, got {c.shape}")
            self.coeffs = _clean(c.copy())

    @classmethod
    def _wrap(cls, alg: _Algebra, coeffs: np.ndarray) -> "TaylorPoly":
        p = object.__new__(cls)
        p.alg = alg
        p.coeffs = _clean(coeffs)
        return p

    @property
    def nvars(self) -> int:
        return self.alg.nvars

    @property
    def order(self) -> int:
        return self.alg.order

    @property
    def const(self) -> float:
        """Zero-order coefficient."""
        return float(self.coeffs[0])

    def coefficient(self, exponents: Sequence[int]) -> float:
        idx = self.alg.index_of.get(tuple(int(e) for e in exponents))
        if idx is None:
            raise KeyError(f"exponents {tuple(exponents)} outside algebra "
                           f"(nvars={self.nvars}, order={self.order})")
        return float(self.coeffs[idx])

    def terms(self) -> Iterator[tuple[tuple[int, ...], float]]:
        """Nonzero (exponents, coefficient) pairs in graded-lex order."""
        for i in np.nonzero(self.coeffs)[0]:
            yield self.alg.exponents[i], float(self.coeffs[i])

    def nonconst(self) -> "TaylorPoly":
        c = self.coeffs.copy()
        c[0] = 0.0
        return TaylorPoly._wrap(self.alg, c)

    def truncated(self, degree: int) -> "TaylorPoly":
        """Drop all terms of total degree > degree (same algebra)."""
        c = self.coeffs.copy()
        if degree < self.order:
            c[self.alg.degree_start[max(degree, -1) + 1]:] = 0.0
        return TaylorPoly._wrap(self.alg, c)

    def order_part(self, degree: int) -> np.ndarray:
        """Coefficient slice of exactly the given total degree."""
        if degree < 0 or degree > self.order:
            return np.zeros(0)
        s = self.alg.degree_start
        return self.coeffs[s[degree]:s[degree + 1]].copy()

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other: "TaylorPoly") -> None:
        if self.alg is not other.alg:
            raise AlgebraMismatchError(
                f"algebra mismatch: ({self.nvars},{self.order}) vs "
                f"({other.nvars},{other.order})")

    def __add__(self, other):
        if isinstance(other, TaylorPoly):
            self._check(other)
            return TaylorPoly._wrap(self.alg, self.coeffs + other.coeffs)
        c = self.coeffs.copy()
        c[0] += float(other)
        return TaylorPoly._wrap(self.alg, c)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, TaylorPoly):
            self._check(other)
            return TaylorPoly._wrap(self.alg, self.coeffs - other.coeffs)
        c = self.coeffs.copy()
        c[0] -= float(other)
        return TaylorPoly._wrap(self.alg, c)

    def __rsub__(self, other):
        c = -self.coeffs
        c[0] += float(other)
        return TaylorPoly._wrap(self.alg, c)

    def __neg__(self):
        return TaylorPoly._wrap(self.alg, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, TaylorPoly):
            self._check(other)
            ii, jj, kk = self.alg.mul_table()
            prod = self.coeffs[ii] * other.coeffs[jj]
            return TaylorPoly._wrap(
                self.alg, np.bincount(kk, weights=prod, minlength=self.alg.size))
        return TaylorPoly._wrap(self.alg, self.coeffs * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TaylorPoly):
            raise TypeError("polynomial division is not defined; use reciprocal()")
        return TaylorPoly._wrap(self.alg, self.coeffs / float(other))

    def __pow__(self, exponent):
        return power(self, exponent)

    def __repr__(self):
        nnz = int(np.count_nonzero(self.coeffs))
        return f"TaylorPoly(nvars={self.nvars}, order={self.order}, nnz={nnz})"


def zero(nvars: int, order: int) -> TaylorPoly:
    return TaylorPoly(nvars, order)


def constant(value: float, nvars: int, order: int) -> TaylorPoly:
    p = TaylorPoly(nvars, order)
    c = p.coeffs.copy()
    c[0] = float(value)
    return TaylorPoly._wrap(p.alg, c)


def variable(i: int, nvars: int, order: int, center: float = 0.0) -> TaylorPoly:
    """The polynomial center + delta_i (unit coefficient on variable i)."""
    if not 0 <= i < nvars:
        raise ValueError(f"variable index {i} out of range for nvars={nvars}")
    if order < 1:
        raise ValueError("order must be >= 1 to represent a variable")
    p = TaylorPoly(nvars, order)
    c = p.coeffs.copy()
    c[0] = float(center)
    c[1 + i] = 1.0
    return TaylorPoly._wrap(p.alg, c)


def _monomial_values(alg: _Algebra, x: np.ndarray) -> np.ndarray:
    # built incrementally degree by degree: one multiply per monomial
    mono = np.empty(alg.size)
    mono[0] = 1.0
    for i in range(1, alg.size):
        mono[i] = mono[alg.parent[i]] * x[alg.parent_var[i]]
    return mono


def evaluate(p: TaylorPoly, dx: Sequence[float]) -> float:
    """Numeric evaluation at the displacement dx (length nvars)."""
    x = np.asarray(dx, dtype=float)
    if x.shape != (p.nvars,):
        raise ValueError(f"expected displacement of length {p.nvars}, got {x.shape}")
    return float(np.dot(p.coeffs, _monomial_values(p.alg, x)))


def evaluate_batch(p: TaylorPoly, dxs: Sequence[Sequence[float]]) -> np.ndarray:
    """Evaluate at many displacements at once; dxs has shape (k, nvars)."""
    xs = np.asarray(dxs, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != p.nvars:
        raise ValueError(f"expected shape (k, {p.nvars}), got {xs.shape}")
    alg = p.alg
    mono = np.empty((xs.shape[0], alg.size))
    mono[:, 0] = 1.0
    for i in range(1, alg.size):
        mono[:, i] = mono[:, alg.parent[i]] * xs[:, alg.parent_var[i]]
    return mono @ p.coeffs


def derivative(p: TaylorPoly, var: int) -> TaylorPoly:
    """Formal partial derivative with respect to variable var."""
    if not 0 <= var < p.nvars:
        raise ValueError(f"variable index {var} out of range for nvars={p.nvars}")
    src, dst, fac = p.alg.diff_table(var)
    out = np.zeros(p.alg.size)
    np.add.at(out, dst, p.coeffs[src] * fac)
    return TaylorPoly._wrap(p.alg, out)


def antiderivative(p: TaylorPoly, var: int) -> TaylorPoly:
    """Term-wise antiderivative in variable var; top-order terms that would
    exceed the truncation order are dropped."""
    if not 0 <= var < p.nvars:
        raise ValueError(f"variable index {var} out of range for nvars={p.nvars}")
    src, dst, fac = p.alg.anti_table(var)
    out = np.zeros(p.alg.size)
    np.add.at(out, dst, p.coeffs[src] * fac)
    return TaylorPoly._wrap(p.alg, out)


# -- composition and substitution ------------------------------------------


def _monomials_of(inner: Sequence[TaylorPoly], outer_alg: _Algebra) -> list[TaylorPoly]:
    """Monomial values inner^beta for every exponent tuple of outer_alg,
    computed incrementally through the parent tables."""
    alg_in = inner[0].alg
    one = constant(1.0, alg_in.nvars, alg_in.order)
    mono: list[TaylorPoly] = [one]
    for i in range(1, outer_alg.size):
        mono.append(mono[outer_alg.parent[i]] * inner[outer_alg.parent_var[i]])
    return mono


def _check_inner(outer_nvars: int, inner: Sequence[TaylorPoly]) -> None:
    if len(inner) != outer_nvars:
        raise CompositionError(
            f"outer has {outer_nvars} variables but {len(inner)} inner "
            "components were given")
    alg_in = inner[0].alg
    for q in inner:
        if q.alg is not alg_in:
            raise AlgebraMismatchError("inner components live in different algebras")
        if q.const != 0.0:
            raise CompositionError(
                "inner components must have zero constant terms "
                "(recenter the outer polynomial instead)")


def compose(outer: TaylorPoly, inner: Sequence[TaylorPoly]) -> TaylorPoly:
    """Substitute inner[j] for variable j of outer.

    The inner polynomials must share one algebra and have zero constant
    terms, so truncation at the shared order is exact composition of
    truncated series.
    """
    _check_inner(outer.nvars, inner)
    return _substitute_many([outer], inner)[0]


def _substitute(outer: TaylorPoly, inner: Sequence[TaylorPoly]) -> TaylorPoly:
    return _substitute_many([outer], inner)[0]


def _substitute_many(outers: Sequence[TaylorPoly],
                     inner: Sequence[TaylorPoly]) -> list[TaylorPoly]:
    # one shared monomial table; pays off when composing whole maps
    alg_out = outers[0].alg
    alg_in = inner[0].alg
    mono = _monomials_of(inner, alg_out)
    results = []
    for p in outers:
        out = np.zeros(alg_in.size)
        for i in np.nonzero(p.coeffs)[0]:
            out = out + p.coeffs[i] * mono[i].coeffs
        results.append(TaylorPoly._wrap(alg_in, out))
    return results


def recenter(p: TaylorPoly, offsets: Sequence[float], scales: Sequence[float]) -> TaylorPoly:
    """Affine substitution delta_i <- offset_i + scale_i * delta_i.

    Used to re-express a polynomial on a sub-box of the unit domain; exact
    (no truncation) because total degree is preserved. Requires
    |offset_i| + |scale_i| <= 1 so the new unit box maps into the old one.
    """
    off = np.asarray(offsets, dtype=float)
    sc = np.asarray(scales, dtype=float)
    if off.shape != (p.nvars,) or sc.shape != (p.nvars,):
        raise ValueError(f"need {p.nvars} offsets and scales")
    bad = np.abs(off) + np.abs(sc) > 1.0 + 1e-12
    if bad.any():
        v = int(np.nonzero(bad)[0][0])
        raise ValueError(
            f"recenter target leaves the unit domain on variable {v}: "
            f"|{off[v]}| + |{sc[v]}| > 1")
    inner = [constant(off[j], p.nvars, p.order) +
             sc[j] * variable(j, p.nvars, p.order)
             for j in range(p.nvars)]
    return _substitute(p, inner)


def shift_center(p: TaylorPoly, var: int, amount: float) -> TaylorPoly:
    """Move one variable's expansion point: delta_var <- amount + delta_var.

    Exact because total degree is preserved. Unlike recenter this carries no
    unit-domain restriction; the shift is in the variable's own units, for
    nudging an expansion onto a corrected reference (e.g. a refined event
    time) without rebuilding it.
    """
    if not 0 <= var < p.nvars:
        raise ValueError(f"variable index {var} out of range for nvars={p.nvars}")
    amount = float(amount)
    if not math.isfinite(amount):
        raise ValueError(f"shift must be finite, got {amount}")
    if amount == 0.0:
        return p
    inner = [constant(amount, p.nvars, p.order) + variable(j, p.nvars, p.order)
             if j == var else variable(j, p.nvars, p.order)
             for j in range(p.nvars)]
    return _substitute(p, inner)


def drop_variable(p: TaylorPoly, var: int) -> TaylorPoly:
    """Set variable var to zero and remove it from the algebra (nvars - 1)."""
    if p.nvars < 2:
        raise ValueError("cannot drop the only variable")
    if not 0 <= var < p.nvars:
        raise ValueError(f"variable index {var} out of range for nvars={p.nvars}")
    out = TaylorPoly(p.nvars - 1, p.order)
    c = out.coeffs.copy()
    for e, coeff in p.terms():
        if e[var] == 0:
            c[out.alg.index_of[e[:var] + e[var + 1:]]] = coeff
    return TaylorPoly._wrap(out.alg, c)


# -- intrinsics -------------------------------------------------------------


def _apply_series(p: TaylorPoly, series: Sequence[float]) -> TaylorPoly:
    # Horner evaluation of sum_k series[k] * w^k with w the nonconstant part
    w = p.nonconst()
    res = constant(series[-1], p.nvars, p.order)
    for k in range(len(series) - 2, -1, -1):
        res = res * w + series[k]
    return res


def sin(x):
    if not isinstance(x, TaylorPoly):
        return math.sin(x)
    c = x.const
    table = (math.sin(c), math.cos(c), -math.sin(c), -math.cos(c))
    series = [table[k % 4] / math.factorial(k) for k in range(x.order + 1)]
    return _apply_series(x, series)


def cos(x):
    if not isinstance(x, TaylorPoly):
        return math.cos(x)
    c = x.const
    table = (math.cos(c), -math.sin(c), -math.cos(c), math.sin(c))
    series = [table[k % 4] / math.factorial(k) for k in range(x.order + 1)]
    return _apply_series(x, series)


def exp(x):
    if not isinstance(x, TaylorPoly):
        return math.exp(x)
    ec = math.exp(x.const)
    series = [ec / math.factorial(k) for k in range(x.order + 1)]
    return _apply_series(x, series)


def log(x):
    if not isinstance(x, TaylorPoly):
        return math.log(x)
    c = x.const
    if c <= 0.0:
        raise IntrinsicDomainError(f"log needs a positive constant term, got {c}")
    series = [math.log(c)]
    for k in range(1, x.order + 1):
        series.append((-1.0) ** (k + 1) / (k * c ** k))
    return _apply_series(x, series)


def sqrt(x):
    if not isinstance(x, TaylorPoly):
        return math.sqrt(x)
    c = x.const
    if c <= 0.0:
        raise IntrinsicDomainError(f"sqrt needs a positive constant term, got {c}")
    rc = math.sqrt(c)
    series = [rc]
    coeff = rc
    for k in range(1, x.order + 1):
        coeff *= (0.5 - (k - 1)) / (k * c)
        series.append(coeff)
    return _apply_series(x, series)


def reciprocal(x):
    if not isinstance(x, TaylorPoly):
        return 1.0 / x
    c = x.const
    if c == 0.0:
        raise IntrinsicDomainError("reciprocal needs a nonzero constant term")
    series = [((-1.0) ** k) / c ** (k + 1) for k in range(x.order + 1)]
    return _apply_series(x, series)


def power(x, exponent):
    """x**exponent; integer exponents by repeated squaring (negative via
    reciprocal), anything else through exp(exponent * log(x))."""
    if not isinstance(x, TaylorPoly):
        return float(x) ** exponent
    if isinstance(exponent, int) or (isinstance(exponent, float) and exponent.is_integer()):
        k = int(exponent)
        if k < 0:
            return power(reciprocal(x), -k)
        result = constant(1.0, x.nvars, x.order)
        base = x
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result
    if x.const <= 0.0:
        raise IntrinsicDomainError(
            f"non-integer power needs a positive constant term, got {x.const}")
    return exp(float(exponent) * log(x))


def tanh(x):
    if not isinstance(x, TaylorPoly):
        return math.tanh(x)
    # mirror to keep exp's argument nonpositive; tanh is odd
    if x.const > 0.0:
        return -tanh(-x)
    return 1.0 - 2.0 * reciprocal(exp(2.0 * x) + 1.0)


# -- maps -------------------------------------------------------------------


class TaylorMap:
    """A tuple of TaylorPoly components sharing one algebra, with the
    expansion point of the variables kept for bookkeeping."""

    __slots__ = ("components", "reference_point")

    def __init__(self, components: Sequence[TaylorPoly],
                 reference_point: Sequence[float] | None = None):
        comps = tuple(components)
        if not comps:
            raise ValueError("a map needs at least one component")
        alg = comps[0].alg
        for c in comps:
            if c.alg is not alg:
                raise AlgebraMismatchError("map components live in different algebras")
        self.components = comps
        if reference_point is None:
            self.reference_point = np.zeros(alg.nvars)
        else:
            rp = np.asarray(reference_point, dtype=float)
            if rp.shape != (alg.nvars,):
                raise ValueError(f"reference point must have length {alg.nvars}")
            self.reference_point = rp.copy()

    @property
    def nvars(self) -> int:
        return self.components[0].nvars

    @property
    def order(self) -> int:
        return self.components[0].order

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, i: int) -> TaylorPoly:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def evaluate(self, dx: Sequence[float]) -> np.ndarray:
        x = np.asarray(dx, dtype=float)
        if x.shape != (self.nvars,):
            raise ValueError(f"expected displacement of length {self.nvars}")
        mono = _monomial_values(self.components[0].alg, x)
        return np.array([float(np.dot(c.coeffs, mono)) for c in self.components])

    def evaluate_batch(self, dxs: Sequence[Sequence[float]]) -> np.ndarray:
        """Shape (k, ncomponents) array of values at k displacements."""
        xs = np.asarray(dxs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.nvars:
            raise ValueError(f"expected shape (k, {self.nvars}), got {xs.shape}")
        alg = self.components[0].alg
        mono = np.empty((xs.shape[0], alg.size))
        mono[:, 0] = 1.0
        for i in range(1, alg.size):
            mono[:, i] = mono[:, alg.parent[i]] * xs[:, alg.parent_var[i]]
        return mono @ np.array([c.coeffs for c in self.components]).T

    def linear_matrix(self) -> np.ndarray:
        """First-order coefficient matrix, shape (ncomponents, nvars)."""
        if self.order < 1:
            return np.zeros((len(self), self.nvars))
        return np.array([c.coeffs[1:1 + self.nvars] for c in self.components])

    def compose(self, inner: "TaylorMap") -> "TaylorMap":
        """self after inner: substitute inner's components for self's variables."""
        _check_inner(self.nvars, inner.components)
        polys = _substitute_many(self.components, inner.components)
        return TaylorMap(polys, inner.reference_point)

    def __repr__(self):
        return (f"TaylorMap({len(self)} components, nvars={self.nvars}, "
                f"order={self.order})")


def identity_map(nvars: int, order: int) -> TaylorMap:
    return TaylorMap([variable(i, nvars, order) for i in range(nvars)])


def invert(m: TaylorMap) -> TaylorMap:
    """Inverse of a square map with zero constant parts.

    The linear part is inverted by LU elimination with partial pivoting, the
    higher orders by the usual fixed-point iteration
    g <- Linv o (identity - nonlinear(m) o g), which gains one polynomial
    order per sweep.
    """
    n = len(m)
    if n != m.nvars:
        raise SingularMapError(
            f"inversion needs a square map, got {n} components in {m.nvars} variables")
    for c in m.components:
        if c.const != 0.0:
            raise CompositionError("inversion needs zero constant parts")
    lin = m.linear_matrix()
    cond = float(np.linalg.cond(lin, 1))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMapError(
            f"linear part is singular or ill-conditioned (cond ~ {cond:.3e})",
            condition=cond)
    linv = np.linalg.solve(lin, np.eye(n))
    order = m.order

    def linear_combination(mat: np.ndarray, polys: Sequence[TaylorPoly]) -> list[TaylorPoly]:
        out = []
        for i in range(n):
            acc = TaylorPoly(m.nvars, order)
            for j in range(n):
                if mat[i, j] != 0.0:
                    acc = acc + mat[i, j] * polys[j]
            out.append(acc)
        return out

    ident = [variable(i, m.nvars, order) for i in range(n)]
    nonlinear = [c - lp for c, lp in
                 zip(m.components, linear_combination(lin, ident))]
    g = linear_combination(linv, ident)
    for _ in range(order):
        ng = _substitute_many(nonlinear, g)
        g = linear_combination(linv, [ident[i] - ng[i] for i in range(n)])
    return TaylorMap(g)


# -- debug serialization ----------------------------------------------------


def to_text(p: TaylorPoly) -> str:
    """One line per nonzero coefficient: the exponent tuple then the value,
    in graded-lex order. Stable format for golden-file comparisons."""
    lines = []
    for e, c in p.terms():
        lines.append(" ".join(str(x) for x in e) + f" {c:.17g}")
    return "\n".join(lines) + ("\n" if lines else "")


def from_text(text: str, nvars: int, order: int) -> TaylorPoly:
    p = TaylorPoly(nvars, order)
    c = p.coeffs.copy()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != nvars + 1:
            raise ValueError(f"line {lineno}: expected {nvars} exponents and a "
                             f"coefficient, got {len(parts)} fields")
        e = tuple(int(x) for x in parts[:nvars])
        idx = p.alg.index_of.get(e)
        if idx is None:
            raise ValueError(f"line {lineno}: exponents {e} outside order {order}")
        c[idx] = float(parts[-1])
    return TaylorPoly._wrap(p.alg, c)
